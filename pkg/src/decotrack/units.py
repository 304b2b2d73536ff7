"""Unit conventions.

Energies are in eV, times in fs, and the nuclear coordinate is the
dimensionless normal coordinate.  The reduced Planck constant below is
the single conversion factor between the two: every generator divides
its commutator by it exactly once, so derivatives come out in fs^-1.
"""

HBAR_EV_FS = 0.6582119569
