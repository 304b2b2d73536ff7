"""Fixed-step time propagation of block density operators.

The integrator is the classical 4th-order explicit scheme.  Derivative
callbacks receive the stage time, so analytic drives (the pump) retain
the nominal order, while the tracking feedback deliberately returns the
value computed at the step start for every stage: the controller only
ever sees states from the previous step, which keeps it causal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .state import BlockDensity

SCHEMES = ("rk4",)

DerivativeFn = Callable[[BlockDensity, float], BlockDensity]
FieldSource = Callable[[float], float]
Observer = Callable[[float, BlockDensity, float], None]


@dataclass(frozen=True)
class PropagatorConfig:
    """Stepper settings: fixed step dt (fs) and local accuracy target.

    ``tolerance`` is the accuracy contract a scheme must meet; the
    fixed-order scheme meets it through the choice of dt (local error
    O(dt^5)), so it is recorded rather than acted on.
    """

    dt: float = 0.01
    scheme: str = "rk4"
    tolerance: float = 1e-8

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


class PropagationError(RuntimeError):
    """A propagation step failed; carries the offending track and time."""

    def __init__(self, message: str, track: str | None = None, time: float | None = None):
        self.track = track
        self.time = time
        parts = [message]
        if track is not None:
            parts.append(f"track={track}")
        if time is not None:
            parts.append(f"t={time:.4f} fs")
        super().__init__("; ".join(parts))


def step(
    rho: BlockDensity,
    derivative_fn: DerivativeFn,
    dt: float,
    t: float = 0.0,
    symmetrize: bool = True,
    trace_drift_limit: float = 1e-6,
) -> BlockDensity:
    """Advance rho by one step of size dt from time t.

    Raises PropagationError when the total trace moves by more than
    trace_drift_limit in the single step, which signals an unstable dt.
    """
    half = 0.5 * dt
    k1 = derivative_fn(rho, t)
    k2 = derivative_fn(rho + half * k1, t + half)
    k3 = derivative_fn(rho + half * k2, t + half)
    k4 = derivative_fn(rho + dt * k3, t + dt)
    out = rho + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    if symmetrize:
        out = out.hermitized()
    drift = out.trace() - rho.trace()
    if not math.isfinite(drift) or abs(drift) > trace_drift_limit:
        raise PropagationError(
            f"trace drifted by {drift:.3e} in one step (limit {trace_drift_limit:.1e}); "
            "reduce dt",
            time=t,
        )
    return out


def propagate(
    rho0: BlockDensity,
    field_source: FieldSource | None,
    t0: float,
    t1: float,
    config: PropagatorConfig,
    generator: Callable[[BlockDensity, float], BlockDensity],
    observers: Sequence[Observer] = (),
    freeze_field: bool = True,
) -> BlockDensity:
    """Step from t0 to t1 with fixed dt.

    ``generator(rho, eps)`` is one of the dynamics generators;
    ``field_source`` supplies eps(t) (None means zero field).  With
    ``freeze_field`` the field value read at the step start is held
    across the step (the feedback contract); analytic drives pass
    ``freeze_field=False`` so the source is resolved at stage times and
    the stepper keeps its nominal order.  Observers run after every step
    with (t, rho, eps_at_step_start).  The interval must be an integer
    number of steps.
    """
    n = _step_count(t0, t1, config.dt)
    rho = rho0.copy()
    if field_source is None:
        derivative_fn: DerivativeFn = lambda r, _t: generator(r, 0.0)
    elif not freeze_field:
        derivative_fn = lambda r, t: generator(r, field_source(t))
    for i in range(n):
        t = t0 + i * config.dt
        eps = field_source(t) if field_source is not None else 0.0
        if field_source is not None and freeze_field:
            derivative_fn = lambda r, _t, _e=eps: generator(r, _e)
        rho = step(rho, derivative_fn, config.dt, t=t)
        for obs in observers:
            obs(t0 + (i + 1) * config.dt, rho, eps)
    return rho


def _step_count(t0: float, t1: float, dt: float) -> int:
    if t1 < t0:
        raise ValueError(f"t1 must not precede t0, got {t0} -> {t1}")
    n = round((t1 - t0) / dt)
    if abs(t0 + n * dt - t1) > 1e-9 * max(1.0, abs(t1)):
        raise ValueError(f"interval [{t0}, {t1}] is not an integer multiple of dt={dt}")
    return n


@dataclass
class ConvergenceRow:
    dt: float
    deltas: Mapping[str, float] | None
    flagged: bool = False
    message: str = ""


@dataclass
class ConvergenceReport:
    """Observable deltas against the finest step size, one row per dt."""

    reference_dt: float
    reference_values: Mapping[str, float]
    rows: list[ConvergenceRow] = field(default_factory=list)

    def orders(self) -> dict[str, float]:
        """Estimated convergence order per observable from successive
        unflagged rows (needs at least two besides the reference)."""
        usable = [r for r in self.rows if not r.flagged and r.deltas]
        out: dict[str, float] = {}
        if len(usable) < 2:
            return out
        for name in self.reference_values:
            estimates = []
            for a, b in zip(usable, usable[1:]):
                da, db = a.deltas.get(name, 0.0), b.deltas.get(name, 0.0)
                if da > 0 and db > 0 and a.dt != b.dt:
                    estimates.append(math.log(da / db) / math.log(a.dt / b.dt))
            if estimates:
                out[name] = sum(estimates) / len(estimates)
        return out

    def format_table(self) -> str:
        names = list(self.reference_values)
        lines = ["dt_fs  " + "  ".join(f"delta_{n}" for n in names)]
        for row in self.rows:
            if row.flagged:
                lines.append(f"{row.dt:g}  UNSTABLE ({row.message})")
            else:
                lines.append(
                    f"{row.dt:g}  " + "  ".join(f"{row.deltas[n]:.3e}" for n in names)
                )
        return "\n".join(lines)


def convergence_report(
    run_fn: Callable[[float], Mapping[str, float]],
    dt_list: Iterable[float],
) -> ConvergenceReport:
    """Run a scenario at each dt and tabulate final-observable deltas
    against the smallest dt.  Unstable step sizes are flagged rows, not
    failures."""
    dts = sorted(set(dt_list), reverse=True)
    if len(dts) < 2:
        ref_dt = dts[0] if dts else float("nan")
        ref = run_fn(ref_dt) if dts else {}
        return ConvergenceReport(reference_dt=ref_dt, reference_values=ref, rows=[])
    results: dict[float, Mapping[str, float] | Exception] = {}
    for dt in dts:
        try:
            results[dt] = run_fn(dt)
        except PropagationError as exc:
            results[dt] = exc
    ref_dt = dts[-1]
    ref = results[ref_dt]
    if isinstance(ref, Exception):
        raise PropagationError(f"reference dt={ref_dt} is itself unstable: {ref}")
    report = ConvergenceReport(reference_dt=ref_dt, reference_values=ref)
    for dt in dts[:-1]:
        res = results[dt]
        if isinstance(res, Exception):
            report.rows.append(ConvergenceRow(dt=dt, deltas=None, flagged=True, message=str(res)))
        else:
            deltas = {k: abs(res[k] - ref[k]) for k in ref}
            report.rows.append(ConvergenceRow(dt=dt, deltas=deltas))
    return report
