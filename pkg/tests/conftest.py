import os

# Small dense products dominate this suite; BLAS thread fan-out only adds
# wake/sleep latency at these sizes.  Must be set before numpy loads.
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import pytest  # noqa: E402

from decotrack import ExperimentConfig, GridSpec, PropagatorConfig  # noqa: E402


@pytest.fixture(scope="session")
def quick_config():
    """Small but complete experiment used by several harness tests."""
    return ExperimentConfig(
        grid=GridSpec(n_points=16, q_min=-8, q_max=8),
        propagator=PropagatorConfig(dt=0.02),
        t_final=80.0,
        record_stride=20,
    )


@pytest.fixture(scope="session")
def quick_record(quick_config):
    from decotrack import run_experiment

    return run_experiment(quick_config)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance or physics runs")
    config.addinivalue_line(
        "markers",
        "physicsgap: criteria that do not hold at the published parameter set; "
        "they fail honestly (see README)",
    )
