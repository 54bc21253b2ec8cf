import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ccpde import PLaplacian, ProblemSpec, SolveOptions, solve_signed

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def make_benchmark_spec(dim=1, n=128, p=2.0, q=1.5, s=4.0):
    return ProblemSpec(dim=dim, n=n, p=p, q=q, s=s, lam=None,
                       family=PLaplacian(p))


@pytest.fixture(scope="session")
def bench128():
    """Full benchmark pipeline: 1D, n=128, lambda at half the threshold."""
    spec = make_benchmark_spec()
    options = SolveOptions(lambda_fraction=0.5, seed=0)
    t0 = time.perf_counter()
    report = solve_signed(spec, options)
    elapsed = time.perf_counter() - t0
    return {"report": report, "options": options, "elapsed": elapsed}


@pytest.fixture(scope="session")
def smoke2d():
    """2D smoke run, minima only."""
    spec = make_benchmark_spec(dim=2, n=32)
    options = SolveOptions(lambda_fraction=0.5, seed=0,
                           enable_mountain_pass=False)
    t0 = time.perf_counter()
    report = solve_signed(spec, options)
    elapsed = time.perf_counter() - t0
    return {"report": report, "options": options, "elapsed": elapsed}


def rng_values(seed, size, low=-2.0, high=2.0):
    rng = np.random.default_rng(seed)
    return rng.uniform(low, high, size)
