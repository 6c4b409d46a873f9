import numpy as np
import pytest

from dystasim.profile import build_profiles
from dystasim.workload import Pattern, SynthSpec, WorkloadSpec, gen_arrivals, synth_traces

# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: int(c.split()[0])):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {cid}: {detail}")


def small_pool(seed: int = 0, samples: int = 20):
    """Three short-layered models; cheap enough for hundreds of simulations."""
    specs = [SynthSpec(name, Pattern.DYNAMIC_ATTENTION, layers, base, 0.6, 0.9, 0.9, 0.9, samples, 0.3)
             for name, layers, base in (("m1", 4, 5e-3), ("m2", 6, 4e-3), ("m3", 3, 9e-3))]
    pool = [t for s in specs for t in synth_traces(s, seed)]
    return pool, build_profiles(pool)


@pytest.fixture(scope="session")
def pool_and_profiles():
    return small_pool()


def random_workloads(count: int, seed: int = 0, max_requests: int = 40):
    """Deterministic list of (requests, profiles) cases with varied size, load and SLO."""
    pool, profiles = small_pool()
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(count):
        n = int(rng.integers(2, max_requests + 1))
        rate = float(rng.uniform(5.0, 80.0))
        slo = float(rng.uniform(1.5, 20.0))
        cases.append(gen_arrivals(WorkloadSpec(pool, rate, n, slo, seed * 100_000 + i)))
    return cases, profiles
