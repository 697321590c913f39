import numpy as np
import pytest

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def random_density(dim, rng, rank=None):
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


def random_star_spec(rng):
    """(bath, omega_a, n_a) with m <= 20 and couplings in [0.01, 1]."""
    from openqi.extensivity import BathSpec

    m = int(rng.integers(1, 21))
    bath = BathSpec(
        omegas=rng.uniform(0.2, 3.0, m),
        couplings=rng.uniform(0.01, 1.0, m),
        occupations=rng.uniform(0.1, 10.0, m),
    )
    return bath, float(rng.uniform(0.2, 3.0)), float(rng.uniform(0.1, 10.0))
