import numpy as np
import pytest

import tripletlink as tl
from tripletlink import dynamics


@pytest.fixture(scope="session")
def demf():
    return tl.demf_params()


@pytest.fixture(scope="session")
def dmfph():
    return tl.dmfph_params()


@pytest.fixture(scope="session")
def demf_fig5():
    """DEMF with a uniform lifetime chosen so that delta0 * tau = 0.05."""
    p = tl.demf_params()
    s = tl.symmetric_spectrum(p)
    tau = 0.05 / (dynamics.ANGULAR * 2.0 * abs(s.a_zero))
    return p.replace(tau_minus=tau, tau_zero=tau, tau_plus=tau), tau


def random_density(rng, dim, rank=None):
    rank = rank or dim
    m = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = m @ m.conj().T
    return rho / np.trace(rho).real
