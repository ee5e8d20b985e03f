import numpy as np
import pytest

from reflekt.domain import BoxDomain, Diffusivity
from reflekt import spectral as sp


@pytest.fixture(scope="session")
def unit_box():
    return BoxDomain((0.0,), (1.0,))


@pytest.fixture(scope="session")
def basis_1d(unit_box):
    """d=1, f = 1, J = 256 workhorse basis."""
    return sp.build_basis(unit_box, Diffusivity.constant(1.0), 256)


@pytest.fixture(scope="session")
def basis_1d_slow(unit_box):
    """Small constant diffusivity so late-time decay stays above float noise."""
    return sp.build_basis(unit_box, Diffusivity.constant(0.1), 128)


@pytest.fixture(scope="session")
def single_mode_p0(basis_1d):
    """p0 = 1 + 0.5 * sqrt(2) cos(pi x): one nonzero tail coefficient."""
    tail = np.zeros(basis_1d.J)
    tail[0] = 0.5
    return sp.density_from_coefficients(basis_1d, tail, s=2)


@pytest.fixture(scope="session")
def single_mode_p0_slow(basis_1d_slow):
    tail = np.zeros(basis_1d_slow.J)
    tail[0] = 0.5
    return sp.density_from_coefficients(basis_1d_slow, tail, s=2)


def sobolev_tail(J, s, d=1, eps=0.02, amp=1.0):
    """Coefficients a_j ~ j^{-(s/d) - 1/2 - eps}: borderline H^s membership."""
    j = np.arange(1, J + 1, dtype=float)
    return amp * j ** (-(s / d) - 0.5 - eps)


@pytest.fixture(scope="session")
def rough_p0(basis_1d):
    """Borderline-H^2 density used for the truncation-decay studies."""
    tail = sobolev_tail(basis_1d.J, s=2, amp=0.25)
    return sp.density_from_coefficients(basis_1d, tail, s=2)
