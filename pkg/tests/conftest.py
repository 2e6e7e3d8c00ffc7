import numpy as np
import pytest
from scipy.linalg import qr

from kickedwell.basis import gauss_legendre_rule


def brute_force_kick_matrix(pot, dim, quad_points=8192):
    """Literal (2/pi) integral sin(nx) exp(-i V/hbar) sin(mx) dx, no shortcuts.

    Independent oracle for the production routes: direct double-sine
    quadrature without the product-to-sum reduction.
    """
    x, w = gauss_legendre_rule(quad_points)
    s = np.sin(np.arange(1, dim + 1)[:, None] * x[None, :])
    f = np.exp(-1j * np.asarray(pot.phase(x), dtype=float)) * w
    return (2.0 / np.pi) * (s * f) @ s.T


def haar_unitary(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def shannon_bits(p):
    q = np.asarray(p, dtype=float)
    q = q[q > 0]
    return float(-(q * np.log2(q)).sum())


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
