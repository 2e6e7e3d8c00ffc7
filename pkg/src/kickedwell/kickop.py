"""Kick unitary <n|exp(-i V(x)/hbar)|m> in the well eigenbasis, two routes.

Matrix elements of the kick are exact integrals, but any finite basis cuts
each column's tail: the hard walls make |<n|U|m>| fall off only algebraically
(~1/|n-m|^2 near a column, ~1/|n-m|^3 far from it) whenever V'(0) or V'(pi)
is nonzero.  A flat n_max-square block therefore always has O(1) leakage in
its top columns, no matter how large n_max is.  To hand out operators whose
requested columns are certified complete, construction pads the stored matrix
with a guard band: the full matrix is built on dim >= n_active levels, the
first n_active columns (the ones asked for) carry the unitarity certificate,
and dynamics run on the padded square so population only reaches the lossy
boundary through physically negligible tails.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .basis import (
    PI,
    BoxBasis,
    CosRatio,
    KickPotential,
    default_quad_points,
    gauss_legendre_rule,
)

log = logging.getLogger(__name__)

# |2jR - l| below this is treated as an exact resonance of the series route;
# between the two bounds the value is still well-conditioned (sinc form) but
# the ratio R sits suspiciously close to a resonance, so it gets flagged.
RESONANCE_EXACT = 1e-12
RESONANCE_SUSPECT = 1e-6

DEFAULT_DEFECT_TARGET = 1e-10
DEFAULT_LEAK_FAIL = 1e-4


class TruncationError(RuntimeError):
    """A certified column of the transition matrix leaks more than allowed."""


def bessel_cutoff(strength: float, tiny: float = 1e-16) -> int:
    """Smallest order beyond which |J_j(strength)| stays below tiny.

    Bounded below by ceil(strength) + 40; orders past the argument decay
    super-exponentially, so the bound is almost always already enough.
    """
    j = max(int(math.ceil(abs(strength))) + 40, 1)
    while j < 10_000:
        probe = np.abs(special.jv(np.arange(j + 1, j + 11), abs(strength)))
        if probe.max() < tiny:
            return j
        j += 10
    raise ValueError(f"Bessel envelope for strength {strength} does not decay")


@dataclass(frozen=True)
class KickOperator:
    """Stored kick matrix with its completeness certificate.

    ``matrix`` is the dim x dim array of exact elements <n|U|m>; ``n_active``
    marks the requested block whose columns are certified by
    ``unitarity_defect`` (max-norm of the Gram matrix of the first n_active
    columns minus the identity, inner products taken over all stored rows).
    """

    matrix: np.ndarray
    n_active: int
    hbar: float
    method: str
    unitarity_defect: float
    defect_target: float
    resonance_flags: tuple = ()

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("kick matrix must be square")
        if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
            raise ValueError("kick matrix contains non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def active_block(self) -> np.ndarray:
        return self.matrix[: self.n_active, : self.n_active]

    def save_csv(self, path):
        header = (
            f"# kick operator dim={self.dim} n_active={self.n_active} "
            f"method={self.method} unitarity_defect={self.unitarity_defect:.17g}"
        )
        rows = np.column_stack([self.matrix.real.ravel(), self.matrix.imag.ravel()])
        _write_matrix_csv(path, header, "re,im", rows)


@dataclass(frozen=True)
class TransitionMatrix:
    """Nonnegative matrix z[n][m] = |<n|U|m>|^2 with per-column leakage."""

    z: np.ndarray
    n_active: int
    column_leakage: np.ndarray
    unitarity_defect: float

    def __post_init__(self):
        z = np.asarray(self.z)
        cl = np.asarray(self.column_leakage)
        z.setflags(write=False)
        cl.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "column_leakage", cl)

    @property
    def dim(self) -> int:
        return self.z.shape[0]

    @property
    def max_active_leakage(self) -> float:
        return float(self.column_leakage[: self.n_active].max())

    def save_csv(self, path):
        header = (
            f"# transition matrix dim={self.dim} n_active={self.n_active} "
            f"max_active_leakage={self.max_active_leakage:.17g}"
        )
        _write_matrix_csv(path, header, "z", self.z.ravel()[:, None])


def _write_matrix_csv(path, header, columns, rows):
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        fh.write(columns + "\n")
        for row in rows:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def _auto_build_dim(n_active: int, pot: KickPotential, defect_target: float) -> int:
    """Guard-band size from the element tail |U_nm| ~ bracket/(pi |n-m|^2).

    bracket collects the wall derivatives of the kick phase; when both vanish
    the tails drop an extra two powers and a fixed small pad suffices.
    """
    j_max = bessel_cutoff(pot.strength())
    near = int(math.ceil(pot.bandwidth() * j_max)) + 16
    d0, dpi = pot.wall_phase_derivatives()
    bracket = abs(d0) + abs(dpi)
    if bracket < 1e-9:
        tail = 96
    else:
        l_near = (bracket**2 / (3 * PI**2 * defect_target)) ** (1.0 / 3.0)
        if l_near <= 2 * n_active:
            tail = l_near
        else:
            l_far = ((4 * n_active * bracket / PI) ** 2 / (5 * defect_target)) ** 0.2
            tail = max(2.0 * n_active, l_far)
    return n_active + near + int(math.ceil(tail)) + 32


def _gram_defect(matrix: np.ndarray, n_active: int) -> float:
    cols = matrix[:, :n_active]
    gram = cols.conj().T @ cols
    gram[np.diag_indices(n_active)] -= 1.0
    return float(np.abs(gram).max())


def _assemble_from_moments(g: np.ndarray, dim: int) -> np.ndarray:
    """U[n,m] = (g[|n-m|] - g[n+m]) / pi from cosine moments g[0..2*dim]."""
    n = np.arange(1, dim + 1)
    idx_diff = np.abs(n[:, None] - n[None, :])
    idx_sum = n[:, None] + n[None, :]
    return (g[idx_diff] - g[idx_sum]) / PI


def _cosine_moments_quadrature(pot: KickPotential, q_max: int, quad_points: int) -> np.ndarray:
    """g[q] = integral_0^pi exp(-i V(x)/hbar) cos(q x) dx for q = 0..q_max.

    cos(q x) rows are advanced by the angle-addition recurrence inside each
    chunk (re-seeded exactly at chunk starts, so roundoff stays ~100 eps)
    instead of evaluating q_max * quad_points transcendentals.
    """
    x, w = gauss_legendre_rule(quad_points)
    f = w * np.exp(-1j * np.asarray(pot.phase(x), dtype=float))
    cos_x = np.cos(x)
    sin_x = np.sin(x)
    g = np.empty(q_max + 1, dtype=complex)
    chunk = 256
    f_re = np.ascontiguousarray(f.real)
    f_im = np.ascontiguousarray(f.imag)
    for lo in range(0, q_max + 1, chunk):
        hi = min(lo + chunk, q_max + 1)
        rows = np.empty((hi - lo, x.size))
        c = np.cos(lo * x)
        s = np.sin(lo * x)
        for i in range(hi - lo):
            rows[i] = c
            c, s = c * cos_x - s * sin_x, s * cos_x + c * sin_x
        g[lo:hi] = rows @ f_re + 1j * (rows @ f_im)
    return g


def kick_operator_quadrature(
    basis: BoxBasis,
    pot: KickPotential,
    n_build: int | None = None,
    defect_target: float = DEFAULT_DEFECT_TARGET,
    quad_points: int | None = None,
) -> KickOperator:
    """Kick matrix by numerical quadrature of its defining integrals.

    The product of two well eigenfunctions reduces the element to a pair of
    cosine moments of exp(-i V/hbar), which the composite Gauss-Legendre rule
    integrates to machine accuracy; the assembly is exactly
    (2/pi) integral sin(nx) exp(-i V/hbar) sin(mx) dx.  When n_build is not
    given, the guard band grows (at most three retries) until the certified
    block meets defect_target.
    """
    auto = n_build is None
    dim = _auto_build_dim(basis.n_max, pot, defect_target) if auto else n_build
    if dim < basis.n_max:
        raise ValueError(f"n_build {dim} smaller than the requested basis {basis.n_max}")
    for _ in range(4):
        qp = default_quad_points(dim) if quad_points is None else quad_points
        g = _cosine_moments_quadrature(pot, 2 * dim, qp)
        matrix = _assemble_from_moments(g, dim)
        defect = _gram_defect(matrix, basis.n_max)
        if defect <= defect_target or not auto:
            break
        dim = basis.n_max + int(math.ceil((dim - basis.n_max) * 1.6))
    else:
        log.warning("unitarity defect %.3e above target %.3e at dim %d",
                    defect, defect_target, dim)
    return KickOperator(
        matrix=matrix,
        n_active=basis.n_max,
        hbar=basis.hbar,
        method="quadrature",
        unitarity_defect=defect,
        defect_target=defect_target,
    )


def _series_profile(pot: CosRatio, j_max: int, l_max: int):
    """Coupling profile c[l] with U[n,m] = J0 d_nm + c[|n-m|] - c[n+m].

    Each Bessel order j contributes C_j(l) = 2 a pi sinc(a - l)/(a + l) with
    a = 2 j R, which is the resonance-stable form of
    4 (-1)^l j R sin(2 j R pi)/(4 j^2 R^2 - l^2) and equals pi at 2 j R = |l|.
    """
    kappa = pot.k_over_hbar
    r = pot.ratio
    l = np.arange(l_max + 1, dtype=float)
    c = np.zeros(l_max + 1, dtype=complex)
    flags = []
    j_orders = np.arange(1, j_max + 1)
    weights = special.jv(j_orders, kappa)
    for j, jw in zip(j_orders, weights):
        if jw == 0.0:
            continue
        a = 2.0 * j * r
        delta = a - l
        suspect = np.nonzero((np.abs(delta) >= RESONANCE_EXACT) & (np.abs(delta) < RESONANCE_SUSPECT))[0]
        for li in suspect:
            flags.append((int(j), int(li), float(delta[li])))
        c += ((-1j) ** int(j) * jw) * (2.0 * a * PI * np.sinc(delta) / (a + l))
    return c / PI, flags


def kick_operator_bessel(
    basis: BoxBasis,
    pot: CosRatio,
    j_max: int | None = None,
    n_build: int | None = None,
    defect_target: float = DEFAULT_DEFECT_TARGET,
) -> KickOperator:
    """Kick matrix for V = k cos(2Rx) from its Bessel-function series.

    Independent of the quadrature route: elements come from the closed-form
    partial-wave profile, truncated at the order where the Bessel envelope
    J_j(k/hbar) drops below 1e-16.
    """
    if not isinstance(pot, CosRatio):
        raise TypeError("the series route is defined for the cos(2Rx) potential family")
    if j_max is None:
        j_max = bessel_cutoff(pot.strength())
    auto = n_build is None
    dim = _auto_build_dim(basis.n_max, pot, defect_target) if auto else n_build
    if dim < basis.n_max:
        raise ValueError(f"n_build {dim} smaller than the requested basis {basis.n_max}")
    j0 = float(special.jv(0, pot.k_over_hbar))
    for _ in range(4):
        profile, flags = _series_profile(pot, j_max, 2 * dim)
        n = np.arange(1, dim + 1)
        matrix = profile[np.abs(n[:, None] - n[None, :])] - profile[n[:, None] + n[None, :]]
        matrix[np.diag_indices(dim)] += j0
        defect = _gram_defect(matrix, basis.n_max)
        if defect <= defect_target or not auto:
            break
        dim = basis.n_max + int(math.ceil((dim - basis.n_max) * 1.6))
    else:
        log.warning("unitarity defect %.3e above target %.3e at dim %d",
                    defect, defect_target, dim)
    if flags:
        log.warning("near-resonant series terms (j, l, 2jR-l): %s", flags[:8])
    return KickOperator(
        matrix=matrix,
        n_active=basis.n_max,
        hbar=basis.hbar,
        method="bessel_series",
        unitarity_defect=defect,
        defect_target=defect_target,
        resonance_flags=tuple(flags),
    )


def transition_matrix(u: KickOperator, leak_fail: float = DEFAULT_LEAK_FAIL) -> TransitionMatrix:
    """Z[n][m] = |<n|U|m>|^2 with the per-column leakage bookkeeping.

    Leakage is never renormalized away; a certified column leaking more than
    leak_fail raises, since that bias would feed straight into the diffusion
    rate.
    """
    z = np.abs(u.matrix) ** 2
    column_leakage = 1.0 - z.sum(axis=0)
    tm = TransitionMatrix(
        z=z,
        n_active=u.n_active,
        column_leakage=column_leakage,
        unitarity_defect=u.unitarity_defect,
    )
    if tm.max_active_leakage > leak_fail:
        raise TruncationError(
            f"column leakage {tm.max_active_leakage:.3e} exceeds {leak_fail:.3e}; "
            f"rebuild with a larger basis or guard band"
        )
    return tm
