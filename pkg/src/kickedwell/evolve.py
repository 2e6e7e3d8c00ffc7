"""Measurement-interrupted evolution: populations, energies, diffusion rates.

One measured period maps populations by P(N) = Z P(N-1); the free evolutions
around the kick are diagonal in the measured basis and cancel, so neither the
period T nor the measurement offset enters here.  Energies are tracked two
ways: directly from the populations and through the recursion driven by the
Fourier data of (V')^2, and the two are required to agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import PI, BoxBasis, DerivSquaredSpectrum
from .kickop import DEFAULT_LEAK_FAIL, TransitionMatrix, TruncationError

DEFAULT_CROSS_TOL = 1e-6


class EnergyConsistencyError(RuntimeError):
    """Direct and recursion energies disagree beyond the cross tolerance."""


def basis_state(dim: int, level: int = 1) -> np.ndarray:
    """Probability vector concentrated on one level (1-based)."""
    if not 1 <= level <= dim:
        raise ValueError(f"level {level} outside 1..{dim}")
    p = np.zeros(dim)
    p[level - 1] = 1.0
    return p


def step(z: TransitionMatrix, p: np.ndarray) -> np.ndarray:
    """One kick-and-measure period acting on a population vector."""
    p = np.asarray(p, dtype=float)
    if p.shape != (z.dim,):
        raise ValueError(f"population vector has shape {p.shape}, expected ({z.dim},)")
    return z.z @ p


@dataclass(frozen=True)
class Trajectory:
    """Per-step populations P(N), energies E_N and diffusion rates.

    populations has shape (steps + 1, dim); diffusion_rate[N] is
    (E_N - E_0)/N for N >= 1 and 0 at N = 0.
    """

    populations: np.ndarray
    energies: np.ndarray
    recursion_energies: np.ndarray | None
    total_prob: np.ndarray
    hbar: float

    def __post_init__(self):
        for name in ("populations", "energies", "total_prob"):
            a = np.asarray(getattr(self, name))
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def steps(self) -> int:
        return len(self.energies) - 1

    @property
    def dim(self) -> int:
        return self.populations.shape[1]

    @property
    def diffusion_rate(self) -> np.ndarray:
        n = np.arange(len(self.energies), dtype=float)
        out = np.zeros_like(self.energies)
        out[1:] = (self.energies[1:] - self.energies[0]) / n[1:]
        return out


def energy_increment_prediction(spec: DerivSquaredSpectrum, p_prev: np.ndarray) -> float:
    """Energy gained in one measured kick from the previous populations.

    Equals a0/2 - (1/2 pi) sum_m c_m P_m, with c_m the cosine projections of
    (V')^2; populations beyond the spectrum's range must vanish.
    """
    p_prev = np.asarray(p_prev, dtype=float)
    m = min(spec.m_max, len(p_prev))
    if len(p_prev) > spec.m_max and np.any(p_prev[spec.m_max:] != 0.0):
        raise ValueError("populations extend beyond the spectrum's m_max")
    return 0.5 * spec.a0 - float(spec.cos_proj[:m] @ p_prev[:m]) / (2.0 * PI)


def run_trajectory(
    z: TransitionMatrix,
    basis: BoxBasis,
    p0: np.ndarray,
    n_steps: int,
    spectrum: DerivSquaredSpectrum | None = None,
    cross_tol: float = DEFAULT_CROSS_TOL,
    leak_fail: float = DEFAULT_LEAK_FAIL,
) -> Trajectory:
    """Iterate the population map and track energies both ways.

    When a spectrum is supplied, the recursion energies are computed alongside
    and any per-step disagreement beyond cross_tol (relative) raises.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    p = np.asarray(p0, dtype=float)
    if p.shape != (z.dim,):
        raise ValueError(f"p0 has shape {p.shape}, expected ({z.dim},)")
    if np.any(p < 0.0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("p0 must be a probability vector (entries >= 0, sum 1)")
    if spectrum is not None and spectrum.m_max < z.dim:
        raise ValueError(f"spectrum covers m <= {spectrum.m_max}, need {z.dim}")

    energy_ladder = basis.energies(z.dim)
    populations = np.empty((n_steps + 1, z.dim))
    energies = np.empty(n_steps + 1)
    recursion = np.empty(n_steps + 1) if spectrum is not None else None
    populations[0] = p
    energies[0] = energy_ladder @ p
    if recursion is not None:
        recursion[0] = energies[0]
    for n in range(1, n_steps + 1):
        if recursion is not None:
            recursion[n] = recursion[n - 1] + energy_increment_prediction(
                spectrum, populations[n - 1]
            )
        p = z.z @ p
        populations[n] = p
        energies[n] = energy_ladder @ p
        if recursion is not None:
            scale = max(abs(energies[n]), 1.0)
            if abs(energies[n] - recursion[n]) > cross_tol * scale:
                raise EnergyConsistencyError(
                    f"step {n}: direct energy {energies[n]:.12g} vs recursion "
                    f"{recursion[n]:.12g} beyond {cross_tol:g} relative"
                )
    total_prob = populations.sum(axis=1)
    if total_prob[-1] < 1.0 - leak_fail * n_steps:
        raise TruncationError(
            f"total probability fell to {total_prob[-1]:.12g} after {n_steps} steps"
        )
    return Trajectory(
        populations=populations,
        energies=energies,
        recursion_energies=recursion,
        total_prob=total_prob,
        hbar=basis.hbar,
    )


@dataclass(frozen=True)
class AsymptoticReport:
    """Long-time diffusion rate: closed form vs slope fit vs resolvent term."""

    closed_form_rate: float
    numeric_rate: float
    geometric_correction: float
    converged: bool
    solver: str
    fit_window: tuple[int, int]


def asymptotic_rate(
    z: TransitionMatrix,
    spec: DerivSquaredSpectrum,
    basis: BoxBasis,
    n_steps: int = 2000,
    p0: np.ndarray | None = None,
    rel_tol: float = 0.02,
) -> AsymptoticReport:
    """Compare the closed-form rate a0/2 against a long-run slope fit.

    The finite transient is summarized by the resolvent term
    sum_m c_m ((I - Z)^(-1) p0)_m / (2 pi), evaluated on the truncated basis;
    if the direct solve fails, partial sums of Z^i p0 are accumulated until
    the weighted increment stays below 1e-10.
    """
    if p0 is None:
        p0 = basis_state(z.dim, 1)
    closed = 0.5 * spec.a0
    traj = run_trajectory(z, basis, p0, n_steps, spectrum=spec)
    lo = n_steps // 2
    n = np.arange(lo, n_steps + 1, dtype=float)
    slope = float(np.polyfit(n, traj.energies[lo:], 1)[0])

    c = spec.cos_proj[: z.dim]
    solver = "resolvent"
    try:
        a = np.eye(z.dim) - z.z
        x = np.linalg.solve(a, p0)
        residual = float(np.abs(a @ x - p0).max())
        correction = float(c @ x) / (2.0 * PI)
        # x holds expected visit counts; an astronomically large solution means
        # (I - Z) is singular for every practical purpose (e.g. Z = identity)
        if not math.isfinite(correction) or residual > 1e-8 or np.abs(x).max() > 1e12:
            raise np.linalg.LinAlgError("resolvent not trustworthy")
    except np.linalg.LinAlgError:
        solver = "partial-sum"
        v = p0.copy()
        x = v.copy()
        correction = float(c @ x) / (2.0 * PI)
        for _ in range(n_steps):
            v = z.z @ v
            delta = float(c @ v) / (2.0 * PI)
            x += v
            correction += delta
            if abs(delta) < 1e-10:
                break

    if closed > 0.0:
        converged = abs(slope - closed) <= rel_tol * closed
    else:
        converged = abs(slope) < 1e-12
    return AsymptoticReport(
        closed_form_rate=closed,
        numeric_rate=slope,
        geometric_correction=correction,
        converged=converged,
        solver=solver,
        fit_window=(lo, n_steps),
    )


def write_trajectory_csv(traj: Trajectory, path, n_show: int = 16) -> None:
    """Per-step CSV: N, E_N, D_N, total_prob, P_1..P_n_show."""
    n_show = min(n_show, traj.dim)
    d = traj.diffusion_rate
    with open(path, "w", newline="") as fh:
        cols = ",".join(f"P{i}" for i in range(1, n_show + 1))
        fh.write(f"N,E,D,total_prob,{cols}\n")
        for n in range(traj.steps + 1):
            head = [
                str(n),
                format(traj.energies[n], ".17g"),
                format(d[n], ".17g"),
                format(traj.total_prob[n], ".17g"),
            ]
            body = [format(v, ".17g") for v in traj.populations[n, :n_show]]
            fh.write(",".join(head + body) + "\n")
