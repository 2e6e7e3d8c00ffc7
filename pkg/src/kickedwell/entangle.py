"""Entanglement between the particle and the energy-recording apparatus.

After each measured kick the particle's reduced state is diagonal, so the
bipartite entanglement with the whole spin register is the Shannon entropy of
the populations (in bits), and the entanglement with the newest spin equals
the per-step entropy increment.  A small-dimension joint-state oracle builds
the particle-plus-spins pure state explicitly and checks both facts against
the population map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evolve import Trajectory
from .kickop import KickOperator

MAX_ORACLE_DIM = 6


def shannon_entropy_bits(p: np.ndarray) -> float:
    """-sum p log2 p with 0 log 0 = 0; entries must be nonnegative."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0.0):
        raise ValueError("negative probability entry")
    q = p[p > 0.0]
    return float(-(q * np.log2(q)).sum()) + 0.0  # kill -0.0 for pure states


@dataclass(frozen=True)
class EntanglementSeries:
    """s_v[N] for N = 0..steps and e_r[N-1] for N = 1..steps, both in bits."""

    s_v: np.ndarray
    e_r: np.ndarray

    def __post_init__(self):
        for name in ("s_v", "e_r"):
            a = np.asarray(getattr(self, name))
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def steps(self) -> int:
        return len(self.e_r)


def entanglement_series(traj: Trajectory) -> EntanglementSeries:
    """Whole-register entropy s_v(N) and newest-spin entanglement e_r(N).

    e_r(N) = s_v(N) - s_v(N-1) by construction, so the telescoping identity
    s_v(N) = s_v(0) + sum_{n<=N} e_r(n) is exact.
    """
    if traj.steps < 2:
        raise ValueError("need a trajectory with at least 2 steps")
    s_v = np.array([shannon_entropy_bits(traj.populations[n]) for n in range(traj.steps + 1)])
    e_r = np.diff(s_v)
    return EntanglementSeries(s_v=s_v, e_r=e_r)


def write_entanglement_csv(series: EntanglementSeries, path) -> None:
    """Per-step CSV: N, S_V, E_r (E_r blank at N = 0 where it is undefined)."""
    with open(path, "w", newline="") as fh:
        fh.write("N,S_V,E_r\n")
        fh.write(f"0,{format(series.s_v[0], '.17g')},\n")
        for n in range(1, len(series.s_v)):
            fh.write(
                f"{n},{format(series.s_v[n], '.17g')},{format(series.e_r[n - 1], '.17g')}\n"
            )


@dataclass(frozen=True)
class OracleResult:
    """Joint-state oracle output: reduced populations and their entropy."""

    reduced_populations: np.ndarray
    entropy_bits: float
    joint_norm: float


def record_step_joint_state(kick: np.ndarray, amplitudes: np.ndarray) -> np.ndarray:
    """Joint particle (x) d-spin state after one kick-and-record step.

    The recorder flips spin n conditioned on level n (a d-dimensional
    controlled-NOT, up to a global phase); with all spins starting down,
    level amplitude a_n ends up on the spin configuration with only bit n set.
    Returns the joint vector indexed as level * 2^d + spin_bits.
    """
    d = kick.shape[0]
    kicked = kick @ amplitudes
    joint = np.zeros(d * 2**d, dtype=complex)
    for n in range(d):
        joint[n * 2**d + (1 << n)] = -1j * kicked[n]
    return joint


def joint_state_oracle(u, initial_level: int, d: int) -> OracleResult:
    """Explicit one-step partial-trace check on a d-level truncation.

    Builds the particle-plus-register pure state after one kick-and-record
    step from basis level ``initial_level``, traces out all d spins, and
    returns the particle's reduced diagonal with its von Neumann entropy.
    The reduced diagonal must reproduce the population map of the same
    truncated kick block, and the entropy its Shannon entropy.  ``u`` may be
    a KickOperator or any square complex matrix.
    """
    if not 1 <= d <= MAX_ORACLE_DIM:
        raise ValueError(f"oracle dimension must be 1..{MAX_ORACLE_DIM}, got {d}")
    if not 1 <= initial_level <= d:
        raise ValueError(f"initial level {initial_level} outside 1..{d}")
    kick = (u.matrix if isinstance(u, KickOperator) else np.asarray(u, dtype=complex))[:d, :d]
    amps = np.zeros(d, dtype=complex)
    amps[initial_level - 1] = 1.0
    joint = record_step_joint_state(kick, amps)
    psi = joint.reshape(d, 2**d)
    # reduced particle density matrix: trace over the 2^d spin configurations
    rho = psi @ psi.conj().T
    reduced = np.real(np.diag(rho)).copy()
    offdiag = rho - np.diag(np.diag(rho))
    if np.abs(offdiag).max() > 1e-13:
        raise AssertionError("recording spins failed to decohere the particle")
    norm = float(reduced.sum())
    entropy = shannon_entropy_bits(reduced / norm) if norm > 0 else 0.0
    return OracleResult(reduced_populations=reduced, entropy_bits=entropy, joint_norm=norm)


def oracle_matches_population_map(u, initial_level: int, d: int):
    """Run the oracle and compare against the population map on the same block.

    Returns (oracle, mapped populations, max abs deviation, entropy deviation).
    """
    oracle = joint_state_oracle(u, initial_level, d)
    kick = (u.matrix if isinstance(u, KickOperator) else np.asarray(u, dtype=complex))[:d, :d]
    block = np.abs(kick) ** 2
    p0 = np.zeros(d)
    p0[initial_level - 1] = 1.0
    mapped = block @ p0
    dev = float(np.abs(oracle.reduced_populations - mapped).max())
    norm = mapped.sum()
    entropy_dev = abs(
        oracle.entropy_bits - (shannon_entropy_bits(mapped / norm) if norm > 0 else 0.0)
    )
    return oracle, mapped, dev, entropy_dev
