"""Density-matrix evolution with kinetic-energy dephasing.

The dephasing generator is the double commutator of p^2 with the state, which
is diagonal in the well eigenbasis, so both the free evolution and the
dephasing exponentiate in closed form: phases exp(-i (E_n - E_m) t / hbar)
and damping exp(-(s/2) (hbar^2 n^2 - hbar^2 m^2)^2) act elementwise and never
touch the diagonal.  Only the kick itself is a matrix conjugation.  A strong
impulse per period reduces the dynamics to the projective measurement map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BoxBasis
from .kickop import KickOperator

DEFAULT_DM_DIM_CAP = 256


@dataclass
class DensityMatrix:
    """Dense complex density matrix over the first ``dim`` well levels."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError("density matrix must be square")
        self.rho = rho

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def validate(self, check_psd: bool = False):
        herm = np.abs(self.rho - self.rho.conj().T).max()
        if herm > 1e-12:
            raise ValueError(f"density matrix not Hermitian: defect {herm:.3e}")
        tr = self.rho.trace()
        if abs(tr - 1.0) > 1e-10:
            raise ValueError(f"density matrix trace {tr} differs from 1")
        if check_psd:
            lo = float(np.linalg.eigvalsh(self.rho).min())
            if lo < -1e-10:
                raise ValueError(f"density matrix has eigenvalue {lo:.3e}")
        return self

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.rho)).copy()

    def purity(self) -> float:
        return float(np.real(np.vdot(self.rho, self.rho)))

    def max_offdiag(self) -> float:
        off = self.rho - np.diag(np.diag(self.rho))
        return float(np.abs(off).max())

    @staticmethod
    def pure_level(dim: int, level: int = 1) -> "DensityMatrix":
        rho = np.zeros((dim, dim), dtype=complex)
        rho[level - 1, level - 1] = 1.0
        return DensityMatrix(rho)


@dataclass(frozen=True)
class DephasingSchedule:
    """Dephasing drive: a constant rate or one impulse per period.

    Continuous(gamma0) over period T matches Kicked(epsilon0 = gamma0 * T):
    the per-period damping budget is the same, and because damping is diagonal
    it commutes through the free segments.
    """

    mode: str
    strength: float
    period: float = 1.0
    offset: float = 0.5

    def __post_init__(self):
        if self.mode not in ("continuous", "kicked"):
            raise ValueError(f"mode must be 'continuous' or 'kicked', got {self.mode!r}")
        if self.strength < 0:
            raise ValueError("dephasing strength must be >= 0")
        if not self.period > 0:
            raise ValueError("period must be positive")
        if not 0 < self.offset < self.period:
            raise ValueError("offset must lie strictly inside the period")

    def impulse_equivalent(self) -> float:
        """epsilon0 of the impulse schedule carrying the same damping per period."""
        return self.strength * self.period if self.mode == "continuous" else self.strength


def _gap_tables(basis: BoxBasis, dim: int):
    p2 = basis.p2_eigenvalues(dim)
    energies = basis.energies(dim)
    gap2 = (p2[:, None] - p2[None, :]) ** 2
    omega = (energies[:, None] - energies[None, :]) / basis.hbar
    return gap2, omega


def dephase_step(rho: DensityMatrix, basis: BoxBasis, strength: float) -> DensityMatrix:
    """Damp coherences by exp(-(strength/2) (hbar^2 n^2 - hbar^2 m^2)^2)."""
    if strength < 0:
        raise ValueError("strength must be >= 0")
    gap2, _ = _gap_tables(basis, rho.dim)
    return DensityMatrix(rho.rho * np.exp(-0.5 * strength * gap2))


def free_step(rho: DensityMatrix, basis: BoxBasis, duration: float) -> DensityMatrix:
    """Rotate coherences by exp(-i (E_n - E_m) duration / hbar)."""
    if duration < 0:
        raise ValueError("duration must be >= 0")
    _, omega = _gap_tables(basis, rho.dim)
    return DensityMatrix(rho.rho * np.exp(-1j * omega * duration))


class DephasingEngine:
    """One-period cycles: free flight, kick, free flight, dephasing.

    The cycle starts just after an observation point (one offset past a kick).
    Continuous damping is applied exactly on each free segment; the kicked
    schedule concentrates the whole budget in one impulse at the observation
    point.  All tables are precomputed, so a cycle is two matrix products and
    two elementwise multiplies.
    """

    def __init__(
        self,
        u: KickOperator,
        basis: BoxBasis,
        schedule: DephasingSchedule,
        dim_cap: int = DEFAULT_DM_DIM_CAP,
    ):
        if u.dim > dim_cap:
            raise ValueError(
                f"density-matrix dimension {u.dim} exceeds the cap {dim_cap}; "
                f"build the kick with a smaller guard band or raise dim_cap"
            )
        self.u = u
        self.basis = basis
        self.schedule = schedule
        self.dim = u.dim
        gap2, omega = _gap_tables(basis, self.dim)
        pre, post = schedule.period - schedule.offset, schedule.offset
        self._phase_pre = np.exp(-1j * omega * pre)
        self._phase_post = np.exp(-1j * omega * post)
        if schedule.mode == "continuous":
            self._phase_pre = self._phase_pre * np.exp(-0.5 * schedule.strength * pre * gap2)
            self._phase_post = self._phase_post * np.exp(-0.5 * schedule.strength * post * gap2)
            self._impulse = None
        else:
            self._impulse = np.exp(-0.5 * schedule.strength * gap2)

    def cycle(self, rho: DensityMatrix) -> DensityMatrix:
        out = rho.rho * self._phase_pre
        out = self.u.matrix @ out @ self.u.matrix.conj().T
        out = out * self._phase_post
        if self._impulse is not None:
            out = out * self._impulse
        return DensityMatrix(out)

    def run(self, rho0: DensityMatrix, n_cycles: int):
        """Evolve n_cycles periods; returns (final state, per-cycle records)."""
        if rho0.dim != self.dim:
            raise ValueError(f"state dim {rho0.dim} != engine dim {self.dim}")
        energies = self.basis.energies(self.dim)
        rho = rho0
        records = [self._record(0, rho, energies)]
        for c in range(1, n_cycles + 1):
            rho = self.cycle(rho)
            records.append(self._record(c, rho, energies))
        return rho, records

    @staticmethod
    def _record(cycle: int, rho: DensityMatrix, energies: np.ndarray) -> dict:
        pops = rho.populations()
        return {
            "cycle": cycle,
            "trace": float(np.real(rho.rho.trace())),
            "energy": float(energies @ pops),
            "purity": rho.purity(),
            "max_offdiag": rho.max_offdiag(),
            "populations": pops,
        }


def kicked_cycle(
    rho: DensityMatrix,
    u: KickOperator,
    basis: BoxBasis,
    schedule: DephasingSchedule,
) -> DensityMatrix:
    """One period applied to a state: free flight, kick, free flight, dephasing."""
    return DephasingEngine(u, basis, schedule).cycle(rho)


def write_dephasing_csv(records, path, n_show: int = 16) -> None:
    """Per-cycle CSV: cycle, trace, energy, purity, max offdiagonal, P_1..P_n_show."""
    n_show = min(n_show, len(records[0]["populations"]))
    with open(path, "w", newline="") as fh:
        cols = ",".join(f"P{i}" for i in range(1, n_show + 1))
        fh.write(f"cycle,trace,energy,purity,max_offdiag,{cols}\n")
        for rec in records:
            head = [
                str(rec["cycle"]),
                format(rec["trace"], ".17g"),
                format(rec["energy"], ".17g"),
                format(rec["purity"], ".17g"),
                format(rec["max_offdiag"], ".17g"),
            ]
            body = [format(v, ".17g") for v in rec["populations"][:n_show]]
            fh.write(",".join(head + body) + "\n")
