"""Kicked particle in an infinite square well under repeated energy measurements."""

__version__ = "0.1.0"

from .basis import (
    BoxBasis,
    ConstantRateResult,
    CosRatio,
    CosShifted,
    DerivSquaredSpectrum,
    FourierSeries,
    KickPotential,
    closed_form_spectrum,
    constant_rate_check,
    deriv_squared_spectrum,
    eigenfunction,
    gauss_legendre_rule,
    potential_from_dict,
)
from .dephase import (
    DensityMatrix,
    DephasingEngine,
    DephasingSchedule,
    dephase_step,
    free_step,
)
from .entangle import (
    EntanglementSeries,
    entanglement_series,
    joint_state_oracle,
    shannon_entropy_bits,
)
from .evolve import (
    AsymptoticReport,
    EnergyConsistencyError,
    Trajectory,
    asymptotic_rate,
    basis_state,
    energy_increment_prediction,
    run_trajectory,
    step,
)
from .harness import (
    DephasingConfig,
    ExperimentConfig,
    RunRecord,
    Tolerances,
    emit_figure,
    run,
    sweep,
)
from .kickop import (
    KickOperator,
    TransitionMatrix,
    TruncationError,
    bessel_cutoff,
    kick_operator_bessel,
    kick_operator_quadrature,
    transition_matrix,
)

__all__ = [
    "BoxBasis",
    "ConstantRateResult",
    "CosRatio",
    "CosShifted",
    "DerivSquaredSpectrum",
    "FourierSeries",
    "KickPotential",
    "closed_form_spectrum",
    "constant_rate_check",
    "deriv_squared_spectrum",
    "eigenfunction",
    "gauss_legendre_rule",
    "potential_from_dict",
    "DensityMatrix",
    "DephasingEngine",
    "DephasingSchedule",
    "dephase_step",
    "free_step",
    "EntanglementSeries",
    "entanglement_series",
    "joint_state_oracle",
    "shannon_entropy_bits",
    "AsymptoticReport",
    "EnergyConsistencyError",
    "Trajectory",
    "asymptotic_rate",
    "basis_state",
    "energy_increment_prediction",
    "run_trajectory",
    "step",
    "DephasingConfig",
    "ExperimentConfig",
    "RunRecord",
    "Tolerances",
    "emit_figure",
    "run",
    "sweep",
    "KickOperator",
    "TransitionMatrix",
    "TruncationError",
    "bessel_cutoff",
    "kick_operator_bessel",
    "kick_operator_quadrature",
    "transition_matrix",
]
