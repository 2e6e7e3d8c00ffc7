"""Experiment runner: configs, run records, figure data, parameter sweeps.

Everything downstream of a config is deterministic (no randomness in any core
path), so re-running an identical config reproduces byte-identical CSVs; the
run record additionally carries wall time and is the only non-reproducible
output.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .basis import (
    BoxBasis,
    CosRatio,
    CosShifted,
    KickPotential,
    deriv_squared_spectrum,
    potential_from_dict,
)
from .dephase import (
    DEFAULT_DM_DIM_CAP,
    DensityMatrix,
    DephasingEngine,
    DephasingSchedule,
    write_dephasing_csv,
)
from .entangle import entanglement_series, write_entanglement_csv
from .evolve import (
    basis_state,
    run_trajectory,
    write_trajectory_csv,
)
from .kickop import (
    DEFAULT_DEFECT_TARGET,
    DEFAULT_LEAK_FAIL,
    kick_operator_bessel,
    kick_operator_quadrature,
    transition_matrix,
)

PI = math.pi


@dataclass(frozen=True)
class Tolerances:
    leak_fail: float = DEFAULT_LEAK_FAIL
    cross_tol: float = 1e-6
    defect_target: float = DEFAULT_DEFECT_TARGET


@dataclass(frozen=True)
class DephasingConfig:
    """Optional dephasing stage appended to a run."""

    mode: str
    strength: float
    period: float = 1.0
    offset: float = 0.5
    n_cycles: int = 20
    build_dim: int = 192

    def schedule(self) -> DephasingSchedule:
        return DephasingSchedule(
            mode=self.mode, strength=self.strength, period=self.period, offset=self.offset
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one run."""

    potential: KickPotential
    n_max: int = 64
    n_steps: int = 50
    hbar: float = 1.0
    initial_level: int = 1
    method: str = "auto"
    n_build: int | None = None
    n_show: int = 16
    label: str = "run"
    seed: int | None = None  # reserved; no randomness in any core path
    dephasing: DephasingConfig | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.n_max < 2:
            raise ValueError("n_max must be >= 2")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not 1 <= self.initial_level <= self.n_max:
            raise ValueError("initial_level must lie in 1..n_max")
        if self.method not in ("auto", "quadrature", "bessel"):
            raise ValueError(f"unknown method {self.method!r}")
        for name in ("hbar",):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def to_dict(self) -> dict:
        d = {
            "potential": self.potential.to_dict(),
            "n_max": self.n_max,
            "n_steps": self.n_steps,
            "hbar": self.hbar,
            "initial_level": self.initial_level,
            "method": self.method,
            "n_build": self.n_build,
            "n_show": self.n_show,
            "label": self.label,
            "seed": self.seed,
            "dephasing": asdict(self.dephasing) if self.dephasing else None,
            "tolerances": asdict(self.tolerances),
        }
        return d

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        deph = d.get("dephasing")
        tol = d.get("tolerances") or {}
        return ExperimentConfig(
            potential=potential_from_dict(d["potential"]),
            n_max=int(d.get("n_max", 64)),
            n_steps=int(d.get("n_steps", 50)),
            hbar=float(d.get("hbar", 1.0)),
            initial_level=int(d.get("initial_level", 1)),
            method=d.get("method", "auto"),
            n_build=None if d.get("n_build") is None else int(d["n_build"]),
            n_show=int(d.get("n_show", 16)),
            label=str(d.get("label", "run")),
            seed=None if d.get("seed") is None else int(d["seed"]),
            dephasing=None if deph is None else DephasingConfig(**deph),
            tolerances=Tolerances(**tol),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        return ExperimentConfig.from_dict(json.loads(text))


@dataclass
class RunRecord:
    """Config echo plus result summaries and output locations."""

    config: dict
    version: str
    wall_time_s: float
    leakage: dict
    tables: dict
    outputs: list

    def to_json(self) -> str:
        return json.dumps(
            {
                "config": self.config,
                "version": self.version,
                "wall_time_s": self.wall_time_s,
                "leakage": self.leakage,
                "tables": self.tables,
                "outputs": self.outputs,
            },
            indent=2,
            sort_keys=True,
        )


def build_operator(config: ExperimentConfig):
    """Basis + kick operator for a config, choosing the route."""
    basis = BoxBasis(config.n_max, config.hbar)
    method = config.method
    if method == "auto":
        method = "bessel" if isinstance(config.potential, CosRatio) else "quadrature"
    if method == "bessel":
        u = kick_operator_bessel(
            basis,
            config.potential,
            n_build=config.n_build,
            defect_target=config.tolerances.defect_target,
        )
    else:
        u = kick_operator_quadrature(
            basis,
            config.potential,
            n_build=config.n_build,
            defect_target=config.tolerances.defect_target,
        )
    return basis, u


def run(config: ExperimentConfig, out_dir) -> RunRecord:
    """Full pipeline: operator, populations, entanglement, optional dephasing."""
    t0 = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    basis, u = build_operator(config)
    z = transition_matrix(u, leak_fail=config.tolerances.leak_fail)
    spectrum = deriv_squared_spectrum(config.potential, u.dim, hbar=config.hbar)
    p0 = basis_state(z.dim, config.initial_level)
    traj = run_trajectory(
        z,
        basis,
        p0,
        config.n_steps,
        spectrum=spectrum,
        cross_tol=config.tolerances.cross_tol,
        leak_fail=config.tolerances.leak_fail,
    )
    series = entanglement_series(traj) if config.n_steps >= 2 else None

    outputs = []
    traj_csv = out / f"{config.label}_trajectory.csv"
    write_trajectory_csv(traj, traj_csv, n_show=config.n_show)
    outputs.append(str(traj_csv))
    if series is not None:
        ent_csv = out / f"{config.label}_entanglement.csv"
        write_entanglement_csv(series, ent_csv)
        outputs.append(str(ent_csv))

    tables = {
        "final_energy": float(traj.energies[-1]),
        "energy_gain": float(traj.energies[-1] - traj.energies[0]),
        "final_total_prob": float(traj.total_prob[-1]),
        "closed_form_rate": 0.5 * spectrum.a0,
        "windowed_slope": _tail_slope(traj.energies),
        "final_s_v": None if series is None else float(series.s_v[-1]),
    }

    if config.dephasing is not None:
        deph = config.dephasing
        deph_basis = BoxBasis(config.n_max, config.hbar)
        build_dim = max(deph.build_dim, config.n_max)
        if config.method in ("auto", "bessel") and isinstance(config.potential, CosRatio):
            du = kick_operator_bessel(deph_basis, config.potential, n_build=build_dim)
        else:
            du = kick_operator_quadrature(deph_basis, config.potential, n_build=build_dim)
        engine = DephasingEngine(du, deph_basis, deph.schedule(), dim_cap=DEFAULT_DM_DIM_CAP)
        rho0 = DensityMatrix.pure_level(du.dim, config.initial_level)
        _, records = engine.run(rho0, deph.n_cycles)
        deph_csv = out / f"{config.label}_dephasing.csv"
        write_dephasing_csv(records, deph_csv, n_show=config.n_show)
        outputs.append(str(deph_csv))
        tables["dephasing_final_trace"] = records[-1]["trace"]
        tables["dephasing_final_energy"] = records[-1]["energy"]

    record = RunRecord(
        config=config.to_dict(),
        version=__version__,
        wall_time_s=time.perf_counter() - t0,
        leakage={
            "unitarity_defect": u.unitarity_defect,
            "max_active_leakage": z.max_active_leakage,
            "build_dim": u.dim,
        },
        tables=tables,
        outputs=outputs,
    )
    record_path = out / f"{config.label}_record.json"
    record_path.write_text(record.to_json())
    return record


def _tail_slope(energies: np.ndarray) -> float:
    lo = len(energies) // 2
    n = np.arange(lo, len(energies), dtype=float)
    return float(np.polyfit(n, energies[lo:], 1)[0])


def sweep(configs, out_dir, max_workers: int = 1):
    """Run each config in its own subdirectory; failures never stop siblings.

    Returns a list of per-config dicts {label, status, record | error} and
    writes a one-line-per-config summary CSV.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("sweep needs at least one config")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def one(i_config):
        i, config = i_config
        label = f"{i:03d}_{config.label}"
        try:
            record = run(replace(config, label=config.label), out / label)
            return {"label": label, "status": "ok", "record": record}
        except Exception as exc:  # noqa: BLE001 - isolation is the contract
            return {"label": label, "status": "error", "error": f"{type(exc).__name__}: {exc}"}

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(one, enumerate(configs)))
    else:
        results = [one(ic) for ic in enumerate(configs)]

    summary = out / "summary.csv"
    with open(summary, "w", newline="") as fh:
        fh.write("label,status,closed_form_rate,windowed_slope,final_s_v,max_leakage,error\n")
        for res in results:
            if res["status"] == "ok":
                t = res["record"].tables
                fh.write(
                    ",".join(
                        [
                            res["label"],
                            "ok",
                            format(t["closed_form_rate"], ".17g"),
                            format(t["windowed_slope"], ".17g"),
                            "" if t["final_s_v"] is None else format(t["final_s_v"], ".17g"),
                            format(res["record"].leakage["max_active_leakage"], ".17g"),
                            "",
                        ]
                    )
                    + "\n"
                )
            else:
                msg = res["error"].replace(",", ";").replace("\n", " ")
                fh.write(f"{res['label']},error,,,,,{msg}\n")
    return results


FIGURE_DEFAULTS = {
    1: {"k_list": [4.0, 10.0], "alpha": 1.0, "n_steps": 10, "n_max": 64},
    2: {"k_list": [0.5, 1.0, 2.0], "alpha": 1.0, "n_steps": 50, "n_max": 64},
    3: {"r_list": [PI / 4, PI / 2, PI], "k": 1.0, "n_steps": 50, "n_max": 72},
    4: {"r_list": [PI / 4, PI / 2, PI], "k": 1.0, "n_steps": 50, "n_max": 72},
    5: {"r_list": [PI / 4, PI / 2, PI], "k": 1.0, "n_steps": 50, "n_max": 72},
}


def _figure_trajectories(figure_id: int, overrides: dict):
    params = dict(FIGURE_DEFAULTS[figure_id])
    params.update(overrides or {})
    n_max = params["n_max"]
    n_steps = params["n_steps"]
    runs = []
    if figure_id in (1, 2):
        for k in params["k_list"]:
            pot = CosShifted(k_over_hbar=k, alpha=params["alpha"])
            runs.append((f"k{k:g}", pot))
    else:
        for r in params["r_list"]:
            pot = CosRatio(k_over_hbar=params["k"], ratio=r)
            runs.append((f"r{r:.6g}", pot))
    out = []
    for tag, pot in runs:
        config = ExperimentConfig(potential=pot, n_max=n_max, n_steps=n_steps, label=tag)
        basis, u = build_operator(config)
        z = transition_matrix(u)
        spectrum = deriv_squared_spectrum(pot, u.dim)
        traj = run_trajectory(z, basis, basis_state(z.dim, 1), n_steps, spectrum=spectrum)
        out.append((tag, traj))
    return out, n_steps


def emit_figure(figure_id: int, out_dir, overrides: dict | None = None):
    """Write the data behind one of the five reference figures as CSV.

    1: occupation histogram P_n after N kicks for k in {4, 10} hbar;
    2: ground-level decay P_1(N) for k in {0.5, 1, 2} hbar;
    3: ground-level decay P_1(N) for R in {pi/4, pi/2, pi};
    4: whole-register entanglement S_V(N), same potentials as 3;
    5: newest-spin entanglement E_r(N), same potentials as 3.
    """
    if figure_id not in FIGURE_DEFAULTS:
        raise ValueError(f"unknown figure id {figure_id}; expected 1..5")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trajectories, n_steps = _figure_trajectories(figure_id, overrides or {})
    paths = []
    if figure_id == 1:
        for tag, traj in trajectories:
            path = out / f"fig1_{tag}.csv"
            with open(path, "w", newline="") as fh:
                fh.write("n,P\n")
                for n in range(1, min(traj.dim, 64) + 1):
                    fh.write(f"{n},{format(traj.populations[-1, n - 1], '.17g')}\n")
            paths.append(str(path))
        return paths

    path = out / f"fig{figure_id}.csv"
    tags = [tag for tag, _ in trajectories]
    if figure_id in (2, 3):
        columns = {tag: traj.populations[:, 0] for tag, traj in trajectories}
        start = 0
        header = ",".join(f"P1_{tag}" for tag in tags)
    elif figure_id == 4:
        columns = {tag: entanglement_series(traj).s_v for tag, traj in trajectories}
        start = 0
        header = ",".join(f"SV_{tag}" for tag in tags)
    else:
        columns = {tag: entanglement_series(traj).e_r for tag, traj in trajectories}
        start = 1
        header = ",".join(f"Er_{tag}" for tag in tags)
    with open(path, "w", newline="") as fh:
        fh.write(f"N,{header}\n")
        for n in range(start, n_steps + 1):
            vals = [format(columns[tag][n - start], ".17g") for tag in tags]
            fh.write(f"{n}," + ",".join(vals) + "\n")
    return [str(path)]
