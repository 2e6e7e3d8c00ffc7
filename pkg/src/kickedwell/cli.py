"""Command-line front end: kick-matrix, evolve, asymptote, dephase, figure, sweep."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .basis import deriv_squared_spectrum
from .evolve import asymptotic_rate
from .harness import ExperimentConfig, build_operator, emit_figure, run, sweep
from .kickop import transition_matrix


def _load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_json(Path(path).read_text())


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    from dataclasses import replace

    updates = {}
    if getattr(args, "n_max", None) is not None:
        updates["n_max"] = args.n_max
    if getattr(args, "steps", None) is not None:
        updates["n_steps"] = args.steps
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    return replace(config, **updates) if updates else config


def cmd_kick_matrix(args) -> int:
    config = _apply_overrides(_load_config(args.config), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _, u = build_operator(config)
    z = transition_matrix(u, leak_fail=config.tolerances.leak_fail)
    u_path = out / f"{config.label}_kick_operator.csv"
    z_path = out / f"{config.label}_transition_matrix.csv"
    u.save_csv(u_path)
    z.save_csv(z_path)
    print(f"dim={u.dim} n_active={u.n_active} method={u.method}")
    print(f"unitarity_defect={u.unitarity_defect:.6e} max_active_leakage={z.max_active_leakage:.6e}")
    print(f"wrote {u_path} and {z_path}")
    return 0


def cmd_evolve(args) -> int:
    config = _apply_overrides(_load_config(args.config), args)
    record = run(config, args.out)
    print(record.to_json())
    return 0


def cmd_asymptote(args) -> int:
    config = _apply_overrides(_load_config(args.config), args)
    basis, u = build_operator(config)
    z = transition_matrix(u, leak_fail=config.tolerances.leak_fail)
    spectrum = deriv_squared_spectrum(config.potential, u.dim, hbar=config.hbar)
    n_steps = args.steps if args.steps is not None else 2000
    report = asymptotic_rate(z, spectrum, basis, n_steps=n_steps)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "closed_form_rate": report.closed_form_rate,
        "numeric_rate": report.numeric_rate,
        "geometric_correction": report.geometric_correction,
        "converged": report.converged,
        "solver": report.solver,
        "fit_window": list(report.fit_window),
    }
    path = out / f"{config.label}_asymptotics.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_dephase(args) -> int:
    config = _apply_overrides(_load_config(args.config), args)
    if config.dephasing is None:
        print("config has no dephasing section", file=sys.stderr)
        return 2
    record = run(config, args.out)
    print(record.to_json())
    return 0


def cmd_figure(args) -> int:
    overrides = {}
    if args.steps is not None:
        overrides["n_steps"] = args.steps
    if args.n_max is not None:
        overrides["n_max"] = args.n_max
    if args.k is not None:
        overrides["k_list"] = [args.k]
        overrides["k"] = args.k
    paths = emit_figure(args.id, args.out, overrides)
    for p in paths:
        print(p)
    return 0


def cmd_sweep(args) -> int:
    payload = json.loads(Path(args.config).read_text())
    entries = payload["runs"] if isinstance(payload, dict) else payload
    configs = [ExperimentConfig.from_dict(d) for d in entries]
    results = sweep(configs, args.out, max_workers=args.workers)
    failures = [r for r in results if r["status"] != "ok"]
    for res in results:
        line = res["label"] + ": " + res["status"]
        if res["status"] != "ok":
            line += f" ({res['error']})"
        print(line)
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kickedwell",
        description="Kicked particle in an infinite square well under repeated energy measurements",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--n-max", dest="n_max", type=int, default=None)
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--seed", type=int, default=None, help="reserved; runs are deterministic")

    p = sub.add_parser("kick-matrix", help="build and dump the kick and transition matrices")
    common(p)
    p.set_defaults(func=cmd_kick_matrix)

    p = sub.add_parser("evolve", help="run populations, energies, entanglement")
    common(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("asymptote", help="closed-form vs slope-fit diffusion rate")
    common(p)
    p.set_defaults(func=cmd_asymptote)

    p = sub.add_parser("dephase", help="density-matrix run with the config's dephasing section")
    common(p)
    p.set_defaults(func=cmd_dephase)

    p = sub.add_parser("figure", help="emit the data behind one of the reference figures")
    p.add_argument("--id", type=int, required=True, choices=range(1, 6))
    p.add_argument("--out", required=True)
    p.add_argument("--n-max", dest="n_max", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--k", type=float, default=None, help="override the kick strength list")
    p.add_argument("--seed", type=int, default=None, help="reserved; runs are deterministic")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("sweep", help="run a list of configs, isolating failures")
    p.add_argument("--config", required=True, help="JSON file with a list of configs")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="reserved; runs are deterministic")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
