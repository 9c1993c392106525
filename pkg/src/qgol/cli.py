"""Command-line entry point: ``qgol {run,ensemble,classical,compare,scan,scaling}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .classical import BOUNDARIES, classical_evolve, injectivity_scan
from .config import (
    ConfigError,
    RunConfig,
    compare_specs_from_dict,
    config_hash,
    dump_json,
    ensemble_spec_from_dict,
    load_document,
    parse_bits,
    preset_config,
    write_compare,
    write_ensemble,
    write_trajectory,
)
from .dense import BIT_CONVENTION, BackendCapacityError, evolve_exact, init_dense
from .ensemble import run_ensemble, sample_initial_config, scaling_study
from .mps import evolve_mps

log = logging.getLogger("qgol")

EXIT_CONFIG = 2
EXIT_RUNTIME = 1


def _load(path: str | None) -> dict:
    return load_document(path) if path else {}


def _initial_override(args) -> dict | None:
    if getattr(args, "bits", None):
        return {"bits": args.bits}
    if getattr(args, "preset", None):
        return {"preset": args.preset}
    if getattr(args, "rho0", None) is not None:
        return {"random": {"rho0": args.rho0, "seed": args.seed}}
    return None


def cmd_run(args) -> int:
    doc = _load(args.config)
    overrides = {
        "L": args.L, "backend": args.backend, "dt": args.dt, "t_final": args.t_final,
        "order": args.order, "sample_interval": args.sample_interval, "bond_cap": args.bond_cap,
        "output_dir": args.out, "initial": _initial_override(args),
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if args.save_amplitudes:
        doc["save_amplitudes"] = True
    cfg = RunConfig.from_dict(doc)
    config = cfg.initial_config()
    meta = {"config": cfg.to_dict(), "config_hash": cfg.digest(), "code_version": __version__,
            "bit_convention": BIT_CONVENTION}
    if "preset" in cfg.initial:
        meta["preset_placement"] = "pattern centred, left-biased for odd slack"
    if cfg.backend == "exact":
        record = evolve_exact(config, cfg.params(), metadata=meta)
    else:
        record = evolve_mps(config, cfg.params(), m=cfg.bond_cap, metadata=meta)
    if cfg.save_amplitudes and cfg.backend != "exact":
        raise ConfigError("save_amplitudes", "amplitude snapshots are only available for the exact backend")
    paths = write_trajectory(record, cfg.output_dir)
    if cfg.save_amplitudes:
        # the evolution is deterministic, so re-running it reproduces the final state exactly
        np.save(Path(cfg.output_dir) / "run_amplitudes.npy", _final_amplitudes(config, cfg))
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def _final_amplitudes(config, cfg: RunConfig) -> np.ndarray:
    from .dense import trotter_step
    from .lattice import LatticeSpec, build_terms

    params = cfg.params()
    state = init_dense(config)
    steps = params.n_samples * params.steps_per_sample
    trotter_step(state, build_terms(LatticeSpec(cfg.L)), params, n_steps=steps)
    return state.amplitudes


def cmd_ensemble(args) -> int:
    doc = _load(args.config)
    for key in ("backend", "realizations", "L", "master_seed", "bond_cap", "generations"):
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    if args.rho0_grid:
        doc["rho0_grid"] = args.rho0_grid
    spec = ensemble_spec_from_dict(doc)
    summary = run_ensemble(spec, workers=args.workers, checkpoint=args.checkpoint)
    summary.metadata["spec_hash"] = config_hash(spec.to_dict())
    for name, path in write_ensemble(summary, args.out).items():
        print(f"{name}: {path}")
    return 0


def cmd_classical(args) -> int:
    if args.bits:
        config = parse_bits(args.bits)
    elif args.preset:
        config = preset_config(args.preset, args.L)
    elif args.rho0 is not None:
        config = sample_initial_config(args.L, args.rho0, np.random.SeedSequence(args.seed))
    else:
        raise ConfigError("initial", "give --bits, --preset or --rho0")
    traj = classical_evolve(config, args.generations, boundary=args.boundary)
    meta = {"boundary": args.boundary, "generations": args.generations, "code_version": __version__,
            "initial_config": "".join(map(str, config)), "seed": args.seed}
    record = traj.to_record(metadata=meta)
    for name, path in write_trajectory(record, args.out, stem="classical").items():
        print(f"{name}: {path}")
    return 0


def cmd_compare(args) -> int:
    doc = load_document(args.config)
    quantum, classical = compare_specs_from_dict(doc)
    q = run_ensemble(quantum, workers=args.workers, checkpoint=args.checkpoint)
    c = run_ensemble(classical)
    for name, path in write_compare(q, c, args.out).items():
        print(f"{name}: {path}")
    return 0


def cmd_scan(args) -> int:
    report = injectivity_scan(args.L, boundary=args.boundary, max_listed=args.max_listed)
    print(report.summary())
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        dump_json({**report.__dict__, "n_collision_groups": report.n_collision_groups}, Path(args.out))
    return 0


def cmd_scaling(args) -> int:
    result = scaling_study(args.rho0, args.sizes, realizations=args.realizations,
                           generations=args.generations, master_seed=args.master_seed, boundary=args.boundary)
    print(f"diversity exponent {result.exponent:.3f} +- {result.exponent_stderr:.3f} "
          f"(95% CI {result.exponent_ci[0]:.3f}..{result.exponent_ci[1]:.3f})")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        dump_json({**result.to_dict(), "code_version": __version__}, Path(args.out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qgol", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def initial_flags(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--bits", help="explicit initial bit string, site 1 first")
        g.add_argument("--preset", choices=["A", "B"])
        g.add_argument("--rho0", type=float, help="random initial state with this density")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("run", help="evolve one initial state and write trajectory tables")
    p.add_argument("--config", help="RunConfig JSON document; flags override its fields")
    p.add_argument("--L", type=int)
    p.add_argument("--backend", choices=["exact", "mps"])
    p.add_argument("--dt", type=float)
    p.add_argument("--t-final", dest="t_final", type=float)
    p.add_argument("--order", type=int, choices=[1, 2, 4])
    p.add_argument("--sample-interval", dest="sample_interval", type=float)
    p.add_argument("--bond-cap", dest="bond_cap", type=int)
    p.add_argument("--out")
    p.add_argument("--save-amplitudes", action="store_true", help="dense backend only: final amplitudes as .npy")
    initial_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ensemble", help="equilibrium averages over random initial states")
    p.add_argument("--config", help="EnsembleSpec JSON document")
    p.add_argument("--backend", choices=["exact", "mps", "classical"])
    p.add_argument("--L", type=int)
    p.add_argument("--rho0-grid", dest="rho0_grid", type=float, nargs="+")
    p.add_argument("--realizations", type=int)
    p.add_argument("--master-seed", dest="master_seed", type=int)
    p.add_argument("--bond-cap", dest="bond_cap", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--checkpoint", help="JSON-lines file of finished realizations (resumable)")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("classical", help="evolve the classical reversible automaton")
    p.add_argument("--L", type=int, default=32)
    p.add_argument("--generations", type=int, default=200)
    p.add_argument("--boundary", choices=BOUNDARIES, default="frozen")
    p.add_argument("--out", default="out")
    initial_flags(p)
    p.set_defaults(func=cmd_classical)

    p = sub.add_parser("compare", help="quantum and classical ensembles on the same rho0 grid")
    p.add_argument("--config", required=True, help="compare JSON document with quantum and classical sections")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--checkpoint")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("scan", help="exhaustive injectivity check of the classical update")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--boundary", choices=BOUNDARIES, default="frozen")
    p.add_argument("--max-listed", dest="max_listed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("scaling", help="classical equilibrium scaling with chain length")
    p.add_argument("--rho0", type=float, default=0.5)
    p.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128, 256, 512, 1024])
    p.add_argument("--realizations", type=int, default=30)
    p.add_argument("--generations", type=int, default=200)
    p.add_argument("--master-seed", dest="master_seed", type=int, default=0)
    p.add_argument("--boundary", choices=BOUNDARIES, default="frozen")
    p.add_argument("--out")
    p.set_defaults(func=cmd_scaling)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"qgol: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BackendCapacityError, ValueError, OSError, RuntimeError) as exc:
        print(f"qgol: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
