"""Command line front end.

Subcommands: ``simulate`` (one path), ``control`` (switching run),
``ensemble`` (Monte Carlo study with CSV tables), ``audit`` (drift growth
constants), ``gbm`` and ``scalefn`` (the 1D laboratory) and ``verify``
(structural/acceptance suites; nonzero exit on failure).

The base seed resolves as: ``--seed`` flag, else the ``STOCHTAME_SEED``
environment variable, else the config's ensemble section.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import KERNEL_BACKEND, __version__


def _load_config(path: str):
    from .config import ConfigError, parse_config

    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SystemExit(f"cannot read config {path}: {exc}")
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise SystemExit(f"invalid config {path}: {exc}")


def _resolve_seed(args, cfg) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("STOCHTAME_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise SystemExit(f"STOCHTAME_SEED must be an integer, got {env!r}")
    return cfg.ensemble.base_seed if cfg is not None else 0


def _out_dir(args, cfg) -> Path:
    from .trajio import ensure_dir

    directory = args.out or (cfg.output.directory if cfg else "out")
    return Path(ensure_dir(directory))


def cmd_simulate(args) -> int:
    import numpy as np

    from .config import build_drift, build_grid, build_noise, build_stepper, config_hash
    from .config import InitialBuilder
    from .integrators import integrate_path
    from .noise import WienerPath
    from .trajio import write_trajectory

    cfg = _load_config(args.config)
    seed = _resolve_seed(args, cfg)
    drift = build_drift(cfg)
    grid = build_grid(cfg)
    noise = build_noise(cfg, drift)
    stepper = build_stepper(cfg, save_stride=cfg.output.save_stride)
    x0 = InitialBuilder(cfg.model)(grid)
    wiener = WienerPath(seed, stepper.dt) if noise else None
    record = integrate_path(
        x0, drift, noise, stepper, wiener, seed=seed, config_hash=config_hash(cfg)
    )
    out = _out_dir(args, cfg) / "trajectory.csv"
    write_trajectory(out, record)
    if not args.quiet:
        print(f"status={record.status} rows={record.n_rows} final_norms="
              f"G={record.norm_G[-1]:.6g},F0={record.norm_F0[-1]:.6g}")
        print(f"wrote {out}")
    return 0


def cmd_control(args) -> int:
    from .config import (
        InitialBuilder,
        build_drift,
        build_grid,
        build_noise,
        build_schedule,
        build_stepper,
        config_hash,
    )
    from .control import control_run, validate_schedule
    from .noise import WienerPath
    from .trajio import write_events, write_trajectory

    cfg = _load_config(args.config)
    if not cfg.control.enabled:
        raise SystemExit("config has control.enabled = false")
    seed = _resolve_seed(args, cfg)
    drift = build_drift(cfg)
    grid = build_grid(cfg)
    noise = build_noise(cfg, drift)
    stepper = build_stepper(cfg, save_stride=cfg.output.save_stride)
    sched = build_schedule(cfg)
    x0 = InitialBuilder(cfg.model)(grid)
    wiener = WienerPath(seed, stepper.dt) if noise else None
    record = control_run(
        x0, drift, noise, sched, stepper, stepper.t_end, wiener,
        seed=seed, config_hash=config_hash(cfg),
    )
    report = validate_schedule(record, sched)
    out = _out_dir(args, cfg)
    write_trajectory(out / "trajectory.csv", record)
    write_events(out / "events.csv", record.events, config_hash(cfg), seed)
    if not args.quiet:
        print(
            f"status={record.status} events={len(record.events)} "
            f"valid={report.passed} dwell={report.alpha_dwell}"
        )
        print(f"wrote {out}/trajectory.csv, {out}/events.csv")
    return 0 if report.passed else 1


def cmd_ensemble(args) -> int:
    import numpy as np

    from .config import (
        InitialBuilder,
        build_drift,
        build_grid,
        build_noise,
        build_schedule,
        build_stepper,
        config_hash,
    )
    from .experiments import EnsembleConfig, run_ensemble, uniform_control_report
    from .trajio import ALDOUS_HEADER, UNIFORM_HEADER, write_keyvalue, write_table

    cfg = _load_config(args.config)
    seed = _resolve_seed(args, cfg)
    drift = build_drift(cfg)
    grid = build_grid(cfg)
    noise = build_noise(cfg, drift)
    stepper = build_stepper(cfg, save_stride=cfg.output.save_stride)
    n_paths = args.paths or cfg.ensemble.n_paths
    K_grid = cfg.ensemble.K_grid or tuple(float(x) for x in np.logspace(-2, 10, 49))
    ens = EnsembleConfig(
        grid=grid,
        drift=drift,
        initial=InitialBuilder(cfg.model),
        stepper=stepper,
        noise=noise,
        n_paths=n_paths,
        base_seed=seed,
        d_list=cfg.ensemble.d_list,
        K_grid=K_grid,
        T=cfg.ensemble.T,
        mode="control" if cfg.control.enabled else "plain",
        schedule=build_schedule(cfg),
        delta_grid=cfg.ensemble.delta_grid or None,
    )
    stats = run_ensemble(ens, jobs=args.jobs)
    h = config_hash(cfg)
    out = _out_dir(args, cfg)
    write_table(out / "uniform_control.csv", stats.sup_table("F0"), UNIFORM_HEADER, h, seed)
    write_table(out / "time_integral.csv", stats.int_table(), UNIFORM_HEADER, h, seed)
    summary = {}
    if len(cfg.ensemble.d_list) >= 2:
        rep = uniform_control_report(stats, cfg.ensemble.epsilon_target)
        summary.update(rep.as_dict())
    if ens.delta_grid:
        write_table(
            out / "aldous.csv", stats.aldous_table(cfg.ensemble.eta), ALDOUS_HEADER, h, seed
        )
    for d in ens.d_list:
        summary[f"numeric_failures_d{d}"] = stats.n_numeric_failures(d)
    write_keyvalue(out / "report.csv", summary, h, seed)
    if not args.quiet:
        print(json.dumps({k: v for k, v in summary.items()}, default=str, indent=2))
        print(f"wrote tables under {out}")
    return 0


def cmd_audit(args) -> int:
    from .config import build_drift, config_hash
    from .experiments import assumption_audit
    from .trajio import write_keyvalue

    cfg = _load_config(args.config)
    seed = _resolve_seed(args, cfg)
    drift = build_drift(cfg)
    constants, report = assumption_audit(drift, n_samples=args.samples, seed=seed)
    payload = {**constants.as_dict(), **{f"report_{k}": v for k, v in report.items()}}
    out = _out_dir(args, cfg)
    write_keyvalue(out / "audit.csv", payload, config_hash(cfg), seed)
    if not args.quiet:
        for key in ("C1", "gamma1", "C2", "gamma13"):
            print(f"{key} = {constants.as_dict()[key]:.6g}")
        print(f"wrote {out}/audit.csv")
    return 0


def cmd_gbm(args) -> int:
    from .experiments import gbm_study
    from .noise import GbmSpec

    seed = args.seed if args.seed is not None else int(os.environ.get("STOCHTAME_SEED", "0"))
    rows = gbm_study(
        [GbmSpec(args.a, args.b, args.f0)],
        n_paths=args.paths or 1000,
        T=args.T,
        seed=seed,
        threshold=args.threshold,
    )
    print(json.dumps(rows[0].as_dict(), indent=2))
    return 0


def cmd_scalefn(args) -> int:
    from .noise import ScaleFunctionSpec, gbm_scale_closed_form, scale_function

    spec = ScaleFunctionSpec(lambda y: args.a * y, lambda y: args.b * y, c=args.c)
    value = scale_function(spec, args.x)
    closed = gbm_scale_closed_form(args.a, args.b, args.c, args.x)
    print(json.dumps({"x": args.x, "scale": value, "closed_form": closed}, indent=2))
    return 0


def cmd_verify(args) -> int:
    from .acceptance import ALL_CRITERIA, TRIVIAL_CRITERIA, run_acceptance

    names = {
        "trivial": TRIVIAL_CRITERIA,
        "acceptance": ALL_CRITERIA,
        "full": ALL_CRITERIA,
    }[args.suite]
    echo = (lambda *_: None) if args.quiet else print
    seed = args.seed if args.seed is not None else int(os.environ.get("STOCHTAME_SEED", "0")) or None
    kwargs = {}
    if seed is not None:
        kwargs["seed"] = seed
    results = run_acceptance(names, echo=echo, **kwargs)
    failed = [r.name for r in results if not r.passed]
    if failed and not args.quiet:
        print(f"FAILED: {', '.join(failed)}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochtame",
        description="Pseudo-spectral simulation of blow-up taming by superlinear noise",
    )
    parser.add_argument("--version", action="version", version=f"stochtame {__version__} ({KERNEL_BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("simulate", help="integrate a single path")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("control", help="run the switching strategy")
    common(p)
    p.set_defaults(func=cmd_control)

    p = sub.add_parser("ensemble", help="Monte Carlo ensemble with summary tables")
    common(p)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("audit", help="fit drift growth constants")
    common(p)
    p.add_argument("--samples", type=int, default=200)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("gbm", help="geometric Brownian motion laboratory")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=2.0)
    p.add_argument("--f0", type=float, default=1.0)
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--threshold", type=float, default=1e-2)
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_gbm)

    p = sub.add_parser("scalefn", help="scale function of a 1D diffusion (mu=a*x, sigma=b*x)")
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=2.0)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_scalefn)

    p = sub.add_parser("verify", help="run the structural/acceptance suites")
    p.add_argument("--suite", choices=("trivial", "acceptance", "full"), default="trivial")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
