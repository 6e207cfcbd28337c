"""Command line interface: simulate, resume, theory tables, env tools."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import theory
from .environment import (
    largest_clearing,
    load_trap_field,
    save_trap_field,
    trap_field_from_seed,
)
from .kernels import Box
from .experiments.config import config_from_dict, config_to_dict, load_config
from .experiments.runner import resume_experiment, run_experiment


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.env_seed is not None:
        overrides["env_seed"] = args.env_seed
    if overrides:
        doc = config_to_dict(cfg)
        doc.update(overrides)
        cfg = config_from_dict(doc)
    paths = run_experiment(
        cfg,
        args.out,
        workers=args.workers,
        checkpoint_path=args.checkpoint,
        max_chunks=args.max_chunks,
    )
    print(f"wrote {paths.outcomes}")
    print(f"wrote {paths.estimates}")
    return 0


def _cmd_resume(args) -> int:
    paths = resume_experiment(args.checkpoint, args.out, workers=args.workers)
    print(f"wrote {paths.outcomes}")
    print(f"wrote {paths.estimates}")
    return 0


def _csv(rows: list[list], header: list[str]) -> None:
    print(",".join(header))
    for row in rows:
        print(",".join("" if v is None else repr(v) if isinstance(v, float) else str(v) for v in row))


def _cmd_theory(args) -> int:
    w = args.what
    if w == "lambda_d":
        _csv([[args.dim, theory.lambda_d(args.dim)]], ["dim", "lambda_d"])
    elif w == "constants":
        c = theory.constants_for(args.dim, args.nu)
        _csv([list(dataclasses.astuple(c))], [f.name for f in dataclasses.fields(c)])
    elif w == "confinement":
        v = theory.confinement_probability_series(args.r, args.t, dim=args.dim)
        _csv([[args.dim, args.r, args.t, v.value, v.asymptotic]],
             ["dim", "r", "t", "p_t", "asymptotic"])
    elif w == "displacement":
        v = theory.displacement_tail(args.k, args.t, dim=args.dim)
        _csv([[args.dim, args.k, args.t, v.value, v.asymptotic]],
             ["dim", "k", "t", "tail", "asymptotic"])
    elif w == "yule":
        ks = range(1, args.kmax + 1)
        rows = [[k, theory.yule_pmf(args.beta, args.t, k), theory.yule_tail(args.beta, args.t, k)]
                for k in ks]
        _csv(rows, ["k", "pmf", "tail"])
    elif w == "ld_rate":
        p = theory.ld_rate_prediction(args.kappa, args.beta)
        band = p.band or (None, None)
        _csv([[p.kappa, p.beta, p.regime, p.value, band[0], band[1]]],
             ["kappa", "beta", "regime", "value", "band_low", "band_high"])
    elif w == "extinction":
        b = theory.extinction_rate_lower_bound(args.beta)
        _csv([[args.beta, b.rate, b.k_opt]], ["beta", "rate", "k_opt"])
    elif w == "growth":
        g = theory.quenched_growth_exponent(args.dim, args.nu, args.beta, args.t)
        _csv([[args.dim, args.nu, args.beta, args.t, g.exponent, g.limit_value]],
             ["dim", "nu", "beta", "t", "exponent", "limit"])
    elif w == "lemma2_radius":
        _csv([[args.dim, args.nu, args.t, theory.lemma2_radius(args.dim, args.nu, args.t)]],
             ["dim", "nu", "t", "radius"])
    elif w == "clearing_scale":
        from .environment import clearing_scale

        s = clearing_scale(args.dim, args.nu, args.ell)
        _csv([[args.dim, args.nu, args.ell, s.r0, s.r_ell, s.clamped]],
             ["dim", "nu", "ell", "r0", "r_ell", "clamped"])
    else:  # pragma: no cover
        raise SystemExit(f"unknown theory table {w!r}")
    return 0


def _cmd_env_gen(args) -> int:
    box = Box.cube(args.half_width, args.dim)
    field = trap_field_from_seed(
        args.seed, args.env_seed, args.dim, args.nu, args.trap_radius, box
    )
    save_trap_field(field, args.out)
    print(f"wrote {args.out} ({len(field.atoms)} atoms)")
    return 0


def _cmd_env_scan(args) -> int:
    field = load_trap_field(args.env)
    report = largest_clearing(
        field, field.bounding_box, args.resolution, inscribed=args.inscribed
    )
    _csv(
        [[report.radius, ";".join(repr(v) for v in report.center), report.resolution]],
        ["clearing_radius", "center", "resolution"],
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bbmlab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run an experiment from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--env-seed", type=int, dest="env_seed")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--checkpoint")
    s.add_argument("--max-chunks", type=int, dest="max_chunks")
    s.set_defaults(fn=_cmd_simulate)

    r = sub.add_parser("resume", help="resume from a checkpoint")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(fn=_cmd_resume)

    t = sub.add_parser("theory", help="print closed-form evaluations as CSV")
    t.add_argument("--what", required=True, choices=[
        "lambda_d", "constants", "confinement", "displacement", "yule",
        "ld_rate", "extinction", "growth", "lemma2_radius", "clearing_scale",
    ])
    t.add_argument("--dim", type=int, default=1)
    t.add_argument("--nu", type=float, default=1.0)
    t.add_argument("--beta", type=float, default=1.0)
    t.add_argument("--kappa", type=float, default=0.5)
    t.add_argument("--t", type=float, default=1.0)
    t.add_argument("--r", type=float, default=1.0)
    t.add_argument("--k", type=float, default=1.0)
    t.add_argument("--kmax", type=int, default=10)
    t.add_argument("--ell", type=float, default=50.0)
    t.set_defaults(fn=_cmd_theory)

    e = sub.add_parser("env", help="trap environment tools")
    esub = e.add_subparsers(dest="env_command", required=True)
    g = esub.add_parser("gen", help="sample and save a trap field")
    g.add_argument("--dim", type=int, default=1)
    g.add_argument("--nu", type=float, required=True)
    g.add_argument("--trap-radius", type=float, required=True, dest="trap_radius")
    g.add_argument("--half-width", type=float, required=True, dest="half_width")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--env-seed", type=int, default=0, dest="env_seed")
    g.add_argument("--out", required=True)
    g.set_defaults(fn=_cmd_env_gen)
    c = esub.add_parser("scan", help="largest-clearing search over a saved field")
    c.add_argument("--env", required=True)
    c.add_argument("--resolution", type=float, required=True)
    c.add_argument("--inscribed", action="store_true")
    c.set_defaults(fn=_cmd_env_scan)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
