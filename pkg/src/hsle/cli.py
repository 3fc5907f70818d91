"""Command-line interface: simulation, tracing, lattice sampling and the
registered experiments."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_sim_sle(args) -> int:
    from .sde import simulate_sle, RngSeed
    from .loewner import evolve_points
    from .serialize import driving_to_csv
    d = simulate_sle(args.kappa, args.T, args.dt, RngSeed(args.seed, args.stream))
    if args.track:
        d = evolve_points(d, [float(v) for v in args.track])
    _write(args.out, driving_to_csv(d))
    return 0


def cmd_sim_hsle(args) -> int:
    from .sde import simulate_hsle, HsleParams, RngSeed
    from .serialize import driving_to_csv
    run = simulate_hsle(
        HsleParams(kappa=args.kappa, rho=args.rho, x=args.x, y=args.y,
                   T=args.T, dt_base=args.dt), RngSeed(args.seed, args.stream))
    _write(args.out, driving_to_csv(run.path))
    if args.manifest:
        Path(args.manifest).write_text(json.dumps(run.manifest, indent=2,
                                                  sort_keys=True))
    return 0


def cmd_trace(args) -> int:
    from .serialize import driving_from_csv, curve_to_csv
    from .loewner import forward_trace
    d = driving_from_csv(Path(args.driving).read_text())
    _write(args.out, curve_to_csv(forward_trace(d)))
    return 0


def cmd_unzip(args) -> int:
    from .serialize import curve_from_csv, driving_to_csv
    from .loewner import extract_driving
    c = curve_from_csv(Path(args.curve).read_text())
    _write(args.out, driving_to_csv(extract_driving(c)))
    return 0


def _spin_bc(name: str):
    from .lattice import SpinBoundaryCondition, Spin
    if name == "dobrushin":
        return SpinBoundaryCondition.dobrushin()
    if name == "alternating":
        return SpinBoundaryCondition.alternating()
    if name == "alternating-free":
        return SpinBoundaryCondition.alternating(xi_left=Spin.FREE,
                                                 xi_right=Spin.FREE)
    if name == "free":
        return SpinBoundaryCondition()
    raise SystemExit(f"unknown spin boundary condition {name!r}")


def cmd_ising(args) -> int:
    from .lattice import (BETA_C, LatticeQuad, sample_ising, pack_config,
                          spin_text_dump)
    from .sde import RngSeed
    quad = LatticeQuad(args.size, args.size)
    bc = _spin_bc(args.bc)
    beta = args.beta if args.beta is not None else BETA_C
    out_path = Path(args.out) if args.out else None
    for k in range(args.samples):
        cfg = sample_ising(quad, bc, beta, args.sweeps,
                           RngSeed(args.seed, k))
        if out_path is None:
            sys.stdout.write(spin_text_dump(cfg))
        else:
            target = out_path if args.samples == 1 else \
                out_path.with_suffix(f".{k}{out_path.suffix}")
            target.write_bytes(pack_config(cfg))
    return 0


def cmd_fk(args) -> int:
    from .lattice import (LatticeQuad, FkBoundaryCondition, sample_fk,
                          pack_config, p_critical)
    from .sde import RngSeed
    quad = LatticeQuad(args.size, args.size)
    bc = FkBoundaryCondition.dobrushin() if args.bc == "dobrushin" \
        else FkBoundaryCondition.alternating()
    p = args.p if args.p is not None else p_critical(args.q)
    out_path = Path(args.out) if args.out else None
    for k in range(args.samples):
        cfg = sample_fk(quad, bc, p, args.q, args.sweeps, RngSeed(args.seed, k))
        blob = pack_config(cfg)
        if out_path is None:
            sys.stdout.write(f"sample {k}: {int(cfg.omega.sum())} open edges\n")
        else:
            target = out_path if args.samples == 1 else \
                out_path.with_suffix(f".{k}{out_path.suffix}")
            target.write_bytes(blob)
    return 0


def cmd_pair_chain(args) -> int:
    from .lattice import LatticeQuad, SpinBoundaryCondition
    from .resampler import initial_pair, run_chain
    from .sde import RngSeed
    quad = LatticeQuad(args.size, args.size)
    bc = SpinBoundaryCondition.alternating()
    init = initial_pair(quad, bc, RngSeed(args.seed, 0), sweeps=args.sweeps,
                        epsilon=args.epsilon)
    res = run_chain(init, args.steps, args.epsilon, RngSeed(args.seed, 1),
                    sweeps=args.sweeps)
    _write(args.out, res.to_jsonl())
    return 0


def cmd_experiment(args) -> int:
    from .harness import ExperimentSpec, registry, run
    if args.list:
        for name in sorted(registry()):
            print(name)
        return 0
    if not args.exp_id:
        raise SystemExit("experiment id required (or --list)")
    params = {}
    if args.config:
        params = json.loads(Path(args.config).read_text())
    spec = ExperimentSpec(exp_id=args.exp_id, n=args.n, seed=args.seed,
                          params=params, out_dir=args.out, tag=args.tag)
    report = run(spec)
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return 0 if report.passed else 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="hsle",
                                 description="hypergeometric SLE / critical "
                                             "interface simulation lab")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("sim-sle", help="sample a plain SLE driving path")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--track", nargs="*", default=[])
    p.add_argument("--out", default="-")
    p.set_defaults(fn=cmd_sim_sle)

    p = sub.add_parser("sim-hsle", help="sample a two-marked-point driving path")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--x", type=float, default=1.0)
    p.add_argument("--y", type=float, default=2.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--out", default="-")
    p.add_argument("--manifest", default=None)
    p.set_defaults(fn=cmd_sim_hsle)

    p = sub.add_parser("trace", help="driving CSV -> curve CSV")
    p.add_argument("driving")
    p.add_argument("--out", default="-")
    p.set_defaults(fn=cmd_trace)

    p = sub.add_parser("unzip", help="curve CSV -> driving CSV")
    p.add_argument("curve")
    p.add_argument("--out", default="-")
    p.set_defaults(fn=cmd_unzip)

    p = sub.add_parser("ising", help="sample Ising configurations")
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--bc", default="dobrushin")
    p.add_argument("--sweeps", type=int, default=256)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_ising)

    p = sub.add_parser("fk", help="sample random-cluster configurations")
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--bc", default="dobrushin")
    p.add_argument("--sweeps", type=int, default=128)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_fk)

    p = sub.add_parser("pair-chain", help="run the pair Gibbs chain")
    p.add_argument("--size", type=int, default=32)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--sweeps", type=int, default=64)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default="-")
    p.set_defaults(fn=cmd_pair_chain)

    p = sub.add_parser("experiment", help="run a registered experiment")
    p.add_argument("exp_id", nargs="?", default=None)
    p.add_argument("--list", action="store_true")
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--seed", type=int, default=20_240_101)
    p.add_argument("--out", default=None)
    p.add_argument("--tag", default="run")
    p.add_argument("--config", default=None)
    p.set_defaults(fn=cmd_experiment)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
