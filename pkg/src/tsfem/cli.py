"""Command-line front end: run studies, verify property suites, re-emit dumps.

Exit codes: 0 success, 1 failed verification, 2 invalid configuration or
missing artifacts, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tsfem",
                                 description="adaptive T-spline FEM toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an adaptive refinement study")
    run.add_argument("--config", help="config file (flat key-value with sections)")
    run.add_argument("--theta", type=float)
    run.add_argument("--degrees", help="odd degrees, e.g. '3 3'")
    run.add_argument("--sizes", help="domain sizes, e.g. '1 1'")
    run.add_argument("--geometry")
    run.add_argument("--pde")
    run.add_argument("--max-elements", type=int, dest="max_elements")
    run.add_argument("--max-iters", type=int, dest="max_iters")
    run.add_argument("--out")
    run.add_argument("--threads", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--quiet", action="store_true")

    ver = sub.add_parser("verify", help="run property suites")
    ver.add_argument("suite",
                     choices=["mesh", "refine", "basis", "fem", "estimator", "all"])
    ver.add_argument("--seed", type=int, default=0)

    dm = sub.add_parser("dump-mesh", help="re-emit a run's mesh dump")
    dm.add_argument("--run-dir", required=True)
    dm.add_argument("--iter", type=int, required=True)
    dm.add_argument("--out", help="write here instead of stdout")
    return ap


def _cap_threads(n):
    if n is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(n)
    except ImportError:
        pass


def cmd_run(args) -> int:
    from .config import ConfigError, RunConfig

    try:
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
        over = {}
        if args.theta is not None:
            over["theta"] = args.theta
        if args.degrees is not None:
            over["degrees"] = tuple(int(x) for x in args.degrees.split())
        if args.sizes is not None:
            over["sizes"] = tuple(int(x) for x in args.sizes.split())
        if args.geometry is not None:
            over["geometry"] = args.geometry
        if args.pde is not None:
            over["pde"] = args.pde
        if args.max_elements is not None:
            over["max_elements"] = args.max_elements
        if args.max_iters is not None:
            over["max_iters"] = args.max_iters
        if args.out is not None:
            over["out_dir"] = args.out
        if args.threads is not None:
            over["threads"] = args.threads
        if args.seed is not None:
            over["seed"] = args.seed
        cfg = cfg.with_overrides(**over).validate()
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _cap_threads(cfg.threads)

    from .adaptive import MarkingParams, StopRule, run
    from .dyadic import ParamDomain
    from .geometry import make_geometry
    from .problems import make_pde
    from .solver import SolverError

    domain = ParamDomain(cfg.d, cfg.sizes, cfg.degrees)
    geom = make_geometry(cfg.geometry, cfg.geometry_params, cfg.sizes)
    pde = make_pde(cfg.pde, cfg.pde_params)
    try:
        states = run(
            domain,
            geom,
            pde,
            MarkingParams(theta=cfg.theta),
            StopRule(cfg.max_elements, cfg.max_iters, cfg.eta_tol),
            osc_orders=cfg.osc_orders,
            verbose=not args.quiet,
        )
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    if run.last_error is not None:
        print(f"solver failure: {run.last_error}", file=sys.stderr)
        save_run(states, cfg)
        return 3
    out = save_run(states, cfg)
    if not args.quiet:
        print(f"wrote {out}")
    return 0


def save_run(states, cfg) -> str:
    from .adaptive import run_summary, states_to_csv
    from .dyadic import dump_mesh

    out = cfg.resolved_out_dir()
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.cfg"), "w") as fh:
        fh.write(cfg.to_text())
    with open(os.path.join(out, "iterations.csv"), "w") as fh:
        fh.write(states_to_csv(states))
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(run_summary(states, window=cfg.window), fh, indent=1)
        fh.write("\n")
    with open(os.path.join(out, "marks.json"), "w") as fh:
        json.dump([list(s.marked_ids) for s in states], fh)
        fh.write("\n")
    if cfg.dump_meshes:
        mdir = os.path.join(out, "meshes")
        idir = os.path.join(out, "indicators")
        os.makedirs(mdir, exist_ok=True)
        os.makedirs(idir, exist_ok=True)
        for s in states:
            with open(os.path.join(mdir, f"iter_{s.ell:03d}.json"), "w") as fh:
                fh.write(dump_mesh(s.mesh))
            with open(os.path.join(idir, f"iter_{s.ell:03d}.csv"), "w") as fh:
                fh.write("id,volume_part,jump_part\n")
                for k in range(s.mesh.n_elements):
                    fh.write(
                        f"{int(s.mesh.ids[k])},{s.indicator.vol_part[k]!r},"
                        f"{s.indicator.jump_part[k]!r}\n"
                    )
    return out


def cmd_verify(args) -> int:
    from .verify import run_suite

    ok = run_suite(args.suite, seed=args.seed)
    return 0 if ok else 1


def cmd_dump_mesh(args) -> int:
    from .adaptive import MarkingParams  # noqa: F401  (import keeps deps lazy)
    from .config import ConfigError, RunConfig
    from .dyadic import ParamDomain, dump_mesh, uniform_mesh
    from .refine import refine

    cfg_path = os.path.join(args.run_dir, "config.cfg")
    marks_path = os.path.join(args.run_dir, "marks.json")
    if not (os.path.exists(cfg_path) and os.path.exists(marks_path)):
        print(f"error: {args.run_dir} has no config.cfg/marks.json",
              file=sys.stderr)
        return 2
    try:
        cfg = RunConfig.from_file(cfg_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    with open(marks_path) as fh:
        marks = json.load(fh)
    if not 0 <= args.iter < len(marks):
        print(f"error: iteration {args.iter} outside 0..{len(marks) - 1}",
              file=sys.stderr)
        return 2
    mesh = uniform_mesh(ParamDomain(cfg.d, cfg.sizes, cfg.degrees), 0)
    for step in range(args.iter):
        mesh = refine(mesh, marks[step])
    text = dump_mesh(mesh)
    stored = os.path.join(args.run_dir, "meshes", f"iter_{args.iter:03d}.json")
    if os.path.exists(stored):
        with open(stored) as fh:
            if fh.read() != text:
                print("error: replayed mesh differs from the stored dump",
                      file=sys.stderr)
                return 1
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "verify":
        return cmd_verify(args)
    if args.command == "dump-mesh":
        return cmd_dump_mesh(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
