"""Command-line entry point: ``romdd <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import mesh, storage

log = logging.getLogger("romdd")


def _summary(rows, key="eps"):
    vals = np.array([r[key] for r in rows if r.get(key) is not None], dtype=float)
    if vals.size == 0:
        return "no reference solutions computed"
    return f"{key}: median {np.median(vals):.3e}, max {vals.max():.3e} over {vals.size} runs"


def cmd_mesh(args, cfg):
    if args.action == "gen":
        m = ex.build_mesh(" ".join(args.recipe))
        text = mesh.write_mesh(m)
        if args.file:
            Path(args.file).write_text(text)
        else:
            sys.stdout.write(text)
    else:
        m = mesh.parse_mesh(Path(args.file).read_text())
        m.validate()
        print(f"{m.shape} mesh: {m.n_vertices} vertices, {m.n_elements} elements, {len(m.boundary_edges)} boundary edges")
        for attr in sorted(set(m.boundary_attrs)):
            print(f"  {attr}: {m.boundary_attrs.count(attr)} edges")
    return 0


def cmd_sample(args, cfg):
    rows = ex.sample_params(args.kind, args.count, cfg.seed, test=args.test)
    path = ex.write_csv(Path(cfg.out) / f"params_{args.kind}{'_test' if args.test else ''}.csv", rows, list(rows[0]))
    print(path)
    return 0


def cmd_train(args, cfg):
    lib = ex.train(cfg)
    for r in sorted(lib.bases):
        b = lib.bases[r]
        energy = float(np.sum(b.sigma[: cfg.rank]) / np.sum(b.sigma)) if np.any(b.sigma) else 0.0
        print(f"{r}: {b.n_samples} snapshots, stored rank {b.rank}, energy of first {cfg.rank} modes {energy:.6f}")
    print(cfg.library_dir)
    return 0


def cmd_scaleup(args, cfg):
    rows = ex.scaleup(cfg)
    print(ex.write_csv(Path(cfg.out) / "scaleup.csv", rows, ex.METRIC_FIELDS))
    print(_summary(rows))
    return 0


def cmd_ranksweep(args, cfg):
    rows = ex.ranksweep(cfg)
    print(ex.write_csv(Path(cfg.out) / "ranksweep.csv", rows, ex.SWEEP_FIELDS))
    for R in cfg.ranks:
        print(f"R={R}: " + _summary([r for r in rows if r["R"] == R]))
    return 0


def cmd_mms(args, cfg):
    levels = args.levels or cfg.mms_levels
    rows = ex.mms(levels, cfg.nu, args.mesh or cfg.mms_mesh)
    print(ex.write_csv(Path(cfg.out) / "mms.csv", rows, ex.MMS_FIELDS))
    for r in rows:
        print(f"n={r['n']}: velocity {r['velocity_error']:.3e}, pressure {r['pressure_error']:.3e}, "
              f"MINRES {r['iterations_prec']} (plain {r['iterations_plain']})")
    return 0


def cmd_extrapolate(args, cfg):
    rows = ex.extrapolate(cfg)
    print(ex.write_csv(Path(cfg.out) / "extrapolate.csv", rows, ex.METRIC_FIELDS))
    print(_summary(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="romdd", description="Component reduced-order models on domain-decomposed layouts.")
    p.add_argument("--config", help="INI configuration file")
    p.add_argument("--seed", type=int, help="master random seed (overrides the config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mesh", help="generate or inspect a reference mesh")
    m.add_argument("action", choices=["gen", "show"])
    m.add_argument("recipe", nargs="*", help="gen: quad N | tri N | circle R NB NR")
    m.add_argument("--file", help="mesh file to write (gen) or read (show)")
    m.set_defaults(func=cmd_mesh)

    s = sub.add_parser("sample", help="write sampled problem parameters to CSV")
    s.add_argument("kind", choices=["poisson", "stokes"])
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--test", action="store_true", help="draw from the test distribution")
    s.set_defaults(func=cmd_sample)

    sub.add_parser("train", help="collect snapshots, build bases and project blocks").set_defaults(func=cmd_train)
    sub.add_parser("scaleup", help="ROM vs full order over layout sizes").set_defaults(func=cmd_scaleup)
    sub.add_parser("ranksweep", help="error and solve time against basis rank").set_defaults(func=cmd_ranksweep)
    e = sub.add_parser("mms", help="Stokes convergence study")
    e.add_argument("--levels", type=int, nargs="+")
    e.add_argument("--mesh", choices=["quad", "tri"])
    e.set_defaults(func=cmd_mms)
    sub.add_parser("extrapolate", help="out-of-distribution test problems").set_defaults(func=cmd_extrapolate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "mesh" and args.action == "show" and not args.file:
        build_parser().error("mesh show needs --file")
    try:
        cfg = ex.load_config(args.config, args.seed, args.out)
        if args.command not in ("mesh",):
            Path(cfg.out).mkdir(parents=True, exist_ok=True)
        return args.func(args, cfg)
    except (FileNotFoundError, ValueError, storage.FormatError, mesh.MeshError) as exc:
        print(f"romdd: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
