"""Experiment drivers behind the command line: training, scale-up, rank sweeps, MMS, extrapolation.

Each driver is a deterministic function of its configuration; only the
timing columns of the produced rows vary between runs.
"""

from __future__ import annotations

import configparser
import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dgdd, fem, linalg, mesh, physics, rom, storage

METRIC_FIELDS = ["M", "trial", "eps", "fom_assembly_s", "fom_solve_s", "rom_assembly_s", "rom_solve_s", "iterations", "R"]
SWEEP_FIELDS = ["M", "trial", "R", "eps", "rom_solve_s"]
MMS_FIELDS = [
    "n", "h", "dofs", "velocity_error", "pressure_error", "velocity_order", "pressure_order",
    "iterations_prec", "iterations_plain", "residual", "converged", "time_s",
]
_DEFAULT_NU = physics.DEFAULT_NU
TIMING_FIELDS = {"fom_assembly_s", "fom_solve_s", "rom_assembly_s", "rom_solve_s", "time_s"}


def _ints(text: str) -> list:
    return [int(t) for t in text.replace(",", " ").split()]


@dataclass
class ExperimentConfig:
    physics: str = dgdd.POISSON
    nu: float = _DEFAULT_NU
    components: dict = field(default_factory=lambda: {"square": "quad 16"})
    samples: int = 300
    seed: int = 0
    rank: int = 15
    energy: float | None = None
    sizes: list = field(default_factory=lambda: [4, 8])
    trials: int = 20
    fom_cutoff: int = 64
    ranks: list = field(default_factory=lambda: [8, 12, 16, 24, 30])
    sweep_size: int = 8
    sweep_trials: int = 20
    extrapolate_sizes: list = field(default_factory=lambda: [8])
    extrapolate_trials: int = 20
    spiral_width: float = 2.0
    spiral_upper: float = 0.7
    mms_levels: list = field(default_factory=lambda: [8, 16, 32, 64])
    mms_mesh: str = "quad"
    out: Path = Path("out")

    @property
    def stored_rank(self) -> int:
        return max([self.rank, *self.ranks])

    @property
    def library_dir(self) -> Path:
        return Path(self.out) / "library"

    def check(self) -> None:
        if self.physics not in (dgdd.POISSON, dgdd.STOKES):
            raise ValueError(f"unknown physics {self.physics!r}")
        if self.rank < 1 or self.samples < 1 or self.trials < 1:
            raise ValueError("rank, samples and trials must be positive")
        for name, recipe in self.components.items():
            if recipe.split()[0] == "file" and not Path(recipe.split()[1]).exists():
                raise FileNotFoundError(f"mesh file for {name!r} not found: {recipe.split()[1]}")


def load_config(path=None, seed=None, out=None) -> ExperimentConfig:
    """Read an INI config; command-line ``seed``/``out`` take precedence."""
    cfg = ExperimentConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise FileNotFoundError(f"config file not found: {path}")
        p = parser["problem"] if parser.has_section("problem") else {}
        cfg.physics = p.get("physics", cfg.physics)
        cfg.nu = float(p.get("nu", cfg.nu))
        if parser.has_section("components"):
            cfg.components = dict(parser["components"])
        t = parser["train"] if parser.has_section("train") else {}
        cfg.samples = int(t.get("samples", cfg.samples))
        cfg.seed = int(t.get("seed", cfg.seed))
        cfg.rank = int(t.get("rank", cfg.rank))
        cfg.energy = float(t["energy"]) if "energy" in t else None
        s = parser["scaleup"] if parser.has_section("scaleup") else {}
        cfg.sizes = _ints(s.get("sizes", " ".join(map(str, cfg.sizes))))
        cfg.trials = int(s.get("trials", cfg.trials))
        cfg.fom_cutoff = int(s.get("fom_cutoff", cfg.fom_cutoff))
        r = parser["ranksweep"] if parser.has_section("ranksweep") else {}
        cfg.ranks = _ints(r.get("ranks", " ".join(map(str, cfg.ranks))))
        cfg.sweep_size = int(r.get("size", cfg.sweep_size))
        cfg.sweep_trials = int(r.get("trials", cfg.sweep_trials))
        e = parser["extrapolate"] if parser.has_section("extrapolate") else {}
        cfg.extrapolate_sizes = _ints(e.get("sizes", " ".join(map(str, cfg.extrapolate_sizes))))
        cfg.extrapolate_trials = int(e.get("trials", cfg.extrapolate_trials))
        cfg.spiral_width = float(e.get("spiral_width", cfg.spiral_width))
        cfg.spiral_upper = float(e.get("spiral_upper", cfg.spiral_upper))
        m = parser["mms"] if parser.has_section("mms") else {}
        cfg.mms_levels = _ints(m.get("levels", " ".join(map(str, cfg.mms_levels))))
        cfg.mms_mesh = m.get("mesh", cfg.mms_mesh)
        if parser.has_section("output"):
            cfg.out = Path(parser["output"].get("dir", str(cfg.out)))
    if seed is not None:
        cfg.seed = int(seed)
    if out is not None:
        cfg.out = Path(out)
    cfg.check()
    return cfg


def build_mesh(recipe: str) -> mesh.Mesh2D:
    """Mesh from a recipe: ``quad n``, ``tri n``, ``circle r n_boundary n_ring`` or ``file path``."""
    tok = recipe.split()
    kind = tok[0]
    if kind == "quad":
        return mesh.gen_quad_grid(int(tok[1]))
    if kind == "tri":
        return mesh.gen_tri_grid(int(tok[1]))
    if kind == "circle":
        return mesh.gen_circle_obstacle(float(tok[1]), int(tok[2]), int(tok[3]))
    if kind == "file":
        return mesh.parse_mesh(Path(tok[1]).read_text())
    raise ValueError(f"unknown mesh recipe {recipe!r}")


def build_components(cfg: ExperimentConfig) -> dict:
    return {name: dgdd.make_component(name, build_mesh(recipe), cfg.physics) for name, recipe in sorted(cfg.components.items())}


def write_csv(path, rows, fields) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _cell(row.get(k)) for k in fields})
    return path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return v


# --- training --------------------------------------------------------------------


def train(cfg: ExperimentConfig, components: dict | None = None):
    """Snapshots, POD and projected blocks; returns the library (also written to disk)."""
    components = components or build_components(cfg)
    if cfg.physics == dgdd.POISSON:
        snaps = {}
        for name, comp in components.items():
            snaps[name] = rom.collect_snapshots_poisson(comp, cfg.samples, cfg.seed)
    else:
        snaps = rom.collect_snapshots_stokes(components, cfg.samples, cfg.seed, cfg.nu)
    bases = {}
    for name, s in snaps.items():
        R = cfg.stored_rank
        if cfg.energy is not None:
            R = max(R, rom.pod_train(s, energy=cfg.energy).rank)
        bases[name] = rom.pod_train(s, rank=min(R, s.n_dof, s.count))
    lib = rom.project_operators(bases, components, nu=cfg.nu if cfg.physics == dgdd.STOKES else None)
    storage.save_library(lib, cfg.library_dir)
    for name, b in bases.items():
        (Path(cfg.out) / f"sigma_{name}.csv").write_text(storage.sigma_csv(b.sigma))
    return lib


def load_trained(cfg: ExperimentConfig):
    return storage.load_library(cfg.library_dir)


# --- test problems ---------------------------------------------------------------


def test_case(cfg: ExperimentConfig, names: list, n: int, trial: int, kind: str = "scaleup"):
    """Problem and layout of trial ``trial`` on an ``n x n`` layout."""
    if cfg.physics == dgdd.POISSON:
        if kind == "extrapolate":
            prob = physics.sample_spiral_params(
                physics.stream(cfg.seed, "spiral", n, trial), L=n, w=cfg.spiral_width, upper=cfg.spiral_upper
            )
        else:
            prob = physics.sample_poisson_params(physics.stream(cfg.seed, "poisson-test", n, trial), test=True)
        rng = physics.stream(cfg.seed, "layout", n, trial)
        return prob, rom.random_layout(names, n, n, rng, prob.boundary_conditions())
    if kind == "extrapolate":
        prob = physics.ChannelFlow(n, nu=cfg.nu)
        rng = physics.stream(cfg.seed, "layout", n, trial)
    else:
        rng = physics.stream(cfg.seed, "stokes-test", n, trial)
        prob = physics.sample_stokes_params(rng, test=True, nu=cfg.nu)
    return prob, rom.random_layout(names, n, n, rng, prob.boundary_conditions())


def solve_fom(layout, components, problem):
    t0 = time.perf_counter()
    system = dgdd.assemble_global_fom(layout, components, problem)
    t1 = time.perf_counter()
    x = linalg.direct_solve(system.matrix, system.rhs)
    t2 = time.perf_counter()
    return system.split(x), t1 - t0, t2 - t1


def solve_rom(layout, lib, problem):
    t0 = time.perf_counter()
    system = rom.assemble_reduced_system(layout, lib, problem)
    t1 = time.perf_counter()
    q = rom.solve_reduced(system)
    t2 = time.perf_counter()
    return rom.lift_solution(layout, lib.bases, q), t1 - t0, t2 - t1


def _metrics(cfg, lib, sizes, trials, kind):
    names = sorted(lib.bases)
    rows = []
    for n in sizes:
        M = n * n
        for trial in range(trials):
            prob, layout = test_case(cfg, names, n, trial, kind)
            lifted, ra, rs = solve_rom(layout, lib, prob)
            row = {"M": M, "trial": trial, "rom_assembly_s": ra, "rom_solve_s": rs, "iterations": 0, "R": lib.rank(names[0])}
            if M <= cfg.fom_cutoff:
                parts, fa, fs = solve_fom(layout, lib.components, prob)
                masses = [lib.components[r].mass for r in layout.cells]
                row.update(eps=rom.relative_error(parts, lifted, masses), fom_assembly_s=fa, fom_solve_s=fs)
            rows.append(row)
    return rows


def scaleup(cfg: ExperimentConfig, lib=None) -> list:
    lib = (lib or load_trained(cfg)).truncate(cfg.rank)
    return _metrics(cfg, lib, cfg.sizes, cfg.trials, "scaleup")


def extrapolate(cfg: ExperimentConfig, lib=None) -> list:
    lib = (lib or load_trained(cfg)).truncate(cfg.rank)
    return _metrics(cfg, lib, cfg.extrapolate_sizes, cfg.extrapolate_trials, "extrapolate")


def ranksweep(cfg: ExperimentConfig, lib=None) -> list:
    lib = lib or load_trained(cfg)
    names = sorted(lib.bases)
    top = min(lib.rank(r) for r in names)
    for R in cfg.ranks:
        if R > top:
            raise ValueError(f"rank {R} exceeds the stored basis rank {top}")
    libs = {R: lib.truncate(R) for R in cfg.ranks}
    n = cfg.sweep_size
    rows = []
    for trial in range(cfg.sweep_trials):
        prob, layout = test_case(cfg, names, n, trial)
        parts, _, _ = solve_fom(layout, lib.components, prob)
        masses = [lib.components[r].mass for r in layout.cells]
        for R in cfg.ranks:
            lifted, _, rs = solve_rom(layout, libs[R], prob)
            rows.append({"M": n * n, "trial": trial, "R": R, "eps": rom.relative_error(parts, lifted, masses), "rom_solve_s": rs})
    return rows


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


# --- manufactured solution ----------------------------------------------------------


def mms(levels, nu: float = physics.DEFAULT_NU, mesh_kind: str = "quad", tol: float = linalg.DEFAULT_TOL) -> list:
    """Stokes convergence study on the unit square with preconditioned and plain MINRES."""
    if len(levels) < 3:
        raise ValueError("need at least three levels")
    prob = physics.stokes_mms(nu)
    pmean = prob.pressure_mean()
    gen = mesh.gen_quad_grid if mesh_kind == "quad" else mesh.gen_tri_grid
    rows, prev = [], None
    for n in levels:
        comp = dgdd.make_component("mms", gen(n), dgdd.STOKES)
        comps = {"mms": comp}
        layout = dgdd.Layout.uniform(1, 1, "mms")
        t0 = time.perf_counter()
        system = dgdd.assemble_global_fom(layout, comps, prob)
        pre = dgdd.stokes_preconditioner(system, layout, comps, nu)
        x, rep = linalg.minres_solve(system.matrix, system.rhs, tol=tol, preconditioner=pre)
        elapsed = time.perf_counter() - t0
        _, plain = linalg.minres_solve(system.matrix, system.rhs, tol=tol)
        nv = comp.n_velocity
        eu, ru = fem.l2_error(comp.primary, x[:nv], prob.velocity)
        ep, rp = fem.l2_error(comp.pressure, x[nv : comp.ndof], lambda a, b: prob.pressure(a, b) - pmean)
        err = (eu / ru, ep / rp)
        row = {
            "n": n, "h": 1.0 / n, "dofs": system.matrix.shape[0], "velocity_error": err[0], "pressure_error": err[1],
            "iterations_prec": rep.iterations, "iterations_plain": plain.iterations, "residual": rep.residual,
            "converged": int(rep.converged and plain.converged), "time_s": elapsed,
        }
        if prev is not None:
            ratio = prev[0] / n
            row["velocity_order"] = float(np.log(prev[1][0] / err[0]) / np.log(1.0 / ratio))
            row["pressure_order"] = float(np.log(prev[1][1] / err[1]) / np.log(1.0 / ratio))
        rows.append(row)
        prev = (n, err)
    return rows


# --- sampling ------------------------------------------------------------------------


def sample_params(kind: str, count: int, seed: int, test: bool = False) -> list:
    rows = []
    for i in range(count):
        if kind == "poisson":
            p = physics.sample_poisson_params(physics.stream(seed, "poisson-test" if test else "poisson-train", i), test)
            rows.append({"index": i, "k1": p.k[0], "k2": p.k[1], "theta": p.theta, "kb1": p.kb[0], "kb2": p.kb[1], "thetab": p.thetab})
        else:
            p = physics.sample_stokes_params(physics.stream(seed, "stokes-test" if test else "stokes-train", i), test)
            rows.append({
                "index": i, "g1": p.g[0], "g2": p.g[1], "dg1": p.dg[0], "dg2": p.dg[1],
                "k11": p.k1[0], "k12": p.k1[1], "k21": p.k2[0], "k22": p.k2[1], "theta1": p.theta[0], "theta2": p.theta[1],
            })
    return rows


def non_timing_rows(path) -> list:
    """CSV rows with the wall-clock columns removed, for reproducibility checks."""
    with Path(path).open(newline="") as fh:
        return [{k: v for k, v in row.items() if k not in TIMING_FIELDS} for row in csv.DictReader(fh)]
