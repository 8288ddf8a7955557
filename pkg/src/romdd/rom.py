"""Component reduced-order model: snapshots, POD bases, projected blocks, reduced solves.

The reduced global system of a layout is built only from blocks projected
once per reference domain (volume, each outer side, and each ordered
reference pair across an interface) plus per-subdomain right-hand sides that
are assembled at full order and projected.  The full-order global matrix is
never formed on this path.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import dgdd, physics
from .dgdd import STOKES, Component, Layout
from .linalg import SingularMatrixError, direct_solve, energy_rank, thin_svd
from .mesh import SIDES


class LibraryError(KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


# --- snapshots and bases --------------------------------------------------------


@dataclass
class SnapshotSet:
    ref: str
    Q: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        if self.Q.ndim != 2:
            raise ValueError("snapshot matrix must be two-dimensional")

    @property
    def n_dof(self) -> int:
        return self.Q.shape[0]

    @property
    def count(self) -> int:
        return self.Q.shape[1]


@dataclass
class PodBasis:
    ref: str
    Phi: np.ndarray
    sigma: np.ndarray
    n_samples: int = 0
    seed: int = 0

    @property
    def rank(self) -> int:
        return self.Phi.shape[1]

    @property
    def n_dof(self) -> int:
        return self.Phi.shape[0]

    def truncate(self, R: int) -> "PodBasis":
        if not 1 <= R <= self.rank:
            raise ValueError(f"rank {R} outside 1..{self.rank} for basis {self.ref!r}")
        return replace(self, Phi=self.Phi[:, :R])

    @classmethod
    def identity(cls, ref: str, n: int) -> "PodBasis":
        return cls(ref, np.eye(n), np.ones(n))


def pod_train(snapshots: SnapshotSet, rank: int | None = None, energy: float | None = None) -> PodBasis:
    """Leading left singular vectors of the snapshot matrix.

    Give either ``rank`` or ``energy``; the energy rule keeps the fewest modes
    whose singular values add up to that fraction of the total.
    """
    if snapshots.count < 1:
        raise ValueError(f"no snapshots for reference {snapshots.ref!r}")
    if (rank is None) == (energy is None):
        raise ValueError("give exactly one of rank or energy")
    Phi, sigma, _ = thin_svd(snapshots.Q)
    if energy is not None:
        rank = energy_rank(sigma, energy)
    if not 1 <= rank <= Phi.shape[1]:
        raise ValueError(f"rank {rank} exceeds min(N, S) = {Phi.shape[1]}")
    return PodBasis(snapshots.ref, Phi[:, :rank].copy(), sigma, snapshots.count, snapshots.seed)


def collect_snapshots_poisson(component: Component, count: int, seed: int, gamma: float | None = None) -> SnapshotSet:
    """Solve the sinusoid problem on one component for ``count`` sampled parameter sets.

    The operator does not depend on the parameters, so it is factorised once.
    """
    if count < 1:
        raise ValueError("need at least one snapshot")
    layout = Layout.uniform(1, 1, component.name)
    gamma = dgdd.default_gamma(component) if gamma is None else gamma
    A = dgdd.domain_operator(component, gamma)
    for side in SIDES:
        A = A + dgdd.boundary_operator(component, side, gamma)
    lu = splu(sp.csc_matrix(A))
    Q = np.empty((component.ndof, count))
    for i in range(count):
        prob = physics.sample_poisson_params(physics.stream(seed, "poisson-train", i))
        b = dgdd.subdomain_rhs(component, layout, 0, prob, gamma)
        x = lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError(f"snapshot {i} failed")
        Q[:, i] = x
    return SnapshotSet(component.name, Q, seed)


def random_layout(names, nx: int, ny: int, rng: np.random.Generator, bc: dict) -> Layout:
    cells = tuple(names[i] for i in rng.integers(0, len(names), nx * ny))
    return Layout(nx, ny, cells, bc)


def collect_snapshots_stokes(components: dict, count: int, seed: int, nu: float = physics.DEFAULT_NU,
                             gamma: float | None = None) -> dict:
    """Solve ``count`` random 2x2 flow-past-array domains; return one snapshot set per reference."""
    if count < 1 or not components:
        raise ValueError("need a nonempty pool and at least one sample")
    names = sorted(components)
    cols = {n: [] for n in names}
    for i in range(count):
        rng = physics.stream(seed, "stokes-train", i)
        prob = physics.sample_stokes_params(rng, nu=nu)
        layout = random_layout(names, 2, 2, rng, prob.boundary_conditions())
        system = dgdd.assemble_global_fom(layout, components, prob, gamma)
        try:
            x = direct_solve(system.matrix, system.rhs)
        except SingularMatrixError as exc:
            raise SingularMatrixError(f"sample {i}: {exc}") from exc
        for m, xm in enumerate(system.split(x)):
            cols[layout.cells[m]].append(xm)
    return {n: SnapshotSet(n, np.column_stack(c), seed) for n, c in cols.items() if c}


# --- projected block library ------------------------------------------------------


@dataclass
class ReducedBlockLibrary:
    physics: str
    gamma: float
    nu: float
    components: dict
    bases: dict
    dom: dict = field(default_factory=dict)
    bnd: dict = field(default_factory=dict)
    ifc: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)
    rhs_maps: dict = field(default_factory=dict)

    def rank(self, ref: str) -> int:
        return self.bases[ref].rank

    def interface(self, r: str, rp: str, axis: str) -> np.ndarray:
        try:
            return self.ifc[r, rp, axis]
        except KeyError:
            raise LibraryError(f"no interface block for ({r}, {rp}, {axis})") from None

    def domain(self, r: str) -> np.ndarray:
        try:
            return self.dom[r]
        except KeyError:
            raise LibraryError(f"no domain block for reference {r!r}") from None

    def boundary(self, r: str, side: str) -> np.ndarray:
        try:
            return self.bnd[r, side]
        except KeyError:
            raise LibraryError(f"no boundary block for ({r}, {side})") from None

    def truncate(self, ranks) -> "ReducedBlockLibrary":
        """Library for leading sub-bases; ``ranks`` is an int or a dict per reference."""
        if isinstance(ranks, int):
            ranks = {r: ranks for r in self.bases}
        for r, R in ranks.items():
            if R > self.rank(r):
                raise ValueError(f"rank {R} exceeds stored rank {self.rank(r)} of {r!r}")
        bases = {r: b.truncate(ranks[r]) for r, b in self.bases.items()}
        dom = {r: B[: ranks[r], : ranks[r]] for r, B in self.dom.items()}
        bnd = {(r, s): B[: ranks[r], : ranks[r]] for (r, s), B in self.bnd.items()}
        ifc = {}
        for (r, rp, ax), C in self.ifc.items():
            Rm = self.rank(r)
            keep = np.r_[0 : ranks[r], Rm : Rm + ranks[rp]]
            ifc[r, rp, ax] = C[np.ix_(keep, keep)]
        weights = {r: w[: ranks[r]] for r, w in self.weights.items()}
        rhs_maps = {(r, k): (pts, tuple(P[: ranks[r]] for P in mats)) for (r, k), (pts, mats) in self.rhs_maps.items()}
        return replace(self, bases=bases, dom=dom, bnd=bnd, ifc=ifc, weights=weights, rhs_maps=rhs_maps)

    def rhs_map(self, r: str, key):
        """Projected right-hand-side map ``(points, Phi^T mats)`` of reference ``r``."""
        if (r, key) not in self.rhs_maps:
            fm = dgdd.component_map(self.components[r], key, self.gamma, self.nu)
            Phi = self.bases[r].Phi
            self.rhs_maps[r, key] = (fm.points, tuple(np.asarray((M.T @ Phi).T) for M in fm.mats))
        return self.rhs_maps[r, key]


def _project(Phi_l, B, Phi_r):
    return Phi_l.T @ (B @ Phi_r)


def project_operators(bases: dict, components: dict, gamma: float | None = None,
                      nu: float | None = None) -> ReducedBlockLibrary:
    """Project every reference operator onto its basis.

    Interface blocks are stored for every ordered pair of references and both
    axes as one composite matrix of size ``R_r + R_r'``.
    """
    names = sorted(bases)
    comps = {n: components[n] for n in names}
    kind = comps[names[0]].physics
    if nu is None:
        nu = physics.DEFAULT_NU if kind == STOKES else 1.0
    if gamma is None:
        gamma = dgdd.default_gamma(comps[names[0]], nu)
    for n in names:
        if bases[n].n_dof != comps[n].ndof:
            raise ValueError(f"basis for {n!r} has {bases[n].n_dof} rows, component has {comps[n].ndof} dofs")
    lib = ReducedBlockLibrary(kind, gamma, nu, comps, dict(bases))
    for n in names:
        Phi = bases[n].Phi
        lib.dom[n] = _project(Phi, dgdd.domain_operator(comps[n], gamma, nu), Phi)
        for side in SIDES:
            lib.bnd[n, side] = _project(Phi, dgdd.boundary_operator(comps[n], side, gamma, nu), Phi)
        if kind == STOKES:
            lib.weights[n] = Phi.T @ comps[n].pressure_weights
        keys = ["load"] + [(side, k) for side in SIDES for k in dgdd.BC_TYPES]
        if len(comps[n].mesh.edges_with(dgdd.OBSTACLE)):
            keys.append((dgdd.OBSTACLE, "dirichlet"))
        for key in keys:
            lib.rhs_map(n, key)
    for r in names:
        for rp in names:
            Phi2 = sp.block_diag([bases[r].Phi, bases[rp].Phi]).toarray()
            for axis in ("H", "V"):
                C = dgdd.interface_operator(comps[r], comps[rp], axis, gamma, nu)
                lib.ifc[r, rp, axis] = _project(Phi2, C, Phi2)
    return lib


# --- reduced global system -------------------------------------------------------


@dataclass
class ReducedSystem:
    layout: Layout
    matrix: sp.spmatrix
    rhs: np.ndarray
    offsets: np.ndarray
    constrained: bool = False
    constraint: np.ndarray | None = None
    timings: dict = field(default_factory=dict)

    def split(self, q: np.ndarray) -> list:
        return [q[self.offsets[m] : self.offsets[m + 1]] for m in range(len(self.offsets) - 1)]


def _block_list(layout: Layout, lib: ReducedBlockLibrary):
    """(row block, column block, dense block) triples of the reduced operator."""
    out = []
    for m, r in enumerate(layout.cells):
        B = lib.domain(r)
        for side in layout.outer_sides(m):
            if layout.bc[side] == "dirichlet":
                B = B + lib.boundary(r, side)
        out.append((m, m, B))
    for m, n, axis in dgdd.find_interfaces(layout):
        r, rp = layout.cells[m], layout.cells[n]
        C = lib.interface(r, rp, axis)
        Rm = lib.rank(r)
        out[m] = (m, m, out[m][2] + C[:Rm, :Rm])
        out[n] = (n, n, out[n][2] + C[Rm:, Rm:])
        out.append((m, n, C[:Rm, Rm:]))
        out.append((n, m, C[Rm:, :Rm]))
    return out


def assemble_reduced_matrix(layout: Layout, lib: ReducedBlockLibrary):
    """Block-sparse reduced operator and the offsets of each subdomain's coefficients."""
    layout.check(lib.bases)
    ranks = np.array([lib.rank(r) for r in layout.cells])
    offsets = np.concatenate([[0], np.cumsum(ranks)])
    blocks = _block_list(layout, lib)
    n = int(offsets[-1])
    if np.all(ranks == ranks[0]):
        R = int(ranks[0])
        order = sorted(range(len(blocks)), key=lambda k: (blocks[k][0], blocks[k][1]))
        data = np.empty((len(blocks), R, R))
        indices = np.empty(len(blocks), dtype=np.int32)
        indptr = np.zeros(layout.size + 1, dtype=np.int32)
        for k, b in enumerate(order):
            i, j, B = blocks[b]
            data[k] = B
            indices[k] = j
            indptr[i + 1] += 1
        A = sp.bsr_matrix((data, indices, np.cumsum(indptr)), shape=(n, n), blocksize=(R, R))
    else:
        rows, cols, vals = [], [], []
        for i, j, B in blocks:
            bi, bj = np.meshgrid(np.arange(B.shape[0]), np.arange(B.shape[1]), indexing="ij")
            rows.append((offsets[i] + bi).ravel())
            cols.append((offsets[j] + bj).ravel())
            vals.append(B.ravel())
        A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return A, offsets


def assemble_reduced_rhs(layout: Layout, lib: ReducedBlockLibrary, problem) -> np.ndarray:
    """Reduced right-hand side: data sampled at each subdomain's points times projected maps.

    This equals ``Phi^T b_m`` for the full-order subdomain vector ``b_m``
    without forming ``b_m``.
    """
    parts = []
    for m, r in enumerate(layout.cells):
        off = layout.offset(m)
        q = np.zeros(lib.rank(r))
        for key, data, attr in dgdd.rhs_terms(lib.components[r], layout, m, problem):
            pts, mats = lib.rhs_map(r, key)
            fm = dgdd.FormMap(pts, mats)
            q += fm.apply(fm.values(data, off, attr))
        parts.append(q)
    return np.concatenate(parts)


def assemble_reduced_system(layout: Layout, lib: ReducedBlockLibrary, problem) -> ReducedSystem:
    t0 = time.perf_counter()
    A, offsets = assemble_reduced_matrix(layout, lib)
    t1 = time.perf_counter()
    rhs = assemble_reduced_rhs(layout, lib, problem)
    t2 = time.perf_counter()
    system = ReducedSystem(layout, A, rhs, offsets, timings={"matrix": t1 - t0, "rhs": t2 - t1})
    if lib.physics == STOKES and not layout.has_neumann:
        w = np.concatenate([lib.weights[r] for r in layout.cells])
        col = sp.csr_matrix(w[:, None])
        system.matrix = sp.bmat([[A.tocsr(), col], [col.T, None]], format="csr")
        system.rhs = np.append(rhs, 0.0)
        system.constrained = True
        system.constraint = w
    return system


def solve_reduced(system: ReducedSystem) -> np.ndarray:
    """Sparse LU solve of the reduced system; returns coefficients without the multiplier."""
    t0 = time.perf_counter()
    q = direct_solve(sp.csc_matrix(system.matrix), system.rhs)
    system.timings["solve"] = time.perf_counter() - t0
    return q[: system.offsets[-1]]


def lift_solution(layout: Layout, bases: dict, qhat: np.ndarray) -> list:
    """Full-order coefficients ``Phi_r(m) qhat_m`` of every subdomain."""
    out, k = [], 0
    for r in layout.cells:
        Phi = bases[r].Phi
        out.append(Phi @ qhat[k : k + Phi.shape[1]])
        k += Phi.shape[1]
    if k != len(qhat):
        raise ValueError("reduced vector length does not match the layout")
    return out


def relative_error(fom_parts, rom_parts, masses) -> float:
    """sqrt(sum_m ||q_m - qr_m||^2_M / sum_m ||q_m||^2_M) with per-subdomain mass matrices."""
    num = den = 0.0
    for q, qr, M in zip(fom_parts, rom_parts, masses):
        d = q - qr
        num += float(d @ (M @ d))
        den += float(q @ (M @ q))
    if den == 0.0:
        raise ZeroDivisionError("reference solution has zero norm")
    return float(np.sqrt(num / den))
