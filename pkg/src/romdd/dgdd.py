"""Discontinuous-Galerkin domain decomposition on grid layouts of components.

Subdomains are unit-square components placed on an ``nx x ny`` grid.  Inside
each subdomain the discretisation is continuous Galerkin; neighbouring
subdomains are coupled weakly with symmetric interior-penalty terms and
Dirichlet data is imposed with Nitsche's method.  Interface traces need not
match: integrals over a shared edge use the common refinement of both sides'
edge partitions.

Subdomain ``m`` sits in column ``i = m % nx`` and row ``j = m // nx`` and
occupies ``[i, i+1] x [j, j+1]``.  Each interface is stored once as
``(m, n, axis)`` with ``m < n``; axis ``"H"`` pairs a cell with its right
neighbour, ``"V"`` with the one above.  The jump normal points from ``m`` to
``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import fem
from .linalg import add_mean_zero_constraint
from .mesh import OBSTACLE, REF_VERTICES, SIDES, Mesh2D, SideTrace, side_coordinate, side_trace
from .quadrature import gauss_interval, gauss_points_for

POISSON = "poisson"
STOKES = "stokes"

# Interface axis -> (side on m, side on n, normal from m to n)
_AXIS = {
    "H": ("right", "left", np.array([1.0, 0.0])),
    "V": ("top", "bottom", np.array([0.0, 1.0])),
}

BC_TYPES = ("dirichlet", "neumann")


class LayoutError(ValueError):
    pass


# --- components and layouts ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class Component:
    """A reference domain together with its finite element spaces."""

    name: str
    mesh: Mesh2D
    physics: str
    order: int = 1

    def __post_init__(self):
        if self.physics not in (POISSON, STOKES):
            raise ValueError(f"unknown physics {self.physics!r}")

    @cached_property
    def spaces(self) -> tuple:
        if self.physics == POISSON:
            return (fem.scalar_space(self.mesh, self.order),)
        return fem.taylor_hood(self.mesh)

    @property
    def primary(self) -> fem.FunctionSpace:
        """Scalar space (Poisson) or velocity space (Stokes)."""
        return self.spaces[0]

    @property
    def pressure(self) -> fem.FunctionSpace | None:
        return self.spaces[1] if self.physics == STOKES else None

    @property
    def n_velocity(self) -> int:
        return self.primary.dof_count

    @property
    def ndof(self) -> int:
        return sum(s.dof_count for s in self.spaces)

    @property
    def face_order(self) -> int:
        # Polynomial order s of the formulation: the scalar order, or the pressure order.
        s = self.order if self.physics == POISSON else self.spaces[1].order
        return 2 * (s + 1) + 1

    @cached_property
    def traces(self) -> dict:
        return {side: side_trace(self.mesh, side) for side in SIDES}

    @cached_property
    def mass(self) -> sp.csr_matrix:
        """Block-diagonal L2 mass matrix over all fields of the component."""
        return sp.block_diag([fem.assemble_mass(s) for s in self.spaces], format="csr")

    @cached_property
    def pressure_weights(self) -> np.ndarray:
        """``w`` with ``w @ q = integral of p`` over the component (zero on velocity dofs)."""
        w = np.zeros(self.ndof)
        if self.physics == STOKES:
            w[self.n_velocity :] = fem.integral_weights(self.pressure)
        return w


def make_component(name: str, mesh: Mesh2D, physics: str) -> Component:
    mesh.validate()
    return Component(name, mesh, physics)


@dataclass(frozen=True)
class Layout:
    nx: int
    ny: int
    cells: tuple
    bc: dict = field(default_factory=lambda: {s: "dirichlet" for s in SIDES})

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise LayoutError("layout dimensions must be positive")
        if len(self.cells) != self.nx * self.ny:
            raise LayoutError("need one reference name per cell")
        object.__setattr__(self, "cells", tuple(self.cells))
        bc = {s: "dirichlet" for s in SIDES}
        bc.update(self.bc)
        for side, kind in bc.items():
            if side not in SIDES or kind not in BC_TYPES:
                raise LayoutError(f"bad boundary condition {side}={kind}")
        object.__setattr__(self, "bc", bc)

    @classmethod
    def uniform(cls, nx: int, ny: int, name: str, bc: dict | None = None) -> "Layout":
        return cls(nx, ny, (name,) * (nx * ny), bc or {})

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def position(self, m: int) -> tuple[int, int]:
        return m % self.nx, m // self.nx

    def offset(self, m: int) -> tuple[float, float]:
        i, j = self.position(m)
        return float(i), float(j)

    def outer_sides(self, m: int) -> list:
        i, j = self.position(m)
        out = []
        if i == 0:
            out.append("left")
        if i == self.nx - 1:
            out.append("right")
        if j == 0:
            out.append("bottom")
        if j == self.ny - 1:
            out.append("top")
        return out

    @property
    def has_neumann(self) -> bool:
        return any(v == "neumann" for v in self.bc.values())

    def check(self, registry) -> None:
        missing = sorted(set(self.cells) - set(registry))
        if missing:
            raise LayoutError(f"unresolved reference domain(s): {', '.join(missing)}")


def parse_layout(text: str) -> Layout:
    """Read the LAY1 format.  Rows are listed top (largest x2) first."""
    lines = [ln.split() for ln in text.splitlines()]
    lines = [t for t in lines if t]
    if not lines or len(lines[0]) != 3 or lines[0][0] != "LAY1":
        raise LayoutError("malformed LAY1 header")
    nx, ny = int(lines[0][1]), int(lines[0][2])
    rows = lines[1 : 1 + ny]
    if len(rows) != ny or any(len(r) != nx for r in rows):
        raise LayoutError("layout rows do not match header dimensions")
    cells = [name for row in reversed(rows) for name in row]
    bc = {}
    for tok in lines[1 + ny :]:
        if len(tok) != 3 or tok[0] != "bc":
            raise LayoutError(f"unexpected record {' '.join(tok)!r}")
        bc[tok[1]] = tok[2]
    return Layout(nx, ny, tuple(cells), bc)


def write_layout(layout: Layout) -> str:
    out = [f"LAY1 {layout.nx} {layout.ny}"]
    for j in reversed(range(layout.ny)):
        out.append(" ".join(layout.cells[j * layout.nx : (j + 1) * layout.nx]))
    out += [f"bc {s} {layout.bc[s]}" for s in SIDES]
    return "\n".join(out) + "\n"


def find_interfaces(layout: Layout) -> list:
    out = []
    for m in range(layout.size):
        i, j = layout.position(m)
        if i + 1 < layout.nx:
            out.append((m, m + 1, "H"))
        if j + 1 < layout.ny:
            out.append((m, m + layout.nx, "V"))
    return out


# --- mortar quadrature ----------------------------------------------------------


@dataclass(frozen=True)
class InterfaceQuad:
    """Quadrature on a shared edge, one row per point."""

    axis: str
    t: np.ndarray
    weights: np.ndarray
    edge_m: np.ndarray
    edge_n: np.ndarray
    h: np.ndarray
    segments: np.ndarray  # (nseg, 2) sub-segment end points

    @property
    def normal(self) -> np.ndarray:
        return _AXIS[self.axis][2]


def build_mortar(trace_m: SideTrace, trace_n: SideTrace, gauss_order: int, axis: str = "H") -> InterfaceQuad:
    """Common refinement of two edge partitions of [0, 1] with Gauss points per sub-segment."""
    pts = np.sort(np.concatenate([trace_m.breakpoints, trace_n.breakpoints]))
    keep = np.concatenate([[True], np.diff(pts) > 1e-12])
    pts = pts[keep]
    pts[0], pts[-1] = 0.0, 1.0
    a, b = pts[:-1], pts[1:]
    mid = 0.5 * (a + b)
    im = np.clip(np.searchsorted(trace_m.t0, mid, side="right") - 1, 0, len(trace_m) - 1)
    inn = np.clip(np.searchsorted(trace_n.t0, mid, side="right") - 1, 0, len(trace_n) - 1)
    h = np.minimum(trace_m.t1[im] - trace_m.t0[im], trace_n.t1[inn] - trace_n.t0[inn])
    g, gw = gauss_interval(gauss_points_for(gauss_order))
    L = b - a
    t = (a[:, None] + L[:, None] * g[None, :]).ravel()
    w = (L[:, None] * gw[None, :]).ravel()
    rep = len(g)
    return InterfaceQuad(
        axis,
        t,
        w,
        np.repeat(trace_m.edge[im], rep),
        np.repeat(trace_n.edge[inn], rep),
        np.repeat(h, rep),
        np.column_stack([a, b]),
    )


def _edge_reference_points(mesh: Mesh2D, edges: np.ndarray, lam: np.ndarray):
    """Owning elements and reference coordinates of points at fraction ``lam`` along boundary edges."""
    owner, _ = mesh.boundary_owner
    el = owner[edges]
    ends = mesh.boundary_edges[edges]
    ev = mesh.elements[el]
    ia = np.argmax(ev == ends[:, :1], axis=1)
    ib = np.argmax(ev == ends[:, 1:], axis=1)
    ref = REF_VERTICES[mesh.shape]
    xi = ref[ia] * (1.0 - lam)[:, None] + ref[ib] * lam[:, None]
    return el, xi


def _side_reference_points(mesh: Mesh2D, side: str, edges: np.ndarray, t: np.ndarray):
    c = side_coordinate(side)
    ends = mesh.vertices[mesh.boundary_edges[edges]][:, :, c]
    lam = (t - ends[:, 0]) / (ends[:, 1] - ends[:, 0])
    return _edge_reference_points(mesh, edges, lam)


@dataclass
class _Trace:
    """Basis data of one component at a set of boundary points."""

    val: np.ndarray  # (n, nloc) primary node basis
    grad: np.ndarray  # (n, nloc, 2)
    nodes: np.ndarray  # (n, nloc) primary node indices
    x: np.ndarray  # (n, 2) local physical coordinates
    pval: np.ndarray | None = None
    pdofs: np.ndarray | None = None


def _trace(comp: Component, el: np.ndarray, xi: np.ndarray) -> _Trace:
    V = comp.primary
    val, grad, x = V.eval_at(el, xi)
    tr = _Trace(val, grad, V.elem_nodes[el], x)
    if comp.physics == STOKES:
        P = comp.pressure
        pv, _ = fem.basis(P.shape, P.order, xi)
        tr.pval = pv
        tr.pdofs = P.elem_dofs[el] + comp.n_velocity
    return tr


def _vector_dofs(nodes: np.ndarray) -> np.ndarray:
    return np.stack([2 * nodes, 2 * nodes + 1], axis=2).reshape(len(nodes), -1)


def _scalar_to_vector(S: np.ndarray) -> np.ndarray:
    n, a, b = S.shape
    out = np.zeros((n, a, 2, b, 2))
    out[:, :, 0, :, 0] = S
    out[:, :, 1, :, 1] = S
    return out.reshape(n, 2 * a, 2 * b)


# --- interface and boundary forms -------------------------------------------


def penalty(order: int, nu: float = 1.0) -> float:
    """Interior-penalty strength ``nu (order + 1)^2`` for a space of polynomial ``order``."""
    return nu * float((order + 1) ** 2)


def default_gamma(comp: Component, nu: float = 1.0) -> float:
    """Default penalty, scaled by the order of the field being penalised.

    For Stokes that is the velocity order (2), giving ``9 nu``; with the
    pressure order instead (``4 nu``) the Nitsche velocity form of the
    quadratic Taylor-Hood pair loses coercivity.
    """
    if comp.physics == POISSON:
        return penalty(comp.order)
    return penalty(comp.primary.order, nu)


def interface_operator(comp_m: Component, comp_n: Component, axis: str, gamma: float, nu: float = 1.0,
                       quad: InterfaceQuad | None = None, penalty_only: bool = False) -> sp.csr_matrix:
    """Composite ``(N_m + N_n)`` square matrix of the interface form between two components.

    Rows/columns ``[0, N_m)`` belong to ``m``, the rest to ``n``.
    """
    side_m, side_n, normal = _AXIS[axis]
    if quad is None:
        quad = build_mortar(comp_m.traces[side_m], comp_n.traces[side_n], comp_m.face_order, axis)
    el_m, xi_m = _side_reference_points(comp_m.mesh, side_m, quad.edge_m, quad.t)
    el_n, xi_n = _side_reference_points(comp_n.mesh, side_n, quad.edge_n, quad.t)
    tm, tn = _trace(comp_m, el_m, xi_m), _trace(comp_n, el_n, xi_n)
    Nm = comp_m.ndof
    J = np.hstack([tm.val, -tn.val])
    F = 0.5 * np.hstack([tm.grad @ normal, tn.grad @ normal])
    w = quad.weights[:, None, None]
    pen = (gamma / quad.h)[:, None, None] * J[:, :, None] * J[:, None, :]
    if penalty_only:
        S = w * pen
    else:
        flux = nu * (F[:, :, None] * J[:, None, :] + J[:, :, None] * F[:, None, :])
        S = w * (pen - flux)
    shape = (Nm + comp_n.ndof,) * 2
    if comp_m.physics == POISSON:
        dofs = np.hstack([tm.nodes, Nm + tn.nodes])
        return fem.scatter(dofs, dofs, S, shape)
    vd = np.hstack([_vector_dofs(tm.nodes), Nm + _vector_dofs(tn.nodes)])
    A = fem.scatter(vd, vd, _scalar_to_vector(S), shape)
    if penalty_only:
        return A
    # <[n.v], {p}>: jump of normal velocity against the pressure average.
    JN = (J[:, :, None] * normal[None, None, :]).reshape(len(J), -1)
    P = 0.5 * np.hstack([tm.pval, tn.pval])
    pd = np.hstack([tm.pdofs, Nm + tn.pdofs])
    G = fem.scatter(vd, pd, quad.weights[:, None, None] * JN[:, :, None] * P[:, None, :], shape)
    return (A + G + G.T).tocsr()


def split_blocks(C: sp.csr_matrix, Nm: int):
    return C[:Nm, :Nm], C[:Nm, Nm:], C[Nm:, :Nm], C[Nm:, Nm:]


def assemble_interface_poisson(space_m, space_n, iface: InterfaceQuad, gamma: float):
    """Four blocks ``(B_mm, B_mn, B_nm, B_nn)`` of the Poisson interface form."""
    cm = Component("m", space_m.mesh, POISSON, space_m.order)
    cn = Component("n", space_n.mesh, POISSON, space_n.order)
    C = interface_operator(cm, cn, iface.axis, gamma, quad=iface)
    return split_blocks(C, cm.ndof)


def assemble_interface_stokes(comp_m: Component, comp_n: Component, iface: InterfaceQuad, gamma: float, nu: float):
    C = interface_operator(comp_m, comp_n, iface.axis, gamma, nu, quad=iface)
    return split_blocks(C, comp_m.ndof)


def _boundary_points(comp: Component, attr: str):
    mesh = comp.mesh
    edges = mesh.edges_with(attr)
    g, gw = gauss_interval(gauss_points_for(comp.face_order))
    ends = mesh.vertices[mesh.boundary_edges[edges]]
    length = np.linalg.norm(ends[:, 1] - ends[:, 0], axis=1)
    e = np.repeat(edges, len(g))
    lam = np.tile(g, len(edges))
    w = (length[:, None] * gw[None, :]).ravel()
    h = np.repeat(length, len(g))
    el, xi = _edge_reference_points(mesh, e, lam)
    # Outward normal: perpendicular to the edge, pointing away from the owner's centroid.
    d = ends[:, 1] - ends[:, 0]
    nrm = np.column_stack([d[:, 1], -d[:, 0]]) / length[:, None]
    owner, _ = mesh.boundary_owner
    centroid = mesh.vertices[mesh.elements[owner[edges]]].mean(axis=1)
    flip = np.einsum("ij,ij->i", nrm, ends.mean(axis=1) - centroid) < 0
    nrm[flip] *= -1.0
    return el, xi, w, h, np.repeat(nrm, len(g), axis=0)


def boundary_operator(comp: Component, attr: str, gamma: float, nu: float = 1.0) -> sp.csr_matrix:
    """Nitsche matrix of a Dirichlet boundary part (a side or the obstacle) of one component."""
    N = comp.ndof
    if len(comp.mesh.edges_with(attr)) == 0:
        return sp.csr_matrix((N, N))
    el, xi, w, h, nrm = _boundary_points(comp, attr)
    tr = _trace(comp, el, xi)
    V = tr.val
    F = np.einsum("nai,ni->na", tr.grad, nrm)
    S = w[:, None, None] * (
        (gamma / h)[:, None, None] * V[:, :, None] * V[:, None, :]
        - nu * (F[:, :, None] * V[:, None, :] + V[:, :, None] * F[:, None, :])
    )
    if comp.physics == POISSON:
        return fem.scatter(tr.nodes, tr.nodes, S, (N, N))
    vd = _vector_dofs(tr.nodes)
    A = fem.scatter(vd, vd, _scalar_to_vector(S), (N, N))
    VN = (V[:, :, None] * nrm[:, None, :]).reshape(len(V), -1)
    G = fem.scatter(vd, tr.pdofs, w[:, None, None] * VN[:, :, None] * tr.pval[:, None, :], (N, N))
    return (A + G + G.T).tocsr()


@dataclass(frozen=True)
class FormMap:
    """Linear map from data sampled at fixed points to a right-hand-side vector.

    ``points`` are local coordinates; ``mats[c]`` (ndof x npoints) acts on the
    ``c``-th data component.  Because the map is fixed per component it can be
    projected onto a reduced basis once and reused for any data.
    """

    points: np.ndarray
    mats: tuple

    def values(self, data, offset, *args):
        x1 = self.points[:, 0] + offset[0]
        x2 = self.points[:, 1] + offset[1]
        vals = data(x1, x2, *args)
        if len(self.mats) == 1:
            vals = (vals,)
        return [np.broadcast_to(np.asarray(v, dtype=float), x1.shape) for v in vals]

    def apply(self, vals) -> np.ndarray:
        return sum(M @ v for M, v in zip(self.mats, vals))


def _map_matrix(rows, data, n_rows, n_points):
    n, k = rows.shape
    cols = np.broadcast_to(np.arange(n)[:, None], (n, k))
    return fem._to_csr(rows, cols, data, (n_rows, n_points))


def load_map(comp: Component) -> FormMap:
    V = comp.primary
    val, _, x, wdet = fem._volume_data(V, max(fem._default_order(V), 3))
    ne, nq = wdet.shape
    pts = x.reshape(-1, 2)
    # Point index e * nq + q; local value wdet * phi_a.
    local = (wdet[:, :, None] * val[None, :, :]).reshape(ne * nq, -1)
    nodes = np.repeat(V.elem_nodes, nq, axis=0)
    N = comp.ndof
    if V.ncomp == 1:
        return FormMap(pts, (_map_matrix(nodes, local, N, len(pts)),))
    return FormMap(pts, tuple(_map_matrix(2 * nodes + c, local, N, len(pts)) for c in (0, 1)))


def boundary_map(comp: Component, attr: str, kind: str, gamma: float, nu: float = 1.0) -> FormMap:
    """Right-hand-side map of a boundary part for Dirichlet or Neumann data.

    Dirichlet data ``g`` contributes ``gamma/h (v, g) - (nu n . grad v, g)``
    (plus ``(q, n . g)`` for Stokes pressure tests).  Neumann data is the
    prescribed flux ``n . grad u`` (Poisson) or traction
    ``n . (nu grad u - p I)`` (Stokes) and contributes ``(v, g)``.
    """
    if kind not in BC_TYPES:
        raise LayoutError(f"boundary kind must be dirichlet or neumann, got {kind!r}")
    N = comp.ndof
    if len(comp.mesh.edges_with(attr)) == 0:
        ncomp = comp.primary.ncomp
        return FormMap(np.zeros((0, 2)), tuple(sp.csr_matrix((N, 0)) for _ in range(ncomp)))
    el, xi, w, h, nrm = _boundary_points(comp, attr)
    tr = _trace(comp, el, xi)
    V = tr.val
    npts = len(w)
    if kind == "neumann":
        local = w[:, None] * V
    else:
        F = np.einsum("nai,ni->na", tr.grad, nrm)
        local = w[:, None] * ((gamma / h)[:, None] * V - nu * F)
    if comp.physics == POISSON:
        return FormMap(tr.x, (_map_matrix(tr.nodes, local, N, npts),))
    mats = []
    for c in (0, 1):
        rows = 2 * tr.nodes + c
        data = local
        if kind == "dirichlet":
            rows = np.hstack([rows, tr.pdofs])
            data = np.hstack([local, w[:, None] * tr.pval * nrm[:, c : c + 1]])
        mats.append(_map_matrix(rows, data, N, npts))
    return FormMap(tr.x, tuple(mats))


def component_map(comp: Component, key, gamma: float, nu: float) -> FormMap:
    """Cached :func:`load_map` (``key="load"``) or :func:`boundary_map` (``key=(attr, kind)``)."""
    cache = comp.__dict__.setdefault("_form_maps", {})
    k = (key, float(gamma), float(nu))
    if k not in cache:
        cache[k] = load_map(comp) if key == "load" else boundary_map(comp, key[0], key[1], gamma, nu)
    return cache[k]


def boundary_rhs(comp: Component, attr: str, kind: str, data, offset, gamma: float, nu: float = 1.0) -> np.ndarray:
    """Right-hand side of a boundary part; ``data(x1, x2, attr)`` in global coordinates."""
    fm = component_map(comp, (attr, kind), gamma, nu)
    return fm.apply(fm.values(data, offset, attr))


def assemble_boundary_poisson(space, side: str, gamma: float, g_di, offset=(0.0, 0.0)):
    """Nitsche matrix and right-hand side of one Dirichlet side for a scalar space."""
    comp = Component("m", space.mesh, POISSON, space.order)
    A = boundary_operator(comp, side, gamma)
    b = boundary_rhs(comp, side, "dirichlet", lambda x1, x2, s: g_di(x1, x2), offset, gamma)
    return A, b


def assemble_boundary_stokes(comp: Component, side: str, gamma: float, nu: float, kind: str, data, offset=(0.0, 0.0)):
    if kind not in BC_TYPES:
        raise LayoutError(f"side {side!r} must be dirichlet or neumann, got {kind!r}")
    if kind == "neumann":
        return sp.csr_matrix((comp.ndof, comp.ndof)), boundary_rhs(comp, side, kind, data, offset, gamma, nu)
    return boundary_operator(comp, side, gamma, nu), boundary_rhs(comp, side, kind, data, offset, gamma, nu)


# --- subdomain operators ------------------------------------------------------


def volume_operator(comp: Component, nu: float = 1.0) -> sp.csr_matrix:
    """Subdomain bilinear form; the saddle-point block matrix for Stokes."""
    if comp.physics == POISSON:
        return fem.assemble_stiffness(comp.primary)
    A = fem.assemble_stiffness(comp.primary, nu)
    B = fem.assemble_divergence(comp.primary, comp.pressure)
    return sp.bmat([[A, B.T], [B, None]], format="csr")


def domain_operator(comp: Component, gamma: float, nu: float = 1.0) -> sp.csr_matrix:
    """Volume form plus the Nitsche terms on the component's own obstacle, if any."""
    A = volume_operator(comp, nu)
    if len(comp.mesh.edges_with(OBSTACLE)):
        A = (A + boundary_operator(comp, OBSTACLE, gamma, nu)).tocsr()
    return A


def rhs_terms(comp: Component, layout: Layout, m: int, problem) -> list:
    """``(key, data, attr)`` triples whose maps sum to the right-hand side of subdomain ``m``."""
    terms = []
    if getattr(problem, "has_forcing", True):
        terms.append(("load", lambda x1, x2, _attr: problem.forcing(x1, x2), None))
    for side in layout.outer_sides(m):
        kind = layout.bc[side]
        if kind == "neumann" and not getattr(problem, "has_neumann_data", True):
            continue
        terms.append(((side, kind), problem.dirichlet if kind == "dirichlet" else problem.neumann, side))
    if len(comp.mesh.edges_with(OBSTACLE)):
        terms.append(((OBSTACLE, "dirichlet"), problem.dirichlet, OBSTACLE))
    return terms


def subdomain_rhs(comp: Component, layout: Layout, m: int, problem, gamma: float) -> np.ndarray:
    """Right-hand side of subdomain ``m`` in global coordinates: load plus boundary data."""
    off = layout.offset(m)
    nu = getattr(problem, "nu", 1.0)
    b = np.zeros(comp.ndof)
    for key, data, attr in rhs_terms(comp, layout, m, problem):
        fm = component_map(comp, key, gamma, nu)
        b += fm.apply(fm.values(data, off, attr))
    return b


# --- global full-order system -------------------------------------------------


@dataclass
class GlobalSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    offsets: np.ndarray
    physics: str
    constrained: bool = False
    constraint: np.ndarray | None = None

    @property
    def n_subdomains(self) -> int:
        return len(self.offsets) - 1

    def split(self, x: np.ndarray) -> list:
        return [x[self.offsets[m] : self.offsets[m + 1]] for m in range(self.n_subdomains)]


def _add_block(triplets, A, r0, c0):
    A = A.tocoo()
    triplets[0].append(A.row + r0)
    triplets[1].append(A.col + c0)
    triplets[2].append(A.data)


def assemble_global_fom(layout: Layout, components: dict, problem, gamma: float | None = None) -> GlobalSystem:
    """Full-order decomposed system: subdomain, interface and boundary forms summed block-wise.

    ``components`` maps reference names to :class:`Component`.  Stokes
    systems without a Neumann side get a mean-zero pressure constraint.
    """
    layout.check(components)
    comps = [components[name] for name in layout.cells]
    physics = comps[0].physics
    nu = getattr(problem, "nu", 1.0)
    if gamma is None:
        gamma = default_gamma(comps[0], nu)
    sizes = np.array([c.ndof for c in comps])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    trip = ([], [], [])
    rhs = np.zeros(offsets[-1])
    for m, comp in enumerate(comps):
        A = domain_operator(comp, gamma, nu)
        for side in layout.outer_sides(m):
            if layout.bc[side] == "dirichlet":
                A = A + boundary_operator(comp, side, gamma, nu)
        _add_block(trip, A, offsets[m], offsets[m])
        rhs[offsets[m] : offsets[m + 1]] = subdomain_rhs(comp, layout, m, problem, gamma)
    for m, n, axis in find_interfaces(layout):
        C = interface_operator(comps[m], comps[n], axis, gamma, nu).tocoo()
        Nm = comps[m].ndof
        rows = np.where(C.row < Nm, C.row + offsets[m], C.row - Nm + offsets[n])
        cols = np.where(C.col < Nm, C.col + offsets[m], C.col - Nm + offsets[n])
        trip[0].append(rows)
        trip[1].append(cols)
        trip[2].append(C.data)
    N = offsets[-1]
    matrix = fem._to_csr(np.concatenate(trip[0]), np.concatenate(trip[1]), np.concatenate(trip[2]), (N, N))
    system = GlobalSystem(matrix, rhs, offsets, physics)
    if physics == STOKES and not layout.has_neumann:
        w = np.concatenate([c.pressure_weights for c in comps])
        system = add_mean_zero_constraint(system, w)
    return system


def field_indices(layout: Layout, components: dict, offsets: np.ndarray):
    """Global velocity and pressure dof indices of a Stokes system."""
    vel, pres = [], []
    for m, name in enumerate(layout.cells):
        c = components[name]
        vel.append(offsets[m] + np.arange(c.n_velocity))
        pres.append(offsets[m] + np.arange(c.n_velocity, c.ndof))
    return np.concatenate(vel), np.concatenate(pres)


def stokes_preconditioner(system: GlobalSystem, layout: Layout, components: dict, nu: float, sweeps: int = 1):
    """Block-diagonal MINRES preconditioner: velocity block, scaled pressure mass, multiplier."""
    from .linalg import saddle_preconditioner

    vel, pres = field_indices(layout, components, system.offsets)
    A = system.matrix.tocsr()
    A_uu = A[vel][:, vel]
    M_p = sp.block_diag([fem.assemble_mass(components[n].pressure) for n in layout.cells], format="csr")
    extra = np.arange(system.offsets[-1], A.shape[0])
    area = float(sum(components[n].mesh.area for n in layout.cells))
    return saddle_preconditioner(A_uu, M_p, vel, pres, nu, extra, nu * area, sweeps)
