"""Lagrange elements, function spaces and subdomain assembly.

Spaces are continuous Galerkin inside one component mesh.  Supported kinds:

========  =====  =====================================
kind      shape  description
========  =====  =====================================
``P1``    tri    linear scalar
``P2``    tri    quadratic scalar
``VP2``   tri    quadratic vector (Taylor-Hood velocity)
``Q1``    quad   bilinear scalar
``Q2``    quad   biquadratic scalar
``VQ2``   quad   biquadratic vector (Taylor-Hood velocity)
========  =====  =====================================

Dof ordering is vertices first (mesh order), then edges (sorted vertex
pairs), then cell centres (Q2 only).  Vector dofs are interleaved per node.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .mesh import REF_VERTICES, SIDES, Mesh2D
from .quadrature import quad_rule

_KINDS = {
    "P1": ("tri", 1, 1),
    "P2": ("tri", 2, 1),
    "VP2": ("tri", 2, 2),
    "Q1": ("quad", 1, 1),
    "Q2": ("quad", 2, 1),
    "VQ2": ("quad", 2, 2),
}


# --- reference elements -----------------------------------------------------


def _tri_p1(xi):
    x, y = xi[:, 0], xi[:, 1]
    one, zero = np.ones_like(x), np.zeros_like(x)
    val = np.stack([1.0 - x - y, x, y], axis=1)
    grad = np.stack([np.stack([-one, -one], 1), np.stack([one, zero], 1), np.stack([zero, one], 1)], axis=1)
    return val, grad


def _tri_p2(xi):
    L, dL = _tri_p1(xi)
    val = np.empty((len(xi), 6))
    grad = np.empty((len(xi), 6, 2))
    for a in range(3):
        val[:, a] = L[:, a] * (2.0 * L[:, a] - 1.0)
        grad[:, a] = (4.0 * L[:, a] - 1.0)[:, None] * dL[:, a]
    for e, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
        val[:, 3 + e] = 4.0 * L[:, a] * L[:, b]
        grad[:, 3 + e] = 4.0 * (L[:, a, None] * dL[:, b] + L[:, b, None] * dL[:, a])
    return val, grad


def _lagrange_1d(x, order):
    if order == 1:
        return np.stack([1.0 - x, x], 1), np.stack([-np.ones_like(x), np.ones_like(x)], 1)
    val = np.stack([2.0 * (x - 0.5) * (x - 1.0), -4.0 * x * (x - 1.0), 2.0 * x * (x - 0.5)], 1)
    der = np.stack([4.0 * x - 3.0, -8.0 * x + 4.0, 4.0 * x - 1.0], 1)
    return val, der


# (i, j) positions of the local nodes in the 1D tensor grids.
_QUAD_NODES = {
    1: [(0, 0), (1, 0), (1, 1), (0, 1)],
    2: [(0, 0), (2, 0), (2, 2), (0, 2), (1, 0), (2, 1), (1, 2), (0, 1), (1, 1)],
}


def _quad(order):
    def basis(xi):
        vx, dx = _lagrange_1d(xi[:, 0], order)
        vy, dy = _lagrange_1d(xi[:, 1], order)
        ij = _QUAD_NODES[order]
        val = np.stack([vx[:, i] * vy[:, j] for i, j in ij], 1)
        grad = np.stack([np.stack([dx[:, i] * vy[:, j], vx[:, i] * dy[:, j]], 1) for i, j in ij], 1)
        return val, grad

    return basis


_BASIS = {("tri", 1): _tri_p1, ("tri", 2): _tri_p2, ("quad", 1): _quad(1), ("quad", 2): _quad(2)}


def basis(shape: str, order: int, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reference shape functions and their reference gradients at points ``xi``."""
    return _BASIS[shape, order](np.atleast_2d(np.asarray(xi, dtype=float)))


def reference_nodes(shape: str, order: int) -> np.ndarray:
    if shape == "tri":
        v = REF_VERTICES["tri"]
        if order == 1:
            return v.copy()
        mids = [(v[a] + v[b]) / 2 for a, b in ((0, 1), (1, 2), (2, 0))]
        return np.vstack([v, mids])
    return np.array([(i / order, j / order) for i, j in _QUAD_NODES[order]])


# --- geometry -----------------------------------------------------------------


def _invert(J):
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    inv = np.empty_like(J)
    inv[..., 0, 0] = J[..., 1, 1] / det
    inv[..., 1, 1] = J[..., 0, 0] / det
    inv[..., 0, 1] = -J[..., 0, 1] / det
    inv[..., 1, 0] = -J[..., 1, 0] / det
    return det, inv


def geometry(mesh: Mesh2D, elems: np.ndarray, xi: np.ndarray):
    """Physical points ``(ne, nq, 2)``, Jacobian determinants and inverses at shared points ``xi``."""
    coords = mesh.vertices[mesh.elements[elems]]
    N, dN = basis(mesh.shape, 1, xi)
    x = np.einsum("qa,eai->eqi", N, coords)
    J = np.einsum("eai,qaj->eqij", coords, dN)
    det, inv = _invert(J)
    return x, det, inv


def geometry_at(mesh: Mesh2D, elems: np.ndarray, xi: np.ndarray):
    """Like :func:`geometry` but with one reference point per element; no quadrature axis."""
    coords = mesh.vertices[mesh.elements[elems]]
    N, dN = basis(mesh.shape, 1, xi)
    x = np.einsum("na,nai->ni", N, coords)
    J = np.einsum("nai,naj->nij", coords, dN)
    det, inv = _invert(J)
    return x, det, inv


# --- function spaces --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FunctionSpace:
    mesh: Mesh2D
    kind: str

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}")
        if _KINDS[self.kind][0] != self.mesh.shape:
            raise ValueError(f"space {self.kind} is incompatible with {self.mesh.shape} elements")

    @property
    def shape(self) -> str:
        return self.mesh.shape

    @property
    def order(self) -> int:
        return _KINDS[self.kind][1]

    @property
    def ncomp(self) -> int:
        return _KINDS[self.kind][2]

    @cached_property
    def elem_nodes(self) -> np.ndarray:
        m = self.mesh
        if self.order == 1:
            return m.elements.copy()
        cols = [m.elements, m.n_vertices + m.element_edge_index]
        if self.shape == "quad":
            cols.append((m.n_vertices + len(m.edges) + np.arange(m.n_elements))[:, None])
        return np.hstack(cols)

    @property
    def n_nodes(self) -> int:
        m = self.mesh
        if self.order == 1:
            return m.n_vertices
        return m.n_vertices + len(m.edges) + (m.n_elements if self.shape == "quad" else 0)

    @property
    def dof_count(self) -> int:
        return self.n_nodes * self.ncomp

    @cached_property
    def node_coords(self) -> np.ndarray:
        m = self.mesh
        parts = [m.vertices]
        if self.order == 2:
            parts.append(m.vertices[m.edges].mean(axis=1))
            if self.shape == "quad":
                parts.append(m.vertices[m.elements].mean(axis=1))
        return np.vstack(parts)

    @cached_property
    def elem_dofs(self) -> np.ndarray:
        """Global dofs per element; vector dofs ordered (node0.x1, node0.x2, node1.x1, ...)."""
        if self.ncomp == 1:
            return self.elem_nodes
        n = self.elem_nodes
        return np.stack([2 * n, 2 * n + 1], axis=2).reshape(len(n), -1)

    @cached_property
    def boundary_dofs(self) -> dict:
        """Dof indices on each side of the unit square (and on the obstacle)."""
        m = self.mesh
        out = {}
        nv = m.n_vertices
        edge_keys = m.edges[:, 0] * nv + m.edges[:, 1]
        for attr in SIDES + ("obstacle",):
            idx = m.edges_with(attr)
            if len(idx) == 0:
                continue
            be = m.boundary_edges[idx]
            nodes = set(be.ravel().tolist())
            if self.order == 2:
                s = np.sort(be, axis=1)
                nodes |= set((nv + np.searchsorted(edge_keys, s[:, 0] * nv + s[:, 1])).tolist())
            nodes = np.array(sorted(nodes))
            if self.ncomp == 2:
                nodes = np.stack([2 * nodes, 2 * nodes + 1], 1).ravel()
            out[attr] = nodes
        return out

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolant of ``func(x1, x2)``; vector functions return a pair."""
        x = self.node_coords
        vals = func(x[:, 0], x[:, 1])
        if self.ncomp == 1:
            return np.broadcast_to(np.asarray(vals, dtype=float), (len(x),)).copy()
        out = np.empty((len(x), 2))
        out[:, 0] = vals[0]
        out[:, 1] = vals[1]
        return out.ravel()

    def eval_at(self, elems: np.ndarray, xi: np.ndarray):
        """Basis values, physical gradients and physical points at one reference point per element.

        Returns ``val (n, nloc)``, ``grad (n, nloc, 2)``, ``x (n, 2)`` for the
        scalar node basis; callers expand to vector dofs themselves.
        """
        val, dref = basis(self.shape, self.order, xi)
        x, _, inv = geometry_at(self.mesh, elems, xi)
        grad = np.einsum("nbj,nji->nbi", dref, inv)
        return val, grad, x


def build_space(mesh: Mesh2D, kind: str) -> FunctionSpace:
    return FunctionSpace(mesh, kind)


def taylor_hood(mesh: Mesh2D) -> tuple[FunctionSpace, FunctionSpace]:
    """Velocity/pressure pair of orders (2, 1) for the mesh's element shape."""
    if mesh.shape == "tri":
        return FunctionSpace(mesh, "VP2"), FunctionSpace(mesh, "P1")
    return FunctionSpace(mesh, "VQ2"), FunctionSpace(mesh, "Q1")


def scalar_space(mesh: Mesh2D, order: int = 1) -> FunctionSpace:
    return FunctionSpace(mesh, ("P" if mesh.shape == "tri" else "Q") + str(order))


# --- assembly ---------------------------------------------------------------


def _volume_data(space: FunctionSpace, order: int):
    rule = quad_rule(space.shape, order)
    val, dref = basis(space.shape, space.order, rule.points)
    elems = np.arange(space.mesh.n_elements)
    x, det, inv = geometry(space.mesh, elems, rule.points)
    grad = np.einsum("qbj,eqji->eqbi", dref, inv)
    wdet = rule.weights[None, :] * np.abs(det)
    return val, grad, x, wdet


def _default_order(space: FunctionSpace) -> int:
    return 2 * space.order + 1


def _to_csr(rows, cols, data, shape) -> sp.csr_matrix:
    A = sp.coo_matrix((np.ravel(data), (np.ravel(rows), np.ravel(cols))), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def scatter(row_dofs, col_dofs, local, shape) -> sp.csr_matrix:
    """Sum local matrices ``local (n, a, b)`` into a sparse matrix of ``shape``."""
    n, a, b = local.shape
    R = np.broadcast_to(row_dofs[:, :, None], (n, a, b))
    C = np.broadcast_to(col_dofs[:, None, :], (n, a, b))
    return _to_csr(R, C, local, shape)


def _expand_vector(K: np.ndarray) -> np.ndarray:
    """Block-diagonal component expansion of scalar local matrices (interleaved dofs)."""
    n, a, _ = K.shape
    out = np.zeros((n, a, 2, a, 2))
    out[:, :, 0, :, 0] = K
    out[:, :, 1, :, 1] = K
    return out.reshape(n, 2 * a, 2 * a)


def assemble_stiffness(space: FunctionSpace, nu: float = 1.0) -> sp.csr_matrix:
    """Matrix of ``(nu grad u, grad v)``; componentwise for vector spaces."""
    _, grad, _, wdet = _volume_data(space, _default_order(space))
    K = nu * np.einsum("eq,eqai,eqbi->eab", wdet, grad, grad)
    # Exact symmetry regardless of floating point summation order.
    K = 0.5 * (K + K.transpose(0, 2, 1))
    if space.ncomp == 2:
        K = _expand_vector(K)
    d = space.elem_dofs
    return scatter(d, d, K, (space.dof_count, space.dof_count))


def assemble_mass(space: FunctionSpace) -> sp.csr_matrix:
    val, _, _, wdet = _volume_data(space, 2 * space.order + 1 if space.order > 1 else 3)
    M = np.einsum("eq,qa,qb->eab", wdet, val, val)
    M = 0.5 * (M + M.transpose(0, 2, 1))
    if space.ncomp == 2:
        M = _expand_vector(M)
    d = space.elem_dofs
    return scatter(d, d, M, (space.dof_count, space.dof_count))


def assemble_divergence(vspace: FunctionSpace, pspace: FunctionSpace) -> sp.csr_matrix:
    """Matrix ``B`` with ``B[q, j] = -(div phi_j, psi_q)``, shape (pressure, velocity)."""
    if vspace.mesh is not pspace.mesh:
        raise ValueError("velocity and pressure spaces must share one mesh")
    if vspace.ncomp != 2 or pspace.ncomp != 1:
        raise ValueError("expected a vector velocity space and a scalar pressure space")
    _, grad, _, wdet = _volume_data(vspace, _default_order(vspace))
    pval, _ = basis(pspace.shape, pspace.order, quad_rule(vspace.shape, _default_order(vspace)).points)
    # grad (e, q, b, c) -> velocity local dof 2b + c
    D = -np.einsum("eq,qa,eqbc->eabc", wdet, pval, grad).reshape(len(wdet), pval.shape[1], -1)
    return scatter(pspace.elem_dofs, vspace.elem_dofs, D, (pspace.dof_count, vspace.dof_count))


def assemble_load(space: FunctionSpace, f, offset=(0.0, 0.0), order: int | None = None) -> np.ndarray:
    """Vector of ``(v, f)``.  ``f(x1, x2)`` is evaluated at ``x + offset``."""
    val, _, x, wdet = _volume_data(space, order or max(_default_order(space), 3))
    x1 = x[..., 0] + offset[0]
    x2 = x[..., 1] + offset[1]
    fx = f(x1, x2)
    if space.ncomp == 1:
        fx = np.broadcast_to(np.asarray(fx, dtype=float), x1.shape)
        local = np.einsum("eq,qa,eq->ea", wdet, val, fx)
    else:
        f1 = np.broadcast_to(np.asarray(fx[0], dtype=float), x1.shape)
        f2 = np.broadcast_to(np.asarray(fx[1], dtype=float), x1.shape)
        local = np.stack(
            [np.einsum("eq,qa,eq->ea", wdet, val, f1), np.einsum("eq,qa,eq->ea", wdet, val, f2)], axis=2
        ).reshape(len(wdet), -1)
    return np.bincount(space.elem_dofs.ravel(), weights=local.ravel(), minlength=space.dof_count)


def integral_weights(space: FunctionSpace) -> np.ndarray:
    """``w_i = integral of phi_i`` for a scalar space."""
    return assemble_load(space, lambda x1, x2: 1.0)


def l2_error(space: FunctionSpace, coeffs: np.ndarray, exact, offset=(0.0, 0.0), order: int = 6):
    """Return ``(||u_h - u||, ||u||)`` in L2 over the mesh with quadrature of ``order``."""
    val, _, x, wdet = _volume_data(space, order)
    x1 = x[..., 0] + offset[0]
    x2 = x[..., 1] + offset[1]
    ex = exact(x1, x2)
    nodes = space.elem_nodes
    if space.ncomp == 1:
        uh = np.einsum("qa,ea->eq", val, coeffs[nodes])
        ex = np.broadcast_to(np.asarray(ex, dtype=float), x1.shape)
        err, ref = (uh - ex) ** 2, ex**2
    else:
        c = coeffs.reshape(-1, 2)
        err = np.zeros_like(x1)
        ref = np.zeros_like(x1)
        for k in range(2):
            uh = np.einsum("qa,ea->eq", val, c[nodes, k])
            e = np.broadcast_to(np.asarray(ex[k], dtype=float), x1.shape)
            err += (uh - e) ** 2
            ref += e**2
    return float(np.sqrt(np.sum(wdet * err))), float(np.sqrt(np.sum(wdet * ref)))
