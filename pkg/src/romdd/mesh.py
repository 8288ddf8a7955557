"""Component meshes on the unit square.

A component mesh covers ``[0, 1]^2`` (minus an optional obstacle) with
triangles or quadrilaterals.  Boundary edges carry one of the attributes
``left``, ``right``, ``bottom``, ``top`` or ``obstacle``.  Meshes are
immutable; placement inside a global layout is done by integer translation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

SIDES = ("left", "right", "bottom", "top")
OBSTACLE = "obstacle"
ATTRIBUTES = SIDES + (OBSTACLE,)

_CODE = {"left": "L", "right": "R", "bottom": "B", "top": "T", "obstacle": "O"}
_ATTR = {v: k for k, v in _CODE.items()}

# Reference-element vertex coordinates, shared with the fem module.
REF_VERTICES = {
    "tri": np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    "quad": np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
}

_TOL = 1e-12


class MeshError(ValueError):
    pass


class MeshFormatError(MeshError):
    def __init__(self, message: str, line: int):
        super().__init__(f"{message}, line {line}")
        self.line = line


def side_coordinate(side: str) -> int:
    """Index of the coordinate that parametrises ``side`` (x1 for bottom/top)."""
    return 0 if side in ("bottom", "top") else 1


def side_normal(side: str) -> np.ndarray:
    return {
        "left": np.array([-1.0, 0.0]),
        "right": np.array([1.0, 0.0]),
        "bottom": np.array([0.0, -1.0]),
        "top": np.array([0.0, 1.0]),
    }[side]


@dataclass(frozen=True, eq=False)
class Mesh2D:
    vertices: np.ndarray
    elements: np.ndarray
    boundary_edges: np.ndarray
    boundary_attrs: tuple

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 2)
        e = np.array(self.elements, dtype=np.int64)
        b = np.array(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        for a in (v, e, b):
            a.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "elements", e)
        object.__setattr__(self, "boundary_edges", b)
        object.__setattr__(self, "boundary_attrs", tuple(self.boundary_attrs))
        if e.ndim != 2 or e.shape[1] not in (3, 4):
            raise MeshError("elements must be triangles or quadrilaterals, one shape per mesh")
        if len(self.boundary_attrs) != len(b):
            raise MeshError("one attribute per boundary edge required")
        bad = set(self.boundary_attrs) - set(ATTRIBUTES)
        if bad:
            raise MeshError(f"unknown boundary attribute(s) {sorted(bad)}")

    @property
    def shape(self) -> str:
        return "tri" if self.elements.shape[1] == 3 else "quad"

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @cached_property
    def element_areas(self) -> np.ndarray:
        """Signed areas (shoelace formula); positive for counter-clockwise elements."""
        xy = self.vertices[self.elements]
        x, y = xy[..., 0], xy[..., 1]
        return 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)

    @property
    def area(self) -> float:
        return float(self.element_areas.sum())

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted vertex pairs, in lexicographic order."""
        return np.unique(self._element_edges.reshape(-1, 2), axis=0)

    @cached_property
    def _element_edges(self) -> np.ndarray:
        k = self.elements.shape[1]
        pairs = np.stack([self.elements, np.roll(self.elements, -1, axis=1)], axis=2)
        return np.sort(pairs, axis=2).reshape(len(self.elements), k, 2)

    @cached_property
    def element_edge_index(self) -> np.ndarray:
        """(n_elements, k) index into :attr:`edges` of each local edge."""
        k = self.elements.shape[1]
        nv = self.n_vertices
        keys = self.edges[:, 0] * nv + self.edges[:, 1]
        ee = self._element_edges.reshape(-1, 2)
        return np.searchsorted(keys, ee[:, 0] * nv + ee[:, 1]).reshape(-1, k)

    @cached_property
    def boundary_owner(self) -> tuple[np.ndarray, np.ndarray]:
        """Owning element and local edge number of every boundary edge."""
        nv = self.n_vertices
        keys = self.edges[:, 0] * nv + self.edges[:, 1]
        be = np.sort(self.boundary_edges, axis=1)
        idx = np.searchsorted(keys, be[:, 0] * nv + be[:, 1])
        idx = np.minimum(idx, len(keys) - 1)
        found = keys[idx] == be[:, 0] * nv + be[:, 1]
        flat = self.element_edge_index.ravel()
        k = self.elements.shape[1]
        owner = np.full(len(be), -1, dtype=np.int64)
        local = np.full(len(be), -1, dtype=np.int64)
        count = np.bincount(flat, minlength=len(keys))
        order = np.argsort(flat, kind="stable")
        first = np.searchsorted(flat[order], idx)
        ok = found & (count[idx] == 1)
        pos = order[first[ok]]
        owner[ok] = pos // k
        local[ok] = pos % k
        return owner, local

    def edges_with(self, attr: str) -> np.ndarray:
        return np.array([i for i, a in enumerate(self.boundary_attrs) if a == attr], dtype=np.int64)

    def validate(self) -> None:
        """Raise :class:`MeshError` when a structural invariant is violated."""
        if np.any(self.elements < 0) or np.any(self.elements >= self.n_vertices):
            raise MeshError("element vertex index out of range")
        if np.any(self.element_areas <= 0.0):
            raise MeshError("element with non-positive signed area")
        owner, _ = self.boundary_owner
        if np.any(owner < 0):
            raise MeshError("boundary edge not owned by exactly one element")
        for i, attr in enumerate(self.boundary_attrs):
            if attr == OBSTACLE:
                continue
            c = self.vertices[self.boundary_edges[i]]
            fixed = 1 - side_coordinate(attr)
            target = 0.0 if attr in ("left", "bottom") else 1.0
            if np.any(np.abs(c[:, fixed] - target) > _TOL):
                raise MeshError(f"boundary edge {i} is not on the {attr} side")

    def same_as(self, other: "Mesh2D") -> bool:
        return (
            np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.elements, other.elements)
            and np.array_equal(self.boundary_edges, other.boundary_edges)
            and self.boundary_attrs == other.boundary_attrs
        )


@dataclass(frozen=True)
class SideTrace:
    """Partition of one side of the unit square into boundary-edge segments."""

    side: str
    t0: np.ndarray
    t1: np.ndarray
    edge: np.ndarray

    @property
    def breakpoints(self) -> np.ndarray:
        return np.append(self.t0, self.t1[-1])

    def __len__(self):
        return len(self.t0)


def _grid_boundary(n: int, vid) -> tuple[list, list]:
    edges, attrs = [], []
    for i in range(n):
        edges.append((vid(i, 0), vid(i + 1, 0)))
        attrs.append("bottom")
    for j in range(n):
        edges.append((vid(n, j), vid(n, j + 1)))
        attrs.append("right")
    for i in range(n, 0, -1):
        edges.append((vid(i, n), vid(i - 1, n)))
        attrs.append("top")
    for j in range(n, 0, -1):
        edges.append((vid(0, j), vid(0, j - 1)))
        attrs.append("left")
    return edges, attrs


def _grid_vertices(n: int) -> np.ndarray:
    t = np.arange(n + 1) / n
    x1, x2 = np.meshgrid(t, t)
    return np.column_stack([x1.ravel(), x2.ravel()])


def gen_quad_grid(n: int) -> Mesh2D:
    """Uniform ``n x n`` grid of square elements on the unit square."""
    if n < 1:
        raise MeshError("n must be >= 1")

    def vid(i, j):
        return j * (n + 1) + i

    cells = [(vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)) for j in range(n) for i in range(n)]
    edges, attrs = _grid_boundary(n, vid)
    return Mesh2D(_grid_vertices(n), cells, edges, attrs)


def gen_tri_grid(n: int) -> Mesh2D:
    """:func:`gen_quad_grid` with every cell split along its lower-left/upper-right diagonal."""
    if n < 1:
        raise MeshError("n must be >= 1")

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    edges, attrs = _grid_boundary(n, vid)
    return Mesh2D(_grid_vertices(n), tris, edges, attrs)


def _square_perimeter(nb: int) -> tuple[np.ndarray, list]:
    """Counter-clockwise perimeter points starting at the origin, and the side of each segment."""
    s = np.arange(nb) / nb
    z, o = np.zeros(nb), np.ones(nb)
    pts = np.concatenate(
        [
            np.column_stack([s, z]),
            np.column_stack([o, s]),
            np.column_stack([1.0 - s, o]),
            np.column_stack([z, 1.0 - s]),
        ]
    )
    sides = ["bottom"] * nb + ["right"] * nb + ["top"] * nb + ["left"] * nb
    return pts, sides


def gen_circle_obstacle(radius: float, n_boundary: int, n_ring: int) -> Mesh2D:
    """Triangulated unit square with a centred circular hole.

    The hole is the inscribed polygon with ``4 * n_boundary`` vertices; its
    vertices are matched one-to-one with the outer boundary vertices and
    ``n_ring`` layers of elements are stretched between the two.
    """
    if not 0.0 < radius < 0.5:
        raise MeshError("radius must lie in (0, 0.5)")
    if n_boundary < 4:
        raise MeshError("n_boundary must be >= 4")
    if n_ring < 2:
        raise MeshError("n_ring must be >= 2")
    K = 4 * n_boundary
    outer, sides = _square_perimeter(n_boundary)
    phi = 1.25 * np.pi + 2.0 * np.pi * np.arange(K) / K
    inner = 0.5 + radius * np.column_stack([np.cos(phi), np.sin(phi)])
    rings = [inner]
    for j in range(1, n_ring):
        t = j / n_ring
        rings.append((1.0 - t) * inner + t * outer)
    rings.append(outer)
    vertices = np.concatenate(rings)

    def vid(j, k):
        return j * K + k % K

    tris = []
    for j in range(n_ring):
        for k in range(K):
            a, b, c, d = vid(j, k), vid(j, k + 1), vid(j + 1, k + 1), vid(j + 1, k)
            tris.append((a, d, c))
            tris.append((a, c, b))
    edges = [(vid(0, k + 1), vid(0, k)) for k in range(K)]
    attrs = [OBSTACLE] * K
    edges += [(vid(n_ring, k), vid(n_ring, k + 1)) for k in range(K)]
    attrs += sides
    mesh = Mesh2D(vertices, tris, edges, attrs)
    if np.any(mesh.element_areas <= 0.0):
        raise MeshError("circle mesh produced an inverted element; increase n_ring")
    return mesh


def obstacle_area(mesh: Mesh2D) -> float:
    """Area enclosed by the obstacle edges (zero if there are none)."""
    idx = mesh.edges_with(OBSTACLE)
    if len(idx) == 0:
        return 0.0
    a = mesh.vertices[mesh.boundary_edges[idx, 0]]
    b = mesh.vertices[mesh.boundary_edges[idx, 1]]
    # Obstacle edges are oriented with the hole on the right.
    return float(-0.5 * np.sum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1]))


def side_trace(mesh: Mesh2D, side: str) -> SideTrace:
    if side not in SIDES:
        raise MeshError(f"unknown side {side!r}")
    idx = mesh.edges_with(side)
    if len(idx) == 0:
        raise MeshError(f"mesh has no boundary edges on side {side!r}")
    c = side_coordinate(side)
    t = mesh.vertices[mesh.boundary_edges[idx]][:, :, c]
    t0, t1 = t.min(axis=1), t.max(axis=1)
    order = np.argsort(t0, kind="stable")
    t0, t1, idx = t0[order], t1[order], idx[order]
    if abs(t0[0]) > _TOL or abs(t1[-1] - 1.0) > _TOL or np.any(np.abs(t0[1:] - t1[:-1]) > _TOL):
        raise MeshError(f"boundary edges on side {side!r} do not partition [0, 1]")
    return SideTrace(side, t0, t1, idx)


def write_mesh(mesh: Mesh2D) -> str:
    k = mesh.elements.shape[1]
    lines = [f"MESH1 {mesh.n_vertices} {mesh.n_elements} {len(mesh.boundary_edges)}"]
    lines += [f"v {x:.17g} {y:.17g}" for x, y in mesh.vertices.tolist()]
    lines += [f"e {k} " + " ".join(map(str, e)) for e in mesh.elements.tolist()]
    lines += [f"b {a} {b} {_CODE[attr]}" for (a, b), attr in zip(mesh.boundary_edges.tolist(), mesh.boundary_attrs)]
    return "\n".join(lines) + "\n"


def parse_mesh(text: str) -> Mesh2D:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MeshFormatError("empty mesh file", 1)
    head = lines[0].split()
    if len(head) != 4 or head[0] != "MESH1":
        raise MeshFormatError("malformed header", 1)
    try:
        nv, ne, nb = (int(x) for x in head[1:])
    except ValueError:
        raise MeshFormatError("malformed header", 1) from None
    if min(nv, ne, nb) < 0 or len(lines) != 1 + nv + ne + nb:
        raise MeshFormatError("record count does not match header", 1)

    vertices = np.empty((nv, 2))
    for i in range(nv):
        ln = i + 2
        tok = lines[ln - 1].split()
        if len(tok) != 3 or tok[0] != "v":
            raise MeshFormatError("malformed vertex record", ln)
        try:
            vertices[i] = float(tok[1]), float(tok[2])
        except ValueError:
            raise MeshFormatError("malformed vertex coordinate", ln) from None

    elements = []
    k_mesh = None
    for i in range(ne):
        ln = nv + i + 2
        tok = lines[ln - 1].split()
        if len(tok) < 2 or tok[0] != "e":
            raise MeshFormatError("malformed element record", ln)
        try:
            k = int(tok[1])
            idx = [int(x) for x in tok[2:]]
        except ValueError:
            raise MeshFormatError("malformed element record", ln) from None
        if k not in (3, 4) or len(idx) != k:
            raise MeshFormatError("element must list 3 or 4 vertices", ln)
        if k_mesh is None:
            k_mesh = k
        elif k != k_mesh:
            raise MeshFormatError("mixed element shapes are not supported", ln)
        if min(idx) < 0 or max(idx) >= nv:
            raise MeshFormatError("vertex index out of range", ln)
        xy = vertices[idx]
        area = 0.5 * np.sum(xy[:, 0] * np.roll(xy[:, 1], -1) - np.roll(xy[:, 0], -1) * xy[:, 1])
        if area <= 0.0:
            raise MeshFormatError("element is not counter-clockwise", ln)
        elements.append(idx)

    edges, attrs = [], []
    for i in range(nb):
        ln = nv + ne + i + 2
        tok = lines[ln - 1].split()
        if len(tok) != 4 or tok[0] != "b":
            raise MeshFormatError("malformed boundary record", ln)
        try:
            a, b = int(tok[1]), int(tok[2])
        except ValueError:
            raise MeshFormatError("malformed boundary record", ln) from None
        if min(a, b) < 0 or max(a, b) >= nv:
            raise MeshFormatError("vertex index out of range", ln)
        if tok[3] not in _ATTR:
            raise MeshFormatError(f"unknown boundary attribute {tok[3]!r}", ln)
        edges.append((a, b))
        attrs.append(_ATTR[tok[3]])

    if k_mesh is None:
        raise MeshFormatError("mesh has no elements", 1)
    mesh = Mesh2D(vertices, np.array(elements).reshape(-1, k_mesh), np.array(edges).reshape(-1, 2), attrs)
    owner, _ = mesh.boundary_owner
    bad = np.flatnonzero(owner < 0)
    if len(bad):
        raise MeshFormatError("dangling boundary edge", nv + ne + int(bad[0]) + 2)
    return mesh
