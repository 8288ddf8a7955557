"""Text persistence for matrices, POD bases and reduced block libraries.

Formats
-------
``MAT1 <rows> <cols>`` followed by one line of values per row (dense), or
``CSR1 <rows> <cols> <nnz>`` followed by three lines: row pointers, column
indices and values.  ``POD1 <ref> <N> <R> <S> <seed>`` starts a basis file;
an ``index,sigma`` CSV block and a MAT1 payload for ``Phi`` follow.  Floats
are written with 17 significant digits so files round-trip exactly.
"""

from __future__ import annotations

import configparser
import io
import re
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import dgdd
from .mesh import SIDES, parse_mesh, write_mesh

_NAME = re.compile(r"^[A-Za-z0-9-]+$")


class FormatError(ValueError):
    pass


def _fmt(values) -> str:
    return " ".join("%.17g" % v for v in np.ravel(values))


def write_matrix(A) -> str:
    if sp.issparse(A):
        A = sp.csr_matrix(A)
        A.sort_indices()
        return "\n".join(
            [f"CSR1 {A.shape[0]} {A.shape[1]} {A.nnz}", " ".join(map(str, A.indptr)), " ".join(map(str, A.indices)), _fmt(A.data)]
        ) + "\n"
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return "\n".join([f"MAT1 {A.shape[0]} {A.shape[1]}"] + [_fmt(row) for row in A]) + "\n"


def _read_matrix_lines(lines: list, pos: int = 0):
    head = lines[pos].split()
    if not head or head[0] not in ("MAT1", "CSR1"):
        raise FormatError(f"expected MAT1 or CSR1 header, line {pos + 1}")
    if head[0] == "MAT1":
        rows, cols = int(head[1]), int(head[2])
        data = [np.array(lines[pos + 1 + i].split(), dtype=float) for i in range(rows)]
        A = np.array(data).reshape(rows, cols) if rows else np.zeros((0, cols))
        return A, pos + 1 + rows
    rows, cols, nnz = int(head[1]), int(head[2]), int(head[3])
    indptr = np.array(lines[pos + 1].split(), dtype=np.int64)
    indices = np.array(lines[pos + 2].split(), dtype=np.int64)
    data = np.array(lines[pos + 3].split(), dtype=float)
    if len(indptr) != rows + 1 or len(indices) != nnz or len(data) != nnz:
        raise FormatError(f"CSR1 array lengths do not match header, line {pos + 1}")
    return sp.csr_matrix((data, indices, indptr), shape=(rows, cols)), pos + 4


def read_matrix(text: str):
    return _read_matrix_lines(text.splitlines())[0]


def write_basis(basis) -> str:
    N, R = basis.Phi.shape
    out = [f"POD1 {basis.ref} {N} {R} {basis.n_samples} {basis.seed}", "index,sigma"]
    out += ["%d,%.17g" % (i + 1, s) for i, s in enumerate(basis.sigma)]
    return "\n".join(out) + "\n" + write_matrix(basis.Phi)


def read_basis(text: str):
    from .rom import PodBasis

    lines = text.splitlines()
    head = lines[0].split()
    if len(head) != 6 or head[0] != "POD1":
        raise FormatError("malformed POD1 header, line 1")
    ref, N, R, S, seed = head[1], int(head[2]), int(head[3]), int(head[4]), int(head[5])
    if lines[1].strip() != "index,sigma":
        raise FormatError("missing singular value block, line 2")
    pos, sigma = 2, []
    while not lines[pos].startswith("MAT1"):
        sigma.append(float(lines[pos].split(",")[1]))
        pos += 1
    Phi, _ = _read_matrix_lines(lines, pos)
    if Phi.shape != (N, R):
        raise FormatError("basis payload does not match header")
    return PodBasis(ref, Phi, np.array(sigma), S, seed)


def sigma_csv(sigma) -> str:
    return "index,sigma\n" + "".join("%d,%.17g\n" % (i + 1, s) for i, s in enumerate(sigma))


# --- block library -------------------------------------------------------------


def save_library(lib, directory) -> list:
    """Write every block, basis and reference mesh of ``lib``; returns the written paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        path = d / name
        path.write_text(text)
        written.append(path)

    for r in sorted(lib.bases):
        if not _NAME.match(r):
            raise FormatError(f"reference name {r!r} is not file-safe")
        put(f"pod_{r}.pod", write_basis(lib.bases[r]))
        put(f"mesh_{r}.mesh", write_mesh(lib.components[r].mesh))
        put(f"dom_{r}.mat", write_matrix(lib.dom[r]))
        for side in SIDES:
            put(f"bnd_{r}_{side}.mat", write_matrix(lib.bnd[r, side]))
    for (r, rp, axis), C in sorted(lib.ifc.items()):
        put(f"ifc_{r}_{rp}_{axis}.mat", write_matrix(C))
    meta = configparser.ConfigParser()
    meta["library"] = {
        "physics": lib.physics,
        "gamma": "%.17g" % lib.gamma,
        "nu": "%.17g" % lib.nu,
        "references": " ".join(sorted(lib.bases)),
    }
    buf = io.StringIO()
    meta.write(buf)
    put("library.ini", buf.getvalue())
    return written


def load_library(directory):
    from .rom import ReducedBlockLibrary

    d = Path(directory)
    if not (d / "library.ini").exists():
        raise FileNotFoundError(f"no block library in {d}")
    meta = configparser.ConfigParser()
    meta.read(d / "library.ini")
    sec = meta["library"]
    kind = sec["physics"]
    refs = sec["references"].split()
    comps, bases, dom, bnd, ifc = {}, {}, {}, {}, {}
    for r in refs:
        comps[r] = dgdd.make_component(r, parse_mesh((d / f"mesh_{r}.mesh").read_text()), kind)
        bases[r] = read_basis((d / f"pod_{r}.pod").read_text())
        dom[r] = read_matrix((d / f"dom_{r}.mat").read_text())
        for side in SIDES:
            bnd[r, side] = read_matrix((d / f"bnd_{r}_{side}.mat").read_text())
    for r in refs:
        for rp in refs:
            for axis in ("H", "V"):
                ifc[r, rp, axis] = read_matrix((d / f"ifc_{r}_{rp}_{axis}.mat").read_text())
    lib = ReducedBlockLibrary(kind, float(sec["gamma"]), float(sec["nu"]), comps, bases, dom, bnd, ifc)
    if kind == dgdd.STOKES:
        lib.weights = {r: bases[r].Phi.T @ comps[r].pressure_weights for r in refs}
    return lib
