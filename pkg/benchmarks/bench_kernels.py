"""Compiled vs scipy-fallback symmetric Gauss-Seidel, alone and as a CG preconditioner.

Run with ``python3 benchmarks/bench_kernels.py [--sizes 32 64 128] [--repeat 5]``.
"""

import argparse
import timeit

import numpy as np

from romdd import fem, kernels, linalg, mesh


def laplacian(n):
    V = fem.scalar_space(mesh.gen_quad_grid(n), 1)
    # a small mass shift keeps the pure-Neumann stiffness definite
    return (fem.assemble_stiffness(V) + 1e-3 * fem.assemble_mass(V)).tocsr()


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    backends = ["python"] + (["cython"] if kernels._kernels is not None else [])
    if len(backends) == 1:
        print("compiled kernels not built; timing the fallback only")
    print(f"{'n':>5} {'dofs':>7} {'backend':>8} {'sweep ms':>10} {'cg its':>7} {'cg ms':>9}")
    for n in args.sizes:
        A = laplacian(n)
        b = np.random.default_rng(0).standard_normal(A.shape[0])
        ref = None
        for be in backends:
            P = kernels.SymmetricGaussSeidel(A, backend=be)
            z = P(b)
            if ref is None:
                ref = z
            elif not np.allclose(z, ref, rtol=1e-10, atol=1e-12):
                raise SystemExit(f"backend {be} disagrees with the fallback")
            sweep = min(timeit.repeat(lambda: P(b), number=1, repeat=args.repeat))
            t = timeit.default_timer()
            _, rep = linalg.cg_solve(A, b, tol=1e-8, preconditioner=P)
            cg = timeit.default_timer() - t
            print(f"{n:>5} {A.shape[0]:>7} {be:>8} {1e3 * sweep:>10.3f} {rep.iterations:>7} {1e3 * cg:>9.1f}")


if __name__ == "__main__":
    main()
