"""Smoke test for the Python extension.

Build and install first, for example:
    pip install maturin
    maturin develop -m crates/gsvd-iter-py/Cargo.toml
"""

import math

import numpy as np

import gsvd_iter_py as g


def main():
    pair, exact = g.gen_example("1", 80, seed=0)
    res = g.solve(pair, which="largest", count=2, tol=1e-8)
    assert res.converged
    for got, (c, s) in zip(res.sigma, exact[:2]):
        assert math.isclose(got, c / s, rel_tol=1e-7), (got, c / s)

    a = np.array(pair.a_dense())
    b = np.array(pair.b_dense())
    x = np.array(res.x[0])
    lhs = res.s[0] ** 2 * (a.T @ (a @ x))
    rhs = res.c[0] ** 2 * (b.T @ (b @ x))
    assert np.linalg.norm(lhs - rhs) <= 1e-6 * np.linalg.norm(lhs)

    c, s, _ = g.dense_gsvd(g.MatrixPair.from_dense(np.diag([4.0, 3.0, 2.0, 1.0]).tolist(), np.eye(4).tolist()))
    assert math.isclose(c[0] / s[0], 4.0, rel_tol=1e-12)

    report = g.tikhonov("baart", n=64, pairs=8)
    assert report["sin_x2"] < 1e-3
    print("smoke test passed:", res.sigma, report["mv_count"])


if __name__ == "__main__":
    main()
