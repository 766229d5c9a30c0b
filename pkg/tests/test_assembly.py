import numpy as np
import pytest
import scipy.sparse

from igakron.assembly import (
    assemble_load,
    assemble_pencil_1d,
    assemble_stiffness,
    condition_bound,
    gauss_points_on_intervals,
    gauss_rule,
    quadrature_grid,
    l2_error,
    write_matrix_market,
)
from igakron.bspline import SplineSpace1D
from igakron.geometry import builtin, identity_coefficient, identity_map
from igakron.kron import KroneckerSum


def spaces_2d(p, q):
    return [SplineSpace1D.uniform(p, q), SplineSpace1D.uniform(p, q)]


def test_gauss_midpoint_rule():
    pts, wts = gauss_points_on_intervals([0.0, 1.0], 1)
    np.testing.assert_allclose(pts, [[0.5]])
    np.testing.assert_allclose(wts, [[1.0]])


def test_gauss_two_point_nodes():
    pts, _ = gauss_points_on_intervals([0.0, 1.0], 2)
    d = 1.0 / (2 * np.sqrt(3.0))
    np.testing.assert_allclose(np.sort(pts[0]), [0.5 - d, 0.5 + d], rtol=1e-14)


def test_gauss_cubic_exactness():
    pts, wts = gauss_points_on_intervals([0.0, 1.0], 2)
    val = float(np.sum(wts * pts**3))
    assert abs(val - 0.25) < 1e-15


def test_gauss_rule_properties():
    s = SplineSpace1D.uniform(3, 5)
    rule = gauss_rule(s, 4)
    assert rule.num_elements == 5
    assert (rule.weights > 0).all()
    breaks = s.kv.breakpoints()
    for e in range(rule.num_elements):
        assert (rule.points[e] > breaks[e]).all() and (rule.points[e] < breaks[e + 1]).all()


def test_pencil_p1_uniform_rows():
    q = 8
    h = 1.0 / q
    s = SplineSpace1D.uniform(1, q)
    K, M = assemble_pencil_1d(s)
    Kd, Md = K.toarray(), M.toarray()
    n = s.n
    for i in range(1, n - 1):
        np.testing.assert_allclose(Md[i, i - 1 : i + 2], [h / 6, 2 * h / 3, h / 6], rtol=1e-12)
        np.testing.assert_allclose(Kd[i, i - 1 : i + 2], [-1 / h, 2 / h, -1 / h], rtol=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_pencil_spd_and_rowsums(p):
    s = SplineSpace1D.uniform(p, 9)
    K, M = assemble_pencil_1d(s)
    for B in (K, M):
        ev = np.linalg.eigvalsh(B.toarray())
        assert ev.min() > 0
    # the constant lies in the full space: K * 1 has nonzeros only within the
    # first/last p rows (where the removed boundary functions overlapped)
    ones = np.ones(s.n)
    r = K.toarray() @ ones
    assert np.abs(r[p : s.n - p]).max() < 1e-12
    assert np.abs(r[:p]).max() > 1e-8


def kron_sum_dense(K1, M1, K2, M2):
    return np.kron(K1.toarray(), M2.toarray()) + np.kron(M1.toarray(), K2.toarray())


@pytest.mark.parametrize("p,q", [(1, 6), (2, 6), (3, 5), (4, 5)])
def test_identity_geometry_collapses_to_kronecker_sum_2d(p, q):
    sp = spaces_2d(p, q)
    A = assemble_stiffness(sp, identity_map(2)).toarray()
    K1, M1 = assemble_pencil_1d(sp[0])
    K2, M2 = assemble_pencil_1d(sp[1])
    P = kron_sum_dense(K1, M1, K2, M2)
    np.testing.assert_allclose(A, P, rtol=1e-10, atol=1e-12 * np.abs(P).max())


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_identity_geometry_collapses_to_kronecker_sum_3d(p):
    sp = [SplineSpace1D.uniform(p, 4) for _ in range(3)]
    A = assemble_stiffness(sp, identity_map(3)).toarray()
    pencils = [assemble_pencil_1d(s) for s in sp]
    P = KroneckerSum(pencils).toarray()
    np.testing.assert_allclose(A, P, rtol=1e-10, atol=1e-12 * np.abs(P).max())


def test_stiffness_symmetric_and_spd_small():
    sp = spaces_2d(2, 5)
    A = assemble_stiffness(sp, builtin("quarter_annulus"))
    Ad = A.toarray()
    np.testing.assert_allclose(Ad, Ad.T, atol=1e-12 * np.abs(Ad).max())
    assert np.linalg.eigvalsh(Ad).min() > 0


def test_stiffness_nnz_bound():
    p, q = 2, 8
    sp = spaces_2d(p, q)
    A = assemble_stiffness(sp, builtin("quarter_annulus"))
    N = A.shape[0]
    assert A.nnz <= (2 * p + 1) ** 2 * N
    # equality order on finer meshes: boundary truncation becomes negligible
    sp = spaces_2d(p, 64)
    A = assemble_stiffness(sp, builtin("quarter_annulus"))
    assert A.nnz >= 0.8 * (2 * p + 1) ** 2 * A.shape[0]


def test_pattern_identity_with_kronecker_sum():
    sp = spaces_2d(3, 6)
    A = assemble_stiffness(sp, builtin("quarter_annulus"))
    P = assemble_stiffness(sp, identity_map(2))
    A.sort_indices()
    P.sort_indices()
    assert np.array_equal(A.indptr, P.indptr)
    assert np.array_equal(A.indices, P.indices)


def test_load_zero_and_linearity():
    sp = spaces_2d(2, 5)
    geo = builtin("quarter_annulus")
    zero = assemble_load(sp, geo, lambda x: np.zeros(len(x)))
    np.testing.assert_allclose(zero, 0.0)
    f = lambda x: x[:, 0] + 2.0 * x[:, 1]
    b1 = assemble_load(sp, geo, f)
    b2 = assemble_load(sp, geo, lambda x: 2.0 * f(x))
    np.testing.assert_allclose(b2, 2.0 * b1, rtol=1e-13)


def manufactured_f(x):
    return 2.0 * (x[:, 0] ** 2 - x[:, 0]) + 2.0 * (x[:, 1] ** 2 - x[:, 1])


def manufactured_u(x):
    return -(x[:, 0] ** 2 - x[:, 0]) * (x[:, 1] ** 2 - x[:, 1])


def test_manufactured_solution_rate_p1():
    geo = identity_map(2)
    errs = []
    for q in (8, 16, 32):
        sp = spaces_2d(1, q)
        A = assemble_stiffness(sp, geo)
        b = assemble_load(sp, geo, manufactured_f)
        u = scipy.sparse.linalg.spsolve(A.tocsc(), b)
        errs.append(l2_error(sp, geo, u, manufactured_u))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(rates - 2.0) < 0.3)


def test_manufactured_solution_exact_for_p2():
    # the manufactured solution is a tensor quadratic, hence lies in the
    # spline space for p >= 2: the Galerkin solution reproduces it to roundoff
    geo = identity_map(2)
    sp = spaces_2d(2, 8)
    A = assemble_stiffness(sp, geo)
    b = assemble_load(sp, geo, manufactured_f)
    u = scipy.sparse.linalg.spsolve(A.tocsc(), b)
    assert l2_error(sp, geo, u, manufactured_u) < 1e-12


def test_condition_bound_identity_and_annulus():
    _, z, _ = quadrature_grid(spaces_2d(2, 8))
    cb = condition_bound(identity_map(2), identity_coefficient(2), z)
    assert not cb.singular and abs(cb.bound - 1.0) < 1e-10
    cb2 = condition_bound(builtin("quarter_annulus"), identity_coefficient(2), z)
    assert abs(cb2.bound - np.pi**2) < 0.05 * np.pi**2


def test_condition_bound_singular_domain():
    _, z, _ = quadrature_grid(spaces_2d(2, 6))
    z = np.vstack([z, [[0.5, 1.0]]])  # force a point on the collapsed edge
    cb = condition_bound(builtin("collapsed_triangle"), identity_coefficient(2), z)
    assert cb.singular and np.isinf(cb.bound)


def test_matrix_market_roundtrip(tmp_path):
    sp = spaces_2d(2, 4)
    A = assemble_stiffness(sp, builtin("quarter_annulus"))
    path = tmp_path / "A.mtx"
    write_matrix_market(A, path)
    B = scipy.io.mmread(path).tocsr()
    assert (A != B).nnz == 0
    b = assemble_load(sp, builtin("quarter_annulus"), manufactured_f)
    path_b = tmp_path / "b.mtx"
    write_matrix_market(b, path_b)
    b2 = scipy.io.mmread(path_b).ravel()
    np.testing.assert_array_equal(b, b2)
