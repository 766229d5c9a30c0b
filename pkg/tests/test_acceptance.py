"""Acceptance suite.

One test per acceptance criterion, each printing a pass/fail line (collected
again in the terminal summary).  Desk scale: 2D up to 1/h = 256, 3D up to
1/h = 32; heavy assemblies are cached and shared between criteria.
"""

import functools

import numpy as np
import scipy.linalg

from _acceptance_log import report
from igakron.adi import (
    ADIPreconditioner,
    adi_solve_2d,
    adi_solve_3d,
    douglas_shifts_3d,
    greedy_shifts_3d,
    m_norm,
    wachspress_shifts,
)
from igakron.assembly import (
    assemble_load,
    assemble_pencil_1d,
    assemble_stiffness,
    condition_bound,
    quadrature_grid,
    l2_error,
)
from igakron.bspline import SplineSpace1D
from igakron.eigen import extreme_eigs, generalized_eig
from igakron.fd import fd_apply, fd_setup
from igakron.geometry import builtin, identity_coefficient, identity_map
from igakron.ic import ic0_setup
from igakron.kron import KroneckerSum
from igakron.multipatch import (
    assemble_multipatch_load,
    assemble_multipatch_stiffness,
    l_shape_domain,
    schwarz_setup,
)
from igakron.pcg import pcg


def f_poisson(d):
    def f(x):
        out = np.zeros(len(x))
        for k in range(d):
            out += 2.0 * (x[:, k] ** 2 - x[:, k])
        return out

    return f


@functools.lru_cache(maxsize=None)
def spaces_for(p, q, d):
    return tuple(SplineSpace1D.uniform(p, q) for _ in range(d))


@functools.lru_cache(maxsize=None)
def pencils_for(p, q, d):
    return tuple(assemble_pencil_1d(s) for s in spaces_for(p, q, d))


@functools.lru_cache(maxsize=None)
def fd_for(p, q, d):
    return fd_setup(KroneckerSum(list(pencils_for(p, q, d))))


@functools.lru_cache(maxsize=None)
def problem_for(domain, p, q):
    geo = builtin(domain)
    d = geo.dim
    spaces = spaces_for(p, q, d)
    A = assemble_stiffness(spaces, geo)
    b = assemble_load(spaces, geo, f_poisson(d))
    return A, b


@functools.lru_cache(maxsize=None)
def fd_iterations(domain, p, q, tol=1e-8):
    A, b = problem_for(domain, p, q)
    d = builtin(domain).dim
    res = pcg(A, fd_for(p, q, d), b, tol=tol, maxit=3000)
    assert res.converged
    return res.iterations


def dense_kappa(A, W):
    """Condition number of W A for dense SPD A and W (via symmetrization)."""
    S = scipy.linalg.sqrtm(W)
    S = np.real(S)
    ev = scipy.linalg.eigvalsh(S @ A @ S)
    return ev[-1] / ev[0]


def operator_to_dense(op, n):
    return np.column_stack([op.apply(e) for e in np.eye(n)])


# ---------------------------------------------------------------------------


def test_01_fd_exactness():
    """P * fd_apply(r) = r to 1e-8 for d in {2,3}, p in {1..6}, n in {8,32,64}."""
    worst = 0.0
    rng = np.random.default_rng(1)
    for d in (2, 3):
        for p in range(1, 7):
            for n in (8, 32, 64):
                q = n + 2 - p
                P = KroneckerSum(list(pencils_for(p, q, d)))
                prec = fd_setup(P)
                for _ in range(20):
                    r = rng.standard_normal(P.n)
                    s = fd_apply(prec, r)
                    err = np.linalg.norm(P.matvec(s) - r) / np.linalg.norm(r)
                    worst = max(worst, err)
    assert report("1", worst <= 1e-8, "max relative residual %.2e" % worst)


def test_02_identity_geometry_one_iteration():
    """On the square/cube the preconditioner equals the matrix: 1 CG iteration."""
    its = []
    for domain, p, q in (("unit_square", 3, 64), ("unit_cube", 2, 16)):
        A, b = problem_for(domain, p, q)
        d = builtin(domain).dim
        res = pcg(A, fd_for(p, q, d), b, tol=1e-8)
        its.append(res.iterations)
    ok = its == [1, 1]
    assert report("2", ok, "iterations %s" % its)


def test_03_adi_2d_count_and_error():
    """Square pencils at p=1, 1/h=512: planned J = 29 +- 1, final error <= 1e-8."""
    p, q = 1, 512
    pencils = list(pencils_for(p, q, 2))
    brackets = [extreme_eigs(K, M, iters=10, seed=0) for K, M in pencils]
    plan = wachspress_shifts(brackets[0][0], brackets[0][1], brackets[1][0], brackets[1][1], 1e-8)
    spaces = spaces_for(p, q, 2)
    b = assemble_load(spaces, identity_map(2), f_poisson(2))
    s_exact = fd_apply(fd_for(p, q, 2), b)
    s_adi = adi_solve_2d(pencils, b, plan)
    err = m_norm(pencils, s_adi - s_exact) / m_norm(pencils, s_exact)
    ok = abs(plan.J - 29) <= 1 and err <= 1e-8
    assert report("3", ok, "J = %d, M-norm error %.2e" % (plan.J, err))


QA_GRID = [(p, q) for p in (2, 3, 4, 5) for q in (64, 128, 256)]


def test_04_quarter_annulus_robustness():
    """FD-preconditioned counts in [20, 32], spread <= 2 across p at fixed h."""
    counts = {pq: fd_iterations("quarter_annulus", *pq) for pq in QA_GRID}
    in_band = all(20 <= c <= 32 for c in counts.values())
    spreads = []
    for q in (64, 128, 256):
        col = [counts[(p, q)] for p in (2, 3, 4, 5)]
        spreads.append(max(col) - min(col))
    ok = in_band and max(spreads) <= 2
    assert report("4", ok, "counts %s, per-h spreads %s" % (sorted(counts.values()), spreads))


def test_05_adi_preconditioned_parity():
    """ADI preconditioner at eps = 0.1: outer counts within +3 of FD, J in [4, 8]."""
    worst_gap = -99
    inners = []
    for p, q in QA_GRID:
        A, b = problem_for("quarter_annulus", p, q)
        prec = ADIPreconditioner.setup_2d(list(pencils_for(p, q, 2)), eps=0.1, seed=0)
        res = pcg(A, prec, b, tol=1e-8, maxit=3000)
        assert res.converged
        gap = res.iterations - fd_iterations("quarter_annulus", p, q)
        worst_gap = max(worst_gap, gap)
        inners.append(prec.inner_iterations)
    ok = worst_gap <= 3 and all(4 <= J <= 8 for J in inners)
    assert report("5", ok, "max outer gap %+d, inner J %s" % (worst_gap, sorted(set(inners))))


def test_06_adi_preconditioner_conditioning_bound():
    """kappa(P_J^{-1} A) <= (1+eps)/(1-eps) kappa(P^{-1} A), quarter annulus n=10."""
    ok = True
    details = []
    for p in (2, 3):
        q = 12 - p
        geo = builtin("quarter_annulus")
        spaces = spaces_for(p, q, 2)
        A = assemble_stiffness(spaces, geo).toarray()
        pencils = list(pencils_for(p, q, 2))
        P = KroneckerSum(pencils)
        kappa_exact = scipy.linalg.eigvalsh(A, P.toarray())
        kappa_exact = kappa_exact[-1] / kappa_exact[0]
        brackets = [(pe.D[0], pe.D[-1]) for pe in (generalized_eig(K, M) for K, M in pencils)]
        for eps in (0.5, 0.1, 0.01):
            prec = ADIPreconditioner.setup_2d(pencils, eps=eps, brackets=brackets)
            W = operator_to_dense(prec, P.n)
            kappa_J = dense_kappa(A, W)
            bound = (1 + eps) / (1 - eps) * kappa_exact
            ok = ok and kappa_J <= bound * (1 + 1e-9)
            details.append("p%d eps %.2f: %.3f <= %.3f" % (p, eps, kappa_J, bound))
    assert report("6", ok, "; ".join(details[:3]) + "; ...")


def test_07_condition_bound_inequality():
    """Dense kappa(P^{-1} A) <= a-priori bound; quarter annulus bound ~ pi^2."""
    ok = True
    details = []
    for domain in ("quarter_annulus", "stretched_square"):
        geo = builtin(domain)
        for p in (1, 2, 3):
            q = 14 - p
            spaces = spaces_for(p, q, 2)
            A = assemble_stiffness(spaces, geo).toarray()
            P = KroneckerSum(list(pencils_for(p, q, 2))).toarray()
            ev = scipy.linalg.eigvalsh(A, P)
            kappa = ev[-1] / ev[0]
            _, zeta, _ = quadrature_grid(spaces)
            cb = condition_bound(geo, identity_coefficient(2), zeta)
            ok = ok and kappa <= cb.bound * (1 + 1e-9)
            if domain == "quarter_annulus" and p == 2:
                ok = ok and abs(cb.bound - np.pi**2) <= 0.05 * np.pi**2
                details.append("annulus bound %.4f (pi^2 = %.4f)" % (cb.bound, np.pi**2))
    assert report("7", ok, "; ".join(details) or "bounds hold")


def test_08_singular_map_not_robust():
    """Collapsed-edge domain: iterations grow strictly in h and in p."""
    h_counts = [fd_iterations("collapsed_triangle", 2, q) for q in (32, 64, 128)]
    p_counts = [fd_iterations("collapsed_triangle", p, 64) for p in (2, 3, 4, 5)]
    ok = all(a < b for a, b in zip(h_counts, h_counts[1:])) and all(
        a < b for a, b in zip(p_counts, p_counts[1:])
    )
    assert report("8", ok, "h growth %s, p growth %s" % (h_counts, p_counts))


def test_09_adi_3d_counts():
    """Cube pencils p=1, 1/h=128: ladder J = 57 +- 6; greedy 10-20% smaller."""
    # the same univariate pencil serves all three directions of the cube
    K, M = assemble_pencil_1d(SplineSpace1D.uniform(1, 128))
    D = generalized_eig(K, M).D
    plan = douglas_shifts_3d(D[0], D[-1], 1e-8, eigs=[D, D, D])
    greedy = greedy_shifts_3d(D[0], D[-1], plan.J + 10, 1e-8, seed=0)
    reduction = 1.0 - greedy.J / plan.J
    ok = abs(plan.J - 57) <= 6 and 0.10 <= reduction <= 0.20

    # full solve at 1/h = 32 reaches the tolerance
    pencils = list(pencils_for(1, 32, 3))
    eigs = [generalized_eig(Kl, Ml).D for Kl, Ml in pencils]
    plan32 = douglas_shifts_3d(1.0, 1.0, 1e-8, eigs=eigs)
    rng = np.random.default_rng(9)
    P = KroneckerSum(pencils)
    x = rng.standard_normal(P.n)
    r = P.matvec(x)
    err = m_norm(pencils, adi_solve_3d(pencils, r, plan32) - x) / m_norm(pencils, x)
    ok = ok and err <= 1e-8
    assert report(
        "9",
        ok,
        "ladder J = %d, greedy J = %d (-%.0f%%), solve error %.1e"
        % (plan.J, greedy.J, 100 * reduction, err),
    )


def test_10_3d_geometry_robustness():
    """Thick ring counts in [22, 32]; revolved ring counts in [34, 50] at 1/h=32."""
    thick = [fd_iterations("thick_quarter_ring", p, 32) for p in (2, 3, 4)]
    rev = [fd_iterations("revolved_quarter_ring", p, 32) for p in (2, 3, 4)]
    ok = all(22 <= c <= 32 for c in thick) and all(34 <= c <= 50 for c in rev)
    assert report("10", ok, "thick %s, revolved %s" % (thick, rev))


@functools.lru_cache(maxsize=None)
def l_shape_problem(p, q):
    dom = l_shape_domain(p, q)
    A = assemble_multipatch_stiffness(dom)
    b = assemble_multipatch_load(dom, f_poisson(2))
    return dom, A, b


def test_11a_schwarz_exact():
    """Exact additive Schwarz: <= 4 outer iterations at 1/h in {64, 128}.

    Expected to fail: the additive operator's spectrum is {1, 2} plus a few
    splitting outliers (kappa ~ 3.1 measured densely), which CG at tolerance
    1e-8 cannot clear in 4 iterations; the measured 6-8 iterations are the
    honest behavior of the operator as specified.  See the decisions ledger.
    """
    counts = []
    for q in (64, 128):
        dom, A, b = l_shape_problem(2, q)
        prec = schwarz_setup(dom, A, mode="exact")
        res = pcg(A, prec, b, tol=1e-8, maxit=100)
        assert res.converged
        counts.append(res.iterations)
    ok = all(c <= 4 for c in counts)
    assert report("11a", ok, "exact-mode iterations %s (<= 4 required)" % counts)


def test_11b_schwarz_inexact():
    """Inexact (FD) Schwarz: 20 +- 4 iterations, constant +-3 across p and h."""
    counts = []
    for p in (1, 2, 3, 4, 5):
        for q in (32, 64, 128):
            dom, A, b = l_shape_problem(p, q)
            prec = schwarz_setup(dom, A, mode="fd")
            res = pcg(A, prec, b, tol=1e-8, maxit=100)
            assert res.converged
            counts.append(res.iterations)
    ok = all(abs(c - 20) <= 4 for c in counts) and (max(counts) - min(counts)) <= 3
    assert report("11b", ok, "counts in [%d, %d]" % (min(counts), max(counts)))


def test_12_ic_baseline_comparison():
    """FD-preconditioned counts beat IC(0) on the quarter annulus at 1/h=128."""
    ok = True
    details = []
    for p in (2, 3):
        A, b = problem_for("quarter_annulus", p, 128)
        fac = ic0_setup(A, reorder="rcm")
        res_ic = pcg(A, fac, b, tol=1e-8, maxit=3000)
        n_fd = fd_iterations("quarter_annulus", p, 128)
        ok = ok and res_ic.converged and n_fd < res_ic.iterations
        details.append("p%d: fd %d < ic %d" % (p, n_fd, res_ic.iterations))
    assert report("12", ok, "; ".join(details))


def test_13_oracle_equivalence():
    """FD, tight ADI and a dense direct solve agree to 1e-8 on P s = r."""
    rng = np.random.default_rng(13)
    worst = 0.0
    for d, p, q in ((2, 2, 14), (3, 2, 12)):
        pencils = list(pencils_for(p, q, d))
        P = KroneckerSum(pencils)
        prec = fd_setup(P)
        eigs = [generalized_eig(K, M).D for K, M in pencils]
        if d == 2:
            plan = wachspress_shifts(eigs[0][0], eigs[0][-1], eigs[1][0], eigs[1][-1], 1e-10)
            solve_adi = lambda r: adi_solve_2d(pencils, r, plan)
        else:
            plan = douglas_shifts_3d(1.0, 1.0, 1e-10, eigs=eigs)
            solve_adi = lambda r: adi_solve_3d(pencils, r, plan)
        Pd = P.toarray()
        for _ in range(5):
            r = rng.standard_normal(P.n)
            s_dense = np.linalg.solve(Pd, r)
            s_fd = fd_apply(prec, r)
            s_adi = solve_adi(r)
            scale = np.linalg.norm(s_dense)
            worst = max(
                worst,
                np.linalg.norm(s_fd - s_dense) / scale,
                np.linalg.norm(s_adi - s_dense) / scale,
                np.linalg.norm(s_adi - s_fd) / scale,
            )
    assert report("13", worst <= 1e-8, "max pairwise deviation %.2e" % worst)


def test_14_manufactured_convergence():
    """Unit square: L2 rate h^{p+1} for p=1; exact reproduction for p in {2,3}.

    The benchmark source term corresponds to a tensor-quadratic solution,
    which lies in the spline space for p >= 2: there the Galerkin solution
    reproduces it to roundoff (a floor of 1e-10 is asserted instead of a
    rate, which would be 0/0 on roundoff-level errors).
    """
    geo = identity_map(2)
    u_exact = lambda x: -((x[:, 0] ** 2 - x[:, 0]) * (x[:, 1] ** 2 - x[:, 1]))

    def solve_error(p, q):
        spaces = spaces_for(p, q, 2)
        b = assemble_load(spaces, geo, f_poisson(2))
        u = fd_apply(fd_for(p, q, 2), b)
        return l2_error(spaces, geo, u, u_exact)

    errs = [solve_error(1, q) for q in (8, 16, 32, 64)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = bool(np.all(np.abs(rates - 2.0) <= 0.3))
    floors = [solve_error(p, 16) for p in (2, 3)]
    ok = ok and all(e <= 1e-10 for e in floors)
    assert report(
        "14",
        ok,
        "p=1 rates %s; p=2,3 errors %s" % (np.round(rates, 3).tolist(), ["%.1e" % e for e in floors]),
    )
