"""Generalized symmetric-definite eigendecomposition and extreme-eigenvalue estimates.

For a pencil (K, M) with both matrices SPD, the decomposition K U = M U diag(D)
is normalized so that U^T M U = I, which also gives U^{-T} U^{-1} = M and
U^{-T} diag(D) U^{-1} = K.  This is exactly what LAPACK's divide-and-conquer
driver for the generalized symmetric problem computes (Cholesky reduction of M
followed by a symmetric eigensolve), so we use it directly.
"""

import numpy as np
import scipy.linalg

__all__ = ["PencilEigen", "generalized_eig", "extreme_eigs"]


class PencilEigen:
    """Eigendecomposition of an SPD pencil: K U = M U diag(D), U^T M U = I.

    Attributes:
        U: dense (n, n) eigenvector matrix, columns ordered by ascending D
        D: eigenvalues, ascending, all positive
    """

    def __init__(self, U, D):
        self.U = U
        self.D = D

    @property
    def n(self):
        return self.D.size


def _asdense(A):
    return A.toarray() if hasattr(A, "toarray") else np.asarray(A, dtype=float)


def generalized_eig(K, M):
    """Generalized eigendecomposition of the SPD pencil (K, M).

    Raises:
        scipy.linalg.LinAlgError: if M is not positive definite
        ValueError: if the computed spectrum is not strictly positive
    """
    Kd, Md = _asdense(K), _asdense(M)
    D, U = scipy.linalg.eigh(Kd, Md, driver="gvd")
    if D[0] <= 0.0:
        raise ValueError("pencil is not positive definite (min eigenvalue %g)" % D[0])
    return PencilEigen(U=U, D=D)


def extreme_eigs(K, M, iters=10, seed=0):
    """Bracket [a, b] of the spectrum of M^{-1} K by the power method.

    Runs ``iters`` steps of the direct power method (for the largest
    eigenvalue) and of the inverse power method (for the smallest), both via
    banded Cholesky solves, then widens the Rayleigh-quotient estimates by 5%
    so the bracket reliably encloses the true extremes.

    Returns:
        (a, b) with a <= b.
    """
    rng = np.random.default_rng(seed)
    n = K.n if hasattr(K, "n") else K.shape[0]
    Mc = M.cholesky()
    Kc = K.cholesky()

    def rayleigh(v):
        return float(v @ (K @ v)) / float(v @ (M @ v))

    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    for _ in range(iters):
        v = Mc.solve(K @ v)
        v /= np.linalg.norm(v)
    b_est = rayleigh(v)

    w = rng.standard_normal(n)
    w /= np.linalg.norm(w)
    for _ in range(iters):
        w = Kc.solve(M @ w)
        w /= np.linalg.norm(w)
    a_est = rayleigh(w)

    a = a_est / 1.05
    b = b_est * 1.05
    if a > b:
        a, b = b, a
    return a, b
