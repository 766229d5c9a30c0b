"""Symmetric banded matrices in upper band storage.

Storage follows the scipy/LAPACK upper-banded convention: for a matrix of
order n with bandwidth p, ``ab`` has shape (p+1, n) and
``ab[p + i - j, j] = A[i, j]`` for ``max(0, j-p) <= i <= j``; row p holds the
main diagonal.  This is directly consumable by ``scipy.linalg.cholesky_banded``
and by the BLAS kernel ``dsbmv``.
"""

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.linalg.blas import dsbmv

__all__ = ["BandedSymMatrix", "BandedCholesky", "DenseCholesky"]


class BandedSymMatrix:
    """Symmetric banded matrix of order n with bandwidth p."""

    def __init__(self, ab):
        ab = np.asarray(ab, dtype=float)
        if ab.ndim != 2:
            raise ValueError("band storage must be 2-dimensional")
        self.ab = ab

    @property
    def n(self):
        return self.ab.shape[1]

    @property
    def p(self):
        return self.ab.shape[0] - 1

    @property
    def shape(self):
        return (self.n, self.n)

    @classmethod
    def zeros(cls, n, p):
        return cls(np.zeros((p + 1, n)))

    @classmethod
    def from_dense(cls, A, bandwidth):
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        ab = np.zeros((bandwidth + 1, n))
        for k in range(bandwidth + 1):
            ab[bandwidth - k, k:] = np.diagonal(A, k)
        return cls(ab)

    def toarray(self):
        n, p = self.n, self.p
        A = np.zeros((n, n))
        for k in range(p + 1):
            d = self.ab[p - k, k:]
            A += np.diag(d, k)
            if k > 0:
                A += np.diag(d, -k)
        return A

    def to_csr(self):
        n, p = self.n, self.p
        diags = [self.ab[p - k, k:] if k >= 0 else self.ab[p + k, -k:] for k in range(-p, p + 1)]
        return scipy.sparse.diags(diags, np.arange(-p, p + 1), shape=(n, n)).tocsr()

    def diagonal(self):
        return self.ab[self.p]

    def combine(self, alpha, other):
        """Banded matrix self + alpha * other (bandwidths may differ)."""
        p = max(self.p, other.p)
        ab = np.zeros((p + 1, self.n))
        ab[p - self.p:] = self.ab
        ab[p - other.p:] += alpha * other.ab
        return BandedSymMatrix(ab)

    def matvec(self, x):
        return dsbmv(self.p, 1.0, self.ab, x)

    def matmat(self, B):
        """Product with a dense matrix of shape (n, k)."""
        n, p = self.n, self.p
        Y = self.ab[p][:, None] * B
        for k in range(1, p + 1):
            d = self.ab[p - k, k:][:, None]
            Y[: n - k] += d * B[k:]
            Y[k:] += d * B[: n - k]
        return Y

    def __matmul__(self, other):
        other = np.asarray(other)
        if other.ndim == 1:
            return self.matvec(other)
        return self.matmat(other)

    def cholesky(self):
        return BandedCholesky(self)


class BandedCholesky:
    """Cached banded Cholesky factorization of an SPD banded matrix."""

    def __init__(self, A):
        try:
            self.cb = scipy.linalg.cholesky_banded(A.ab, lower=False)
        except scipy.linalg.LinAlgError as err:
            raise scipy.linalg.LinAlgError(
                "banded Cholesky failed (matrix not positive definite): %s" % err
            ) from err
        self.n = A.n

    def solve(self, b):
        """Solve A x = b for one right-hand side or a matrix of them."""
        return scipy.linalg.cho_solve_banded((self.cb, False), b)

    __call__ = solve


class DenseCholesky:
    """Dense counterpart of BandedCholesky, for small oracle computations."""

    def __init__(self, A):
        A = A.toarray() if hasattr(A, "toarray") else np.asarray(A, dtype=float)
        self.c = scipy.linalg.cho_factor(A)
        self.n = A.shape[0]

    def solve(self, b):
        return scipy.linalg.cho_solve(self.c, b)

    __call__ = solve
