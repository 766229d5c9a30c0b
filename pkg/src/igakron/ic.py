"""Zero-fill incomplete Cholesky baseline with reverse Cuthill-McKee reordering.

The factor keeps exactly the lower-triangle pattern of the (permuted) matrix.
A nonpositive pivot restarts the factorization on A + sigma*diag(A) with
sigma = 1e-3, doubling up to ten times before giving up.
"""

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph
import scipy.sparse.linalg

__all__ = ["ICFactor", "ICBreakdownError", "ic0_setup", "ic_apply"]


class ICBreakdownError(RuntimeError):
    """Raised when shifted restarts cannot produce positive pivots."""


class ICFactor:
    """Incomplete Cholesky data: permutation and sparse triangular factor.

    Attributes:
        perm: the (reverse Cuthill-McKee or identity) permutation applied
        L: CSR lower-triangular factor with pattern(L) = pattern(tril(P A P^T))
        shift: the diagonal shift that was needed (0.0 normally)
    """

    def __init__(self, perm, L, shift):
        self.perm = np.asarray(perm)
        self.L = L
        self.shift = shift
        self._lu = scipy.sparse.linalg.splu(L.tocsc())
        self.n = L.shape[0]

    def apply(self, r):
        y = np.asarray(r, dtype=float)[self.perm]
        z = self._lu.solve(y)
        w = self._lu.solve(z, trans="T")
        out = np.empty_like(w)
        out[self.perm] = w
        return out

    __call__ = apply


class _Breakdown(Exception):
    pass


def _bandwidth(A):
    C = A.tocoo()
    return int(np.abs(C.row - C.col).max()) if C.nnz else 0


def _ic0_lower(Ap):
    """IC(0) on the lower-triangle pattern of the CSR matrix Ap."""
    n = Ap.shape[0]
    low = scipy.sparse.tril(Ap, format="csr")
    low.sort_indices()
    indptr, cols, avals = low.indptr, low.indices, low.data
    lvals = np.zeros_like(avals)
    row_cols = [cols[indptr[i] : indptr[i + 1]] for i in range(n)]
    row_vals = [lvals[indptr[i] : indptr[i + 1]] for i in range(n)]
    row_a = [avals[indptr[i] : indptr[i + 1]] for i in range(n)]
    diag = np.zeros(n)
    for i in range(n):
        ci, vi, ai = row_cols[i], row_vals[i], row_a[i]
        if ci[-1] != i:
            raise ValueError("matrix has a structurally zero diagonal entry")
        for t in range(len(ci) - 1):
            j = ci[t]
            cj, vj = row_cols[j], row_vals[j]
            common, ti, tj = np.intersect1d(ci[:t], cj[:-1], assume_unique=True, return_indices=True)
            s = ai[t] - (vi[ti] @ vj[tj] if common.size else 0.0)
            vi[t] = s / diag[j]
        pivot = ai[-1] - float(vi[:-1] @ vi[:-1])
        if pivot <= 0.0:
            raise _Breakdown
        diag[i] = np.sqrt(pivot)
        vi[-1] = diag[i]
    return scipy.sparse.csr_matrix((lvals, cols, indptr), shape=(n, n))


def ic0_setup(A, reorder="rcm"):
    """IC(0) factorization of A, optionally after RCM reordering.

    Args:
        A: SPD matrix in CSR format
        reorder: "rcm" or "none"

    Returns:
        ICFactor
    """
    A = A.tocsr()
    n = A.shape[0]
    if reorder == "rcm":
        perm = np.asarray(scipy.sparse.csgraph.reverse_cuthill_mckee(A, symmetric_mode=True))
    elif reorder == "none":
        perm = np.arange(n)
    else:
        raise ValueError("unknown reordering %r" % reorder)
    Ap = A[perm][:, perm].tocsr()
    Ap.sort_indices()
    d = Ap.diagonal()
    sigma = 0.0
    for attempt in range(11):
        try:
            shifted = Ap if sigma == 0.0 else (Ap + scipy.sparse.diags(sigma * d)).tocsr()
            L = _ic0_lower(shifted)
            return ICFactor(perm, L, sigma)
        except _Breakdown:
            sigma = 1e-3 if sigma == 0.0 else 2.0 * sigma
    raise ICBreakdownError("incomplete Cholesky broke down even with shift %g" % sigma)


def ic_apply(factor, r):
    """Solve the incomplete factorization against r (symmetric operator)."""
    return factor.apply(r)
