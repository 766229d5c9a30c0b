"""Univariate B-spline bases on open knot vectors.

Basis values are computed by the Cox-DeBoor recursion (with the 0/0 = 0
convention); first derivatives use the standard knot-difference formula.
All evaluation routines are pure and the knot-vector objects are immutable
after construction, so they can be shared freely between threads.
"""

import numpy as np

__all__ = [
    "KnotVector",
    "SplineSpace1D",
    "uniform_knots",
    "find_span",
    "eval_basis",
    "eval_basis_derivs",
    "basis_tables",
]


class KnotVector:
    """An open knot vector on [0, 1] together with a spline degree.

    The first and last knots must each be repeated exactly p+1 times
    (open/clamped vector); interior knots may be repeated up to p times.

    Attributes:
        p (int): spline degree, >= 1
        knots (ndarray): the nondecreasing knot sequence, length m + p + 1
        m (int): dimension of the full spline space over this vector
    """

    def __init__(self, knots, p):
        knots = np.ascontiguousarray(knots, dtype=float)
        if p < 1:
            raise ValueError("spline degree must be >= 1")
        if knots.ndim != 1 or knots.size < 2 * (p + 1):
            raise ValueError("knot vector too short for degree %d" % p)
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be nondecreasing")
        if knots[0] < 0.0 or knots[-1] > 1.0:
            raise ValueError("knots must lie in [0, 1]")
        if not (np.all(knots[: p + 1] == knots[0]) and np.all(knots[-p - 1:] == knots[-1])):
            raise ValueError("knot vector is not open (end knots must repeat p+1 times)")
        if knots[0] != 0.0 or knots[-1] != 1.0:
            raise ValueError("open knot vector must span [0, 1]")
        m = knots.size - p - 1
        if m < p + 2:
            raise ValueError("need at least one interior basis function (m >= p+2)")
        # interior multiplicity at most p
        interior = knots[p + 1:m]
        if interior.size:
            _, counts = np.unique(interior, return_counts=True)
            if counts.max() > p:
                raise ValueError("interior knot multiplicity exceeds p")
        self.p = int(p)
        self.knots = knots
        self.knots.flags.writeable = False

    @property
    def m(self):
        """Dimension of the full (no boundary conditions) spline space."""
        return self.knots.size - self.p - 1

    def span_indices(self):
        """Indices i of the nonempty knot spans [knots[i], knots[i+1])."""
        k = self.knots
        return np.where(k[1:] != k[:-1])[0]

    def breakpoints(self):
        """Unique knots (the mesh underlying the spline space)."""
        return np.unique(self.knots)

    def __eq__(self, other):
        return (
            isinstance(other, KnotVector)
            and self.p == other.p
            and self.knots.size == other.knots.size
            and np.allclose(self.knots, other.knots, atol=1e-12, rtol=0.0)
        )

    def __repr__(self):
        return "KnotVector(p=%d, m=%d, %d spans)" % (self.p, self.m, len(self.span_indices()))


def uniform_knots(p, num_spans):
    """Open knot vector for mesh size h = 1/num_spans with single interior knots."""
    if num_spans < 2:
        raise ValueError("need at least 2 spans for an interior basis function")
    interior = np.arange(1, num_spans) / num_spans
    knots = np.concatenate((np.zeros(p + 1), interior, np.ones(p + 1)))
    return KnotVector(knots, p)


class SplineSpace1D:
    """Univariate spline space with homogeneous Dirichlet ends removed.

    The full basis over the knot vector has m functions; dropping the first
    and the last one (the only two that are nonzero at 0 and 1) leaves the
    n = m - 2 interior degrees of freedom.
    """

    def __init__(self, knot_vector):
        self.kv = knot_vector

    @classmethod
    def uniform(cls, p, num_spans):
        return cls(uniform_knots(p, num_spans))

    @property
    def p(self):
        return self.kv.p

    @property
    def m(self):
        return self.kv.m

    @property
    def n(self):
        """Number of interior dofs."""
        return self.kv.m - 2

    def __eq__(self, other):
        return isinstance(other, SplineSpace1D) and self.kv == other.kv

    def __repr__(self):
        return "SplineSpace1D(p=%d, n=%d)" % (self.p, self.n)


def find_span(kv, zeta):
    """Index i of the knot span with knots[i] <= zeta < knots[i+1].

    zeta = 1 is mapped to the last nonempty span, so basis values at the
    right endpoint are left limits.
    """
    if not 0.0 <= zeta <= 1.0:
        raise ValueError("evaluation point %r outside [0, 1]" % (zeta,))
    knots, m = kv.knots, kv.m
    i = int(np.searchsorted(knots, zeta, side="right")) - 1
    return min(i, m - 1)


def eval_basis(kv, zeta):
    """Values of the p+1 B-splines that are nonzero at zeta.

    Returns:
        (span, values): the knot span index and an array of length p+1 with
        the values of basis functions span-p ... span.
    """
    span = find_span(kv, zeta)
    return span, _basis_values(kv.knots, kv.p, span, zeta)


def _basis_values(knots, p, span, zeta):
    # triangular Cox-DeBoor scheme; denominators are nonzero on nonempty spans
    N = np.empty(p + 1)
    left = np.empty(p + 1)
    right = np.empty(p + 1)
    N[0] = 1.0
    for j in range(1, p + 1):
        left[j] = zeta - knots[span + 1 - j]
        right[j] = knots[span + j] - zeta
        saved = 0.0
        for r in range(j):
            tmp = N[r] / (right[r + 1] + left[j - r])
            N[r] = saved + right[r + 1] * tmp
            saved = left[j - r] * tmp
        N[j] = saved
    return N


def eval_basis_derivs(kv, zeta, order=1):
    """Values and first derivatives of the nonzero B-splines at zeta.

    Only order 0 (values) and 1 (values + first derivatives) are supported;
    the Galerkin forms assembled here never need higher derivatives.

    Returns:
        (span, values, derivs); derivs is None when order == 0.
    """
    if order not in (0, 1):
        raise ValueError("only derivative orders 0 and 1 are supported")
    span = find_span(kv, zeta)
    knots, p = kv.knots, kv.p
    values = _basis_values(knots, p, span, zeta)
    if order == 0:
        return span, values, None
    # first derivative from degree p-1 values:
    # B'_{i,p} = p * ( B_{i,p-1}/(t_{i+p}-t_i) - B_{i+1,p-1}/(t_{i+p+1}-t_{i+1}) )
    low = _basis_values(knots, p - 1, span, zeta) if p > 1 else np.ones(1)
    derivs = np.empty(p + 1)
    for r in range(p + 1):
        i = span - p + r
        term1 = 0.0
        if r > 0:
            den = knots[i + p] - knots[i]
            if den > 0.0:
                term1 = low[r - 1] / den
        term2 = 0.0
        if r < p:
            den = knots[i + p + 1] - knots[i + 1]
            if den > 0.0:
                term2 = low[r] / den
        derivs[r] = p * (term1 - term2)
    return span, values, derivs


def basis_tables(kv, points):
    """Tabulate nonzero basis values/derivatives at many points.

    Args:
        kv: knot vector
        points: 1D array of evaluation points in [0, 1]

    Returns:
        (spans, values, derivs) with shapes (npts,), (npts, p+1), (npts, p+1).
        Column r of row q belongs to basis function spans[q] - p + r.
    """
    points = np.asarray(points, dtype=float).ravel()
    npts = points.size
    spans = np.empty(npts, dtype=np.int64)
    values = np.empty((npts, kv.p + 1))
    derivs = np.empty((npts, kv.p + 1))
    for q, z in enumerate(points):
        s, v, d = eval_basis_derivs(kv, z, order=1)
        spans[q] = s
        values[q] = v
        derivs[q] = d
    return spans, values, derivs
