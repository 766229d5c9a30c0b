"""Geometry maps, diffusion coefficients and the benchmark domains.

All maps are analytic closed forms: assembly only ever needs point values and
Jacobians, so carrying control nets around would buy nothing.  Evaluation is
batched: ``evaluate`` and ``jacobian`` take an (N, d) array of parametric
points and return (N, d) and (N, d, d) arrays.
"""

import enum

import numpy as np

__all__ = [
    "GeometryMap",
    "CoefficientField",
    "BuiltinDomain",
    "SingularJacobianError",
    "builtin",
    "identity_map",
    "affine_map",
    "identity_coefficient",
    "eval_Q",
    "eval_Q_masked",
]

SINGULAR_TOL = 1e-14


class SingularJacobianError(ArithmeticError):
    """Raised when the geometry Jacobian is (numerically) singular."""


class GeometryMap:
    """A parametrization F of the computational domain.

    Attributes:
        dim: spatial dimension (2 or 3)
        evaluate: callable, (N, dim) parametric points -> (N, dim) physical points
        jacobian: callable, (N, dim) parametric points -> (N, dim, dim) Jacobians
    """

    def __init__(self, dim, evaluate, jacobian, name="custom"):
        self.dim = dim
        self.evaluate = evaluate
        self.jacobian = jacobian
        self.name = name

    def __repr__(self):
        return "GeometryMap(%s, dim=%d)" % (self.name, self.dim)


class CoefficientField:
    """Symmetric positive definite diffusion coefficient K(x).

    Attributes:
        evaluate: callable, (N, d) physical points -> (N, d, d) SPD matrices
    """

    def __init__(self, evaluate):
        self.evaluate = evaluate


def identity_coefficient(dim):
    def evaluate(x):
        x = np.asarray(x)
        K = np.zeros((x.shape[0], dim, dim))
        idx = np.arange(dim)
        K[:, idx, idx] = 1.0
        return K

    return CoefficientField(evaluate)


def identity_map(dim):
    def evaluate(z):
        return np.array(z, dtype=float, copy=True)

    def jacobian(z):
        z = np.asarray(z)
        J = np.zeros((z.shape[0], dim, dim))
        idx = np.arange(dim)
        J[:, idx, idx] = 1.0
        return J

    return GeometryMap(dim, evaluate, jacobian, name="identity")


def affine_map(A, t, name="affine"):
    """The map F(z) = A z + t with constant matrix A and offset t."""
    A = np.asarray(A, dtype=float)
    t = np.asarray(t, dtype=float)
    dim = A.shape[0]

    def evaluate(z):
        return np.asarray(z) @ A.T + t

    def jacobian(z):
        z = np.asarray(z)
        return np.broadcast_to(A, (z.shape[0], dim, dim)).copy()

    return GeometryMap(dim, evaluate, jacobian, name=name)


def _quarter_annulus_xy(z1, z2):
    # radii [1, 2]; angle sweeps a quarter turn
    r = 1.0 + z1
    th = 0.5 * np.pi * z2
    return r * np.cos(th), r * np.sin(th), r, th


def _quarter_annulus():
    def evaluate(z):
        z = np.asarray(z)
        x, y, _, _ = _quarter_annulus_xy(z[:, 0], z[:, 1])
        return np.column_stack((x, y))

    def jacobian(z):
        z = np.asarray(z)
        _, _, r, th = _quarter_annulus_xy(z[:, 0], z[:, 1])
        c, s = np.cos(th), np.sin(th)
        J = np.empty((z.shape[0], 2, 2))
        J[:, 0, 0] = c
        J[:, 0, 1] = -0.5 * np.pi * r * s
        J[:, 1, 0] = s
        J[:, 1, 1] = 0.5 * np.pi * r * c
        return J

    return GeometryMap(2, evaluate, jacobian, name="quarter_annulus")


_STRETCH_ALPHA = 2.0


def _stretch(t):
    return np.expm1(_STRETCH_ALPHA * t) / np.expm1(_STRETCH_ALPHA)


def _stretch_deriv(t):
    return _STRETCH_ALPHA * np.exp(_STRETCH_ALPHA * t) / np.expm1(_STRETCH_ALPHA)


def _stretched_square():
    def evaluate(z):
        z = np.asarray(z)
        return np.column_stack((_stretch(z[:, 0]), _stretch(z[:, 1])))

    def jacobian(z):
        z = np.asarray(z)
        J = np.zeros((z.shape[0], 2, 2))
        J[:, 0, 0] = _stretch_deriv(z[:, 0])
        J[:, 1, 1] = _stretch_deriv(z[:, 1])
        return J

    return GeometryMap(2, evaluate, jacobian, name="stretched_square")


def _collapsed_triangle():
    # the edge z2 = 1 collapses to the single point (0, 1): det J = 1 - z2
    def evaluate(z):
        z = np.asarray(z)
        return np.column_stack((z[:, 0] * (1.0 - z[:, 1]), z[:, 1]))

    def jacobian(z):
        z = np.asarray(z)
        J = np.zeros((z.shape[0], 2, 2))
        J[:, 0, 0] = 1.0 - z[:, 1]
        J[:, 0, 1] = -z[:, 0]
        J[:, 1, 1] = 1.0
        return J

    return GeometryMap(2, evaluate, jacobian, name="collapsed_triangle")


def _thick_quarter_ring():
    # quarter annulus cross-section, trivial third direction
    def evaluate(z):
        z = np.asarray(z)
        x, y, _, _ = _quarter_annulus_xy(z[:, 0], z[:, 1])
        return np.column_stack((x, y, z[:, 2]))

    def jacobian(z):
        z = np.asarray(z)
        _, _, r, th = _quarter_annulus_xy(z[:, 0], z[:, 1])
        c, s = np.cos(th), np.sin(th)
        J = np.zeros((z.shape[0], 3, 3))
        J[:, 0, 0] = c
        J[:, 0, 1] = -0.5 * np.pi * r * s
        J[:, 1, 0] = s
        J[:, 1, 1] = 0.5 * np.pi * r * c
        J[:, 2, 2] = 1.0
        return J

    return GeometryMap(3, evaluate, jacobian, name="thick_quarter_ring")


def _revolved_quarter_ring():
    # quarter-annulus cross-section revolved by a quarter turn about the line
    # through (-1, -1, -1) with direction (0, 1, 0); the sign of the rotation
    # is chosen so the map is orientation-preserving
    def _parts(z):
        x, y, r, th = _quarter_annulus_xy(z[:, 0], z[:, 1])
        beta = 0.5 * np.pi * z[:, 2]
        return x, y, r, th, beta, np.cos(beta), np.sin(beta)

    def evaluate(z):
        z = np.asarray(z)
        x, y, _, _, _, cb, sb = _parts(z)
        w = x + 1.0
        return np.column_stack((-1.0 + w * cb - sb, y, -1.0 + w * sb + cb))

    def jacobian(z):
        z = np.asarray(z)
        x, y, r, th, _, cb, sb = _parts(z)
        c, s = np.cos(th), np.sin(th)
        dx1, dx2 = c, -0.5 * np.pi * r * s
        dy1, dy2 = s, 0.5 * np.pi * r * c
        w = x + 1.0
        J = np.empty((z.shape[0], 3, 3))
        J[:, 0, 0] = dx1 * cb
        J[:, 0, 1] = dx2 * cb
        J[:, 0, 2] = 0.5 * np.pi * (-w * sb - cb)
        J[:, 1, 0] = dy1
        J[:, 1, 1] = dy2
        J[:, 1, 2] = 0.0
        J[:, 2, 0] = dx1 * sb
        J[:, 2, 1] = dx2 * sb
        J[:, 2, 2] = 0.5 * np.pi * (w * cb - sb)
        return J

    return GeometryMap(3, evaluate, jacobian, name="revolved_quarter_ring")


class BuiltinDomain(str, enum.Enum):
    UNIT_SQUARE = "unit_square"
    UNIT_CUBE = "unit_cube"
    QUARTER_ANNULUS = "quarter_annulus"
    STRETCHED_SQUARE = "stretched_square"
    COLLAPSED_TRIANGLE = "collapsed_triangle"
    THICK_QUARTER_RING = "thick_quarter_ring"
    REVOLVED_QUARTER_RING = "revolved_quarter_ring"


_BUILDERS = {
    BuiltinDomain.UNIT_SQUARE: lambda: identity_map(2),
    BuiltinDomain.UNIT_CUBE: lambda: identity_map(3),
    BuiltinDomain.QUARTER_ANNULUS: _quarter_annulus,
    BuiltinDomain.STRETCHED_SQUARE: _stretched_square,
    BuiltinDomain.COLLAPSED_TRIANGLE: _collapsed_triangle,
    BuiltinDomain.THICK_QUARTER_RING: _thick_quarter_ring,
    BuiltinDomain.REVOLVED_QUARTER_RING: _revolved_quarter_ring,
}


def builtin(domain):
    """Geometry map for one of the benchmark domains."""
    domain = BuiltinDomain(domain)
    return _BUILDERS[domain]()


def eval_Q_masked(geo, coeff, zeta):
    """The pulled-back diffusion tensor det(J) J^{-T} K J^{-1} at many points.

    Points where |det J| < SINGULAR_TOL are flagged in the returned mask and
    their Q is set to zero (the assembly policy is that such quadrature points
    contribute nothing).

    Returns:
        (Q, singular_mask) with shapes (N, d, d) and (N,).
    """
    zeta = np.asarray(zeta, dtype=float)
    J = geo.jacobian(zeta)
    det = np.linalg.det(J)
    singular = np.abs(det) < SINGULAR_TOL
    Jsafe = J.copy()
    if singular.any():
        Jsafe[singular] = np.eye(geo.dim)
    Jinv = np.linalg.inv(Jsafe)
    K = coeff.evaluate(geo.evaluate(zeta))
    Q = det[:, None, None] * np.einsum("nji,njk,nkl->nil", Jinv, K, Jinv)
    if singular.any():
        Q[singular] = 0.0
    return Q, singular


def eval_Q(geo, coeff, zeta):
    """As eval_Q_masked, but raises SingularJacobianError on singular points."""
    Q, singular = eval_Q_masked(geo, coeff, zeta)
    if singular.any():
        raise SingularJacobianError(
            "geometry Jacobian is singular at %d of %d sample points"
            % (int(singular.sum()), singular.size)
        )
    return Q
