"""Closed-form potential with log boundary structure and its induced density.

The canonical potential sum_i l_i(x) log l_i(x) solves the degenerate
Monge-Ampere problem with a computable right-hand side: its induced
density h_G = (prod_i l_i) det(sum_i n_i n_i^t / l_i) extends continuously
to the closed polytope when the polytope is simple.  This module evaluates
the potential, the induced density (with a stable near-boundary route),
the vertex compatibility residual, the inclusion-exclusion boundary
extension, and weighted Hessians whose entries stay bounded at the
boundary.
"""

import itertools

import numpy as np
from scipy.special import xlogy

from .errors import (
    MissingTrace,
    NonSimpleVertex,
    OutsideDomain,
    SingularEvaluation,
)

_EXPANSION_SWITCH = 1e-6


def _require_inside(P, x, what):
    x = np.asarray(x, dtype=float)
    vals = P.evaluate_all(x)
    if np.min(vals) < -P.tau:
        raise OutsideDomain("%s evaluated outside the closed polytope" % what)
    return x, vals


def potential_values(P, xs):
    """Values of sum_i l_i log l_i at many points (0 log 0 = 0)."""
    xs, vals = _require_inside(P, xs, "potential")
    return xlogy(np.clip(vals, 0.0, None), np.clip(vals, 0.0, None)).sum(-1)


def guillemin_potential(P, x):
    """Canonical potential, its gradient and Hessian at one point.

    Parameters
    ----------
    P : Polytope
    x : array_like, shape (n,)
        Point in the closed polytope.

    Returns
    -------
    value : float
        sum_i l_i(x) log l_i(x), with the 0 log 0 = 0 convention.
    gradient : ndarray or None
        sum_i (1 + log l_i) n_i; None on the boundary.
    hessian : ndarray or None
        sum_i n_i n_i^t / l_i; None on the boundary.

    Raises
    ------
    OutsideDomain
    """
    x, vals = _require_inside(P, x, "potential")
    clipped = np.clip(vals, 0.0, None)
    value = float(xlogy(clipped, clipped).sum())
    if np.min(vals) <= P.tau:
        return value, None, None
    normals = P.normals
    grad = ((1.0 + np.log(vals))[:, None] * normals).sum(axis=0)
    hess = np.einsum("i,ia,ib->ab", 1.0 / vals, normals, normals)
    return value, grad, hess


def _distinct_index_terms(P):
    """Cached (complement indices, squared normal determinant) pairs.

    These are the distinct-index terms in the expansion of
    (prod l) det(sum n n^t / l): one term per nondegenerate n-subset of
    facets, with the product running over the complement.  The expansion
    is a polynomial and therefore the continuous extension of the density
    to the boundary.
    """
    terms = getattr(P, "_distinct_index_terms", None)
    if terms is None:
        n = P.dimension
        terms = []
        for subset in itertools.combinations(range(len(P.facets)), n):
            d = np.linalg.det(P.normals[list(subset)])
            if d != 0.0:
                comp = [i for i in range(len(P.facets)) if i not in subset]
                terms.append((np.array(comp, dtype=int), d * d))
        object.__setattr__(P, "_distinct_index_terms", terms)
    return terms


def guillemin_density(P, x, force_expansion=False):
    """Induced density h_G(x) = (prod_i l_i) det(sum_i n_i n_i^t / l_i).

    Within 1e-6 * diameter of the boundary the evaluation switches to the
    distinct-index polynomial expansion, which is the continuous extension
    of the interior formula; ``force_expansion`` selects it everywhere.

    Accepts a single point (shape (n,)) or a batch (shape (m, n)).

    Raises
    ------
    OutsideDomain
    """
    x, vals = _require_inside(P, x, "density")
    single = vals.ndim == 1
    V = np.atleast_2d(vals)
    out = np.empty(len(V))
    near = (V.min(axis=1) < _EXPANSION_SWITCH * P.diameter) | force_expansion
    if np.any(near):
        Vn = V[near]
        acc = np.zeros(len(Vn))
        for comp, det2 in _distinct_index_terms(P):
            acc += det2 * np.prod(Vn[:, comp], axis=1)
        out[near] = acc
    if not np.all(near):
        Vi = V[~near]
        H = np.einsum("pi,ia,ib->pab", 1.0 / Vi, P.normals, P.normals)
        out[~near] = np.prod(Vi, axis=1) * np.linalg.det(H)
    return float(out[0]) if single else out


def check_vertex_compatibility(P, h, vertex_id):
    """Signed residual of the vertex matching condition for the density.

    The density must equal, at each vertex p with active normals
    n_{i_1}, ..., n_{i_n}, the product of the inactive functionals at p
    times the squared determinant of the active normals.  Returns
    h(p) - that value.  The value is not invariant under rescaling the
    functionals; the facet list is taken as given.

    Raises
    ------
    NonSimpleVertex
        The vertex does not lie on exactly n facets.
    """
    n = P.dimension
    active = P.vertex_active[vertex_id]
    if len(active) != n:
        raise NonSimpleVertex(
            "vertex %d lies on %d facets, expected %d"
            % (vertex_id, len(active), n))
    p = P.vertices[vertex_id]
    vals = P.evaluate_all(p)
    inactive = [i for i in range(len(P.facets)) if i not in active]
    required = np.prod(vals[inactive]) * np.linalg.det(P.normals[list(active)]) ** 2
    return float(h(p) - required)


class DensitySpec:
    """Positive density on the closed polytope with derivative access.

    Wraps a vectorized evaluator together with a family tag
    ("analytic", "guillemin-induced" or "perturbed").  Derivatives come
    from central finite differences unless the underlying family supplies
    them.
    """

    def __init__(self, fn, tag="analytic", fd_scale=1.0, family=("callable",)):
        self._fn = fn
        self.tag = tag
        self._fd_scale = float(fd_scale)
        self.family = family

    def __call__(self, x):
        return self._fn(np.asarray(x, dtype=float))

    @classmethod
    def constant(cls, c):
        c = float(c)
        return cls(lambda x: (np.full(x.shape[:-1], c)
                              if x.ndim > 1 else c), tag="analytic",
                   family=("constant", c))

    @classmethod
    def polynomial(cls, coeffs, dim):
        """Density sum_alpha c_alpha x^alpha from a {exponents: coeff} map."""
        items = []
        for alpha, c in coeffs.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != dim:
                raise ValueError("exponent tuple %s has wrong length" % (alpha,))
            items.append((np.array(alpha), float(c)))

        def fn(x):
            acc = np.zeros(x.shape[:-1])
            for alpha, c in items:
                acc = acc + c * np.prod(x ** alpha, axis=-1)
            return acc if acc.ndim else float(acc)

        return cls(fn, tag="analytic", family=("polynomial", dict(coeffs)))

    @classmethod
    def guillemin(cls, P):
        """The induced density of the canonical potential of P."""
        return cls(lambda x: guillemin_density(P, x), tag="guillemin-induced",
                   family=("guillemin",))

    @classmethod
    def perturbed(cls, P, c):
        """h_G * (1 + c prod_i l_i); agrees with h_G at every vertex."""
        c = float(c)

        def fn(x):
            l = P.evaluate_all(x)
            return guillemin_density(P, x) * (1.0 + c * np.prod(l, axis=-1))

        return cls(fn, tag="perturbed", family=("perturbed", c))

    @classmethod
    def from_callable(cls, fn, tag="analytic"):
        return cls(fn, tag=tag)

    def gradient(self, x):
        """Fourth order central difference gradient."""
        x = np.asarray(x, dtype=float)
        h = np.finfo(float).eps ** (1.0 / 3.0) * max(1.0, np.abs(x).max()) \
            * self._fd_scale
        g = np.empty(x.size)
        for a in range(x.size):
            e = np.zeros(x.size)
            e[a] = h
            g[a] = (-self(x + 2 * e) + 8 * self(x + e)
                    - 8 * self(x - e) + self(x - 2 * e)) / (12 * h)
        return g

    def hessian(self, x):
        """Central difference Hessian (fourth order diagonal, balanced step)."""
        x = np.asarray(x, dtype=float)
        n = x.size
        h = np.finfo(float).eps ** (1.0 / 6.0) * max(1.0, np.abs(x).max()) \
            * self._fd_scale
        H = np.empty((n, n))
        f0 = self(x)
        for a in range(n):
            ea = np.zeros(n)
            ea[a] = h
            H[a, a] = (-self(x + 2 * ea) + 16 * self(x + ea) - 30 * f0
                       + 16 * self(x - ea) - self(x - 2 * ea)) / (12 * h * h)
            for b in range(a + 1, n):
                eb = np.zeros(n)
                eb[b] = h
                H[a, b] = H[b, a] = (self(x + ea + eb) - self(x + ea - eb)
                                     - self(x - ea + eb)
                                     + self(x - ea - eb)) / (4 * h * h)
        return H


def smooth_extension(trace_fn, x, k):
    """Inclusion-exclusion extension of boundary traces into the corner.

    F(x) = sum over nonempty subsets S of the first k coordinates of
    (-1)^(|S|+1) v(x with coordinates in S set to zero).  F agrees with v
    wherever some of the first k coordinates vanish, and only ever
    evaluates v at such points.

    Parameters
    ----------
    trace_fn : callable
        Boundary data; must accept points whose first k coordinates are
        partially zeroed and may be vectorized over leading axes.
    x : array_like, shape (..., n)
    k : int
        Number of singular coordinates.

    Raises
    ------
    MissingTrace
        The trace evaluator produced a non-finite value.
    """
    x = np.asarray(x, dtype=float)
    acc = None
    for r in range(1, k + 1):
        for S in itertools.combinations(range(k), r):
            y = x.copy()
            y[..., list(S)] = 0.0
            term = np.asarray(trace_fn(y), dtype=float)
            if not np.all(np.isfinite(term)):
                raise MissingTrace(
                    "trace evaluator returned non-finite data on {x_%s = 0}"
                    % ",".join(str(s) for s in S))
            sign = 1.0 if r % 2 == 1 else -1.0
            acc = sign * term if acc is None else acc + sign * term
    if acc is None:
        raise ValueError("k must be at least 1")
    return float(acc) if acc.ndim == 0 else acc


class QuadraticField:
    """The field x -> x.Q x / 2 with exact derivatives; test and model helper."""

    def __init__(self, Q):
        self.Q = np.asarray(Q, dtype=float)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...a,ab,...b->...", x, self.Q, x)

    def gradient(self, x):
        return self.Q @ np.asarray(x, dtype=float)

    def hessian(self, x):
        return self.Q


class ScaledHessian:
    """Weighted Hessian with square-root weights on the singular coordinates.

    For a field F = sum_{a<k} x_a log x_a + G with smooth G the entries
    are bounded up to {x_a = 0}: the log part contributes exactly the
    identity on the first k diagonal entries.
    """

    __slots__ = ("k", "point", "matrix")

    def __init__(self, k, point, matrix):
        self.k = int(k)
        self.point = np.asarray(point, dtype=float)
        self.matrix = np.asarray(matrix, dtype=float)

    @property
    def det(self):
        return float(np.linalg.det(self.matrix))


def scaled_hessian(field, x, k, includes_log=False):
    """Evaluate the weighted Hessian W D2F W at a chart point.

    W = diag(sqrt(x_1), ..., sqrt(x_k), 1, ..., 1).  The identity
    det(result) = (prod_{a<k} x_a) det D2F holds wherever both sides are
    defined.

    Parameters
    ----------
    field : object with ``hessian(x)`` or plain callable
        When ``includes_log`` is true, ``field`` is the smooth remainder G
        and the evaluated matrix is W D2G W plus the identity block from
        sum x_a log x_a.  A plain callable is differentiated numerically.
    x : array_like, shape (n,)
        First k coordinates must be nonnegative.
    k : int

    Raises
    ------
    SingularEvaluation
        A weighted entry is non-finite, or some x_a < 0.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x[:k] < 0):
        raise SingularEvaluation("negative coordinate in the weighted block")
    if hasattr(field, "hessian"):
        H = np.asarray(field.hessian(x), dtype=float)
    else:
        H = _fd_hessian_callable(field, x)
    if not np.all(np.isfinite(H)):
        raise SingularEvaluation("Hessian is not finite at %s" % (x,))
    w = np.ones(x.size)
    w[:k] = np.sqrt(x[:k])
    M = H * w[:, None] * w[None, :]
    if includes_log:
        M[np.arange(k), np.arange(k)] += 1.0
    if not np.all(np.isfinite(M)):
        raise SingularEvaluation("weighted Hessian entry diverged at %s" % (x,))
    return ScaledHessian(k, x, M)


def _fd_hessian_callable(f, x):
    n = x.size
    h = np.finfo(float).eps ** (1.0 / 6.0) * max(1.0, np.abs(x).max())
    H = np.empty((n, n))
    with np.errstate(all="ignore"):
        f0 = f(x)
        for a in range(n):
            ea = np.zeros(n)
            ea[a] = h
            H[a, a] = (f(x + ea) - 2 * f0 + f(x - ea)) / (h * h)
            for b in range(a + 1, n):
                eb = np.zeros(n)
                eb[b] = h
                H[a, b] = H[b, a] = (f(x + ea + eb) - f(x + ea - eb)
                                     - f(x - ea + eb)
                                     + f(x - ea - eb)) / (4 * h * h)
    return H
