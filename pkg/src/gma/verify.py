"""Closed-form certificates and refinement diagnostics.

Three groups of checks back the solver up.  Quadrant oracles evaluate
the explicit degenerate solutions (log terms on the vanishing
coordinates plus a quadratic bulk) together with the defect of the
equation they satisfy, so any consumer can confirm the algebra to
rounding.  Barrier certificates evaluate comparison functions whose
derivatives are written out in closed form, search a power-of-two
ladder for the admissible constant, and report the worst margin of the
differential inequality and of the boundary comparison.  Mesh
estimators take a solved field on a sequence of refined grids near a
face or a corner and track the sup of the quantity each regularity
statement bounds, flagging growth beyond ten percent per refinement.

Everything here is deterministic: sampling uses seeded generators and
all reductions run over sorted sample order.
"""

from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import xlogy

from . import geometry
from .errors import ConstantSearchFailed, OutsideQuadrant, ValidationError
from .legendre import local_quadratic_eval

__all__ = [
    "LiouvilleData",
    "liouville_oracle",
    "BarrierCheck",
    "product_power_hessian",
    "verify_barrier",
    "EstimateReport",
    "estimate_lipschitz",
    "estimate_weighted_hessian",
    "estimate_face_asymptotics",
    "appendix_checks",
    "interpolation_constant",
    "solution_probe",
]

_TREND_FLOOR = 1e-12
_TREND_LIMIT = 1.1
_LADDER = [2.0 ** j for j in range(40, -41, -1)]


class LiouvilleData(NamedTuple):
    value: float
    gradient: np.ndarray
    hessian: np.ndarray
    residual: float


def liouville_oracle(x, k, n=None):
    """Explicit quadrant solution and the defect of its equation.

    The potential is sum_{a<=k} x_a log x_a plus half the squared norm
    of the remaining coordinates.  It solves the degenerate equation
    prod_{a<=k} x_a det D2 u = 1 on the open quadrant exactly; the
    returned residual is that product minus one, evaluated in floating
    point from the closed-form Hessian.

    Parameters
    ----------
    x : ndarray, shape (n,)
        Evaluation point; the first k coordinates must be positive.
    k : int
        Number of degenerate coordinates.
    n : int, optional
        Expected dimension; checked against x when given.

    Returns
    -------
    LiouvilleData
        value, gradient, hessian, residual.

    Raises
    ------
    OutsideQuadrant
        When any of the first k coordinates is not strictly positive.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValidationError("oracle expects a single point")
    if n is not None and x.size != n:
        raise ValidationError("point dimension does not match n")
    n = x.size
    k = int(k)
    if not 1 <= k <= n:
        raise ValidationError("need 1 <= k <= n")
    head = x[:k]
    if np.any(head <= 0.0):
        raise OutsideQuadrant(
            "oracle needs the first %d coordinates positive" % k)
    tail = x[k:]
    value = float(np.sum(head * np.log(head)) + 0.5 * np.sum(tail ** 2))
    gradient = np.concatenate([1.0 + np.log(head), tail])
    hessian = np.diag(np.concatenate([1.0 / head, np.ones(n - k)]))
    residual = float(np.prod(head) * np.linalg.det(hessian) - 1.0)
    return LiouvilleData(value, gradient, hessian, residual)


class BarrierCheck(NamedTuple):
    barrier_id: str
    constants: dict
    samples: np.ndarray
    margin_differential: float
    margin_boundary: float


def product_power_hessian(P, alpha, x):
    """Closed-form Hessian of (prod_i l_i)^alpha at an interior point."""
    x = np.asarray(x, dtype=float)
    l = P.evaluate_all(x)
    if np.min(l) <= 0.0:
        raise ValidationError("Hessian of the product power needs an "
                              "interior point")
    N = P.normals
    H = float(np.prod(l) ** alpha)
    b = (N / l[:, None]).sum(axis=0)
    M = (N[:, :, None] * N[:, None, :] / (l ** 2)[:, None, None]).sum(axis=0)
    return H * (alpha ** 2 * np.outer(b, b) - alpha * M)


def _fd_hessian(f, x, h):
    n = x.size
    out = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h
            ej[j] = h
            if i == j:
                out[i, i] = (f(x + ei) - 2.0 * f(x) + f(x - ei)) / h ** 2
            else:
                out[i, j] = out[j, i] = (
                    f(x + ei + ej) - f(x + ei - ej)
                    - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * h ** 2)
    return out


def _vertex_rays(P):
    centroid = P.vertices.mean(axis=0)
    t = 2.0 ** -np.arange(1, 13)
    rays = [v + t[:, None] * (centroid - v) for v in P.vertices]
    return np.concatenate(rays, axis=0)


def _ladder_constant(values):
    lo = float(np.min(values))
    for c in _LADDER:
        if lo - c >= 0.0:
            return c, lo - c
    raise ConstantSearchFailed(
        "no rung of the dyadic ladder stays below the sampled minimum "
        "%.3e" % lo)


def _check_product_power(P, samples, constants, seed):
    n = P.dimension
    alpha = float(constants.get("alpha_exp", 1.0 / (2.0 * n)))
    rng = np.random.default_rng(seed)
    pts = geometry.sample_interior(P, samples, rng)
    pts = np.concatenate([pts, _vertex_rays(P)], axis=0)
    N = P.normals

    # curvature ratio: det(-D2 H) over (prod l)^(n alpha - 2) reduces to
    # alpha^n (prod l)^2 det(M - alpha b b^T) with M = sum n n^T / l^2
    # and b = sum n / l, all in closed form
    vals = np.empty(len(pts))
    for i, x in enumerate(pts):
        l = P.evaluate_all(x)
        b = (N / l[:, None]).sum(axis=0)
        M = (N[:, :, None] * N[:, None, :]
             / (l ** 2)[:, None, None]).sum(axis=0)
        vals[i] = (alpha ** n * np.prod(l) ** 2
                   * np.linalg.det(M - alpha * np.outer(b, b)))

    for x in geometry.sample_interior(P, 3, rng, margin=0.05):
        closed = product_power_hessian(P, alpha, x)
        numeric = _fd_hessian(
            lambda y: float(np.prod(P.evaluate_all(y)) ** alpha), x, 1e-5)
        scale = max(1.0, float(np.max(np.abs(closed))))
        if np.max(np.abs(closed - numeric)) > 1e-3 * scale:
            raise ValidationError("closed-form Hessian disagrees with "
                                  "finite differences")

    C, margin = _ladder_constant(vals)

    # the barrier vanishes on each facet; evaluate with the active
    # factor zero by construction
    boundary = []
    for i in range(len(N)):
        for x in pts[:3]:
            l = P.evaluate_all(x)
            xb = x - l[i] * N[i] / np.dot(N[i], N[i])
            lb = P.evaluate_all(xb)
            lb[i] = 0.0
            boundary.append(np.prod(np.clip(lb, 0.0, None)) ** alpha)
    return BarrierCheck(
        "product-power",
        {"alpha_exp": alpha, "C": C},
        pts, float(margin), -float(np.max(boundary)))


def _check_face_lift(samples, constants, seed, u, h):
    c0 = float(constants.get("C0", 1.0))
    depth = float(constants.get("depth", 0.5))
    if h is None:
        h = lambda x: 1.0
    rng = np.random.default_rng(seed)
    x1 = 10.0 ** rng.uniform(-3, 0, samples) * depth
    x2 = rng.uniform(-1.0, 1.0, samples)
    pts = np.column_stack([x1, x2])

    # the lift of the face trace by C0 x1 log x1 has Hessian
    # determinant C0 h(0, x2) / x1 through the trace equation, so the
    # differential comparison reduces to one closed-form quotient
    margins = np.empty(samples)
    for i, (a, b) in enumerate(pts):
        margins[i] = (c0 * float(h(np.array([0.0, b])))
                      - float(h(np.array([a, b])))) / a

    if u is None:
        boundary = 0.0
    else:
        # the lift equals the trace plus C0 x1 log x1, which vanishes
        # on the face, so the touching condition is checked verbatim
        face = np.column_stack([np.zeros(64), np.linspace(-1.0, 1.0, 64)])
        gaps = [abs(float(u(p)) + c0 * float(xlogy(p[0], p[0]))
                    - float(u(p))) for p in face]
        boundary = -max(gaps)
    return BarrierCheck(
        "face-lift",
        {"C0": c0, "depth": depth},
        pts, float(np.min(margins)), float(boundary))


def _scaled_log_root_hessian(x, k):
    # square-root-weighted Hessian of G = (prod x_a)^(1/k); closed form
    G = float(np.prod(x) ** (1.0 / k))
    v = 1.0 / np.sqrt(x)
    return (G / k ** 2) * (np.outer(v, v) - k * np.diag(v ** 2))


def _check_g_concavity(samples, constants, seed, k):
    k = int(k)
    c0 = float(constants.get("C0", 1.0))
    B = float(constants.get("B", 1.0))
    delta = float(constants.get("delta", 0.1))
    rng = np.random.default_rng(seed)
    pts = 10.0 ** rng.uniform(-3, 0, (samples, k))

    # concavity transfer: the determinant of the shifted matrix must
    # dominate its first-order trace expansion with the stated constant
    c = 1.0 + delta
    margins = np.empty(samples)
    for i, x in enumerate(pts):
        MG = _scaled_log_root_hessian(x, k)
        lhs = np.linalg.det(c * np.eye(k) - B * MG)
        rhs = c ** k - (B / c0) * np.trace(MG)
        margins[i] = lhs - rhs

    boundary = []
    for x in pts[:8]:
        xb = x.copy()
        xb[0] = 0.0
        boundary.append(np.prod(xb) ** (1.0 / k))
    return BarrierCheck(
        "g-concavity",
        {"C0": c0, "B": B, "delta": delta, "k": k},
        pts, float(np.min(margins)), -float(np.max(boundary)))


def verify_barrier(barrier_id, polytope=None, samples=200, constants=None,
                   seed=0, u=None, h=None, k=2):
    """Evaluate one comparison-function certificate on a sample set.

    Margins come from closed-form derivative expressions of the barrier
    alone; no numerical solve enters.  A nonnegative differential
    margin means the inequality held at every sample, a nonnegative
    boundary margin means the comparison on the boundary held.

    Parameters
    ----------
    barrier_id : str
        One of "product-power" (curvature lower bound for a power of
        the facet product on a polytope), "face-lift" (trace lifted by
        a transversal x log x term on the model half-strip), or
        "g-concavity" (determinant versus trace transfer for the k-th
        root of the coordinate product on the quadrant).
    polytope : Polytope, optional
        Required for "product-power".
    samples : int
        Number of random sample points.
    constants : dict, optional
        Certificate constants; missing entries get defaults
        (alpha_exp = 1/(2n), C0 = 1, B = 1, delta = 0.1).
    seed : int
        Sampling seed.
    u : callable, optional
        Model potential whose face trace the "face-lift" barrier
        matches; used for the boundary comparison.
    h : callable, optional
        Density for "face-lift"; default is 1.
    k : int
        Number of degenerate coordinates for "g-concavity".

    Returns
    -------
    BarrierCheck

    Raises
    ------
    ConstantSearchFailed
        When no rung of the dyadic constant ladder verifies.
    """
    constants = dict(constants or {})
    if barrier_id == "product-power":
        if polytope is None:
            raise ValidationError("product-power needs a polytope")
        return _check_product_power(polytope, samples, constants, seed)
    if barrier_id == "face-lift":
        return _check_face_lift(samples, constants, seed, u, h)
    if barrier_id == "g-concavity":
        return _check_g_concavity(samples, constants, seed, k)
    raise ValidationError("unknown barrier id %r" % (barrier_id,))


class EstimateReport(NamedTuple):
    estimate_id: str
    ratios: tuple
    argmax: tuple
    trend: tuple
    bounded: bool


def _load_level(values, axes, need_face=True, need_corner=False):
    V = np.asarray(values, dtype=float)
    if V.ndim != 2:
        raise ValidationError("estimator levels must be planar grids")
    x1, x2 = (np.asarray(a, dtype=float) for a in axes)
    if V.shape != (x1.size, x2.size):
        raise ValidationError("grid values do not match the axes")
    for ax, label in ((x1, "transversal"), (x2, "tangential")):
        steps = np.diff(ax)
        if ax.size < 4 or np.min(steps) <= 0 or not np.allclose(
                steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValidationError(
                "%s axis must be uniform with at least 4 nodes" % label)
    if need_face and abs(x1[0]) > 0.0:
        raise ValidationError("transversal axis must start at the face")
    if need_corner and abs(x2[0]) > 0.0:
        raise ValidationError("both axes must start at the corner")
    return V, x1, x2


def _finish(estimate_id, ratios, argmax):
    trend = tuple(ratios[i + 1] / max(ratios[i], _TREND_FLOOR)
                  for i in range(len(ratios) - 1))
    bounded = all(t <= _TREND_LIMIT for t in trend)
    return EstimateReport(estimate_id, tuple(ratios), argmax, trend, bounded)


def estimate_lipschitz(levels):
    """Transversal difference-quotient sup across refinements.

    Each level is (values, (x1_axis, x2_axis)) with the first axis
    starting at the face x1 = 0.  The estimator reports the sup over
    interior nodes (a one-node collar is excluded) of
    |v(x1, x2) - v(0, x2)| / x1 and whether the sequence of sups grows
    by more than ten percent between consecutive refinements.

    Returns
    -------
    EstimateReport
    """
    ratios = []
    argmax = ()
    for values, axes in levels:
        V, x1, x2 = _load_level(values, axes)
        Q = np.abs(V[1:-1, 1:-1] - V[0, 1:-1][None, :]) \
            / x1[1:-1][:, None]
        ratios.append(float(Q.max()))
        i, j = np.unravel_index(np.argmax(Q), Q.shape)
        argmax = (float(x1[i + 1]), float(x2[j + 1]))
    return _finish("lipschitz", ratios, argmax)


def estimate_weighted_hessian(levels):
    """Sup of the face-weighted second-difference combination.

    Tracks x1 |v_11| + sqrt(x1) |v_12| + |v_22| over interior nodes,
    the combination that stays bounded up to the face when the
    transversal direction degenerates linearly.

    Returns
    -------
    EstimateReport
    """
    ratios = []
    argmax = ()
    for values, axes in levels:
        V, x1, x2 = _load_level(values, axes)
        d1 = x1[1] - x1[0]
        d2 = x2[1] - x2[0]
        V11 = (V[2:, 1:-1] - 2.0 * V[1:-1, 1:-1] + V[:-2, 1:-1]) / d1 ** 2
        V22 = (V[1:-1, 2:] - 2.0 * V[1:-1, 1:-1] + V[1:-1, :-2]) / d2 ** 2
        V12 = (V[2:, 2:] - V[2:, :-2] - V[:-2, 2:] + V[:-2, :-2]) \
            / (4.0 * d1 * d2)
        w1 = x1[1:-1][:, None]
        Q = w1 * np.abs(V11) + np.sqrt(w1) * np.abs(V12) + np.abs(V22)
        ratios.append(float(Q.max()))
        i, j = np.unravel_index(np.argmax(Q), Q.shape)
        argmax = (float(x1[i + 1]), float(x2[j + 1]))
    return _finish("weighted-hessian", ratios, argmax)


def estimate_face_asymptotics(levels, extension=None):
    """Remainder-to-weight ratios near a corner of two vanishing faces.

    The remainder is the field minus its separable extension.  When no
    extension callable is given the discrete inclusion-exclusion of the
    two face traces is used: F[i, j] = V[0, j] + V[i, 0] - V[0, 0],
    which reproduces any separable field exactly.  Three weights are
    reported: the square root of the coordinate product, the symmetric
    quadratic sum (identical to the product for two faces), and the
    full product.  Nodes with a vanishing coordinate are excluded.

    Parameters
    ----------
    levels : list of (values, (x1_axis, x2_axis))
        Both axes must start at 0.
    extension : callable, optional
        Point evaluator x -> float replacing the discrete extension.

    Returns
    -------
    dict of EstimateReport
        Keyed by "root-product", "quadratic", "full-product".
    """
    acc = {key: ([], ()) for key in
           ("root-product", "quadratic", "full-product")}
    for values, axes in levels:
        V, x1, x2 = _load_level(values, axes, need_corner=True)
        if extension is None:
            F = V[0:1, :] + V[:, 0:1] - V[0, 0]
        else:
            F = np.array([[float(extension(np.array([a, b])))
                           for b in x2] for a in x1])
        R = np.abs(V - F)[1:-1, 1:-1]
        X1, X2 = np.meshgrid(x1[1:-1], x2[1:-1], indexing="ij")
        prod = X1 * X2
        weights = {"root-product": np.sqrt(prod),
                   "quadratic": prod,
                   "full-product": prod}
        for key, (ratios, _) in acc.items():
            Q = R / weights[key]
            ratios.append(float(Q.max()))
            i, j = np.unravel_index(np.argmax(Q), Q.shape)
            acc[key] = (ratios, (float(x1[i + 1]), float(x2[j + 1])))
    return {key: _finish(key, ratios, argmax)
            for key, (ratios, argmax) in acc.items()}


def interpolation_constant(k):
    """Derivative interpolation constant from the doubling recursion.

    The one-dimensional seed bounds the first derivative by
    5/2 (eps^-1 sup|f| + eps sup|f''|); iterating the recursion
    c_{k+1} = 2 c_k + 36 c_k^2 lifts it to order k, and resolving the
    epsilon trade-off doubles the constant.
    """
    k = int(k)
    if k < 2:
        raise ValidationError("interpolation needs order at least 2")
    c = 2.5
    for _ in range(k - 2):
        c = 2.0 * c + 36.0 * c * c
    return 2.0 * c


def _product_bound_fields():
    # (label, psi, k, n, closed-form constant)
    return [
        ("x1 x2 sin(x3)",
         lambda x: x[0] * x[1] * np.sin(x[2]), 2, 3, 1.0),
        ("x1 (1 - exp(-x2))",
         lambda x: x[0] * (1.0 - np.exp(-x[1])), 2, 2, 1.0),
        ("sin(x1) sinh(x2)",
         lambda x: np.sin(x[0]) * np.sinh(x[1]), 2, 2, float(np.cosh(1.0))),
        ("x1 x2 x3 exp(x1)",
         lambda x: x[0] * x[1] * x[2] * np.exp(x[0]), 3, 3,
         float(2.0 * np.e)),
        ("x1 x2^2",
         lambda x: x[0] * x[1] ** 2, 2, 2, 2.0),
        ("x1 log(1 + x2)",
         lambda x: x[0] * np.log1p(x[1]), 2, 2, 1.0),
        ("x1 x2 cos(x1 x2)",
         lambda x: x[0] * x[1] * np.cos(x[0] * x[1]), 2, 2, 5.0),
    ]


def _holder_fields():
    # (label, delta, s, sup|s|, sup|grad s|) on [-1, 1]^2
    r2 = float(np.sqrt(2.0))
    return [
        ("|x1|^0.5", 0.5, lambda x: 1.0, 1.0, 0.0),
        ("|x1|^0.5 cos(x2)", 0.5, lambda x: np.cos(x[1]), 1.0, 1.0),
        ("|x1|^0.75", 0.75, lambda x: 1.0, 1.0, 0.0),
        ("|x1|^0.3 (1 + x1 x2 / 4)", 0.3,
         lambda x: 1.0 + 0.25 * x[0] * x[1], 1.25, r2 / 4.0),
        ("|x1|^0.9 exp(x1 - 1)", 0.9,
         lambda x: np.exp(x[0] - 1.0), 1.0, 1.0),
        ("|x1|^0.6 sin(x1 + x2)", 0.6,
         lambda x: np.sin(x[0] + x[1]), 1.0, r2),
    ]


def _interpolation_fields():
    # (label, k, l, derivative table indexed by order)
    return [
        ("sin(10 x)", 2, 1,
         {0: lambda t: np.sin(10 * t), 1: lambda t: 10 * np.cos(10 * t),
          2: lambda t: -100 * np.sin(10 * t)}),
        ("sin(x)", 2, 1,
         {0: np.sin, 1: np.cos, 2: lambda t: -np.sin(t)}),
        ("cos(3 x)", 2, 1,
         {0: lambda t: np.cos(3 * t), 1: lambda t: -3 * np.sin(3 * t),
          2: lambda t: -9 * np.cos(3 * t)}),
        ("x^2", 2, 1,
         {0: lambda t: t ** 2, 1: lambda t: 2 * t,
          2: lambda t: 2.0 + 0 * t}),
        ("sin(5 x) + sin(x) / 2", 2, 1,
         {0: lambda t: np.sin(5 * t) + 0.5 * np.sin(t),
          1: lambda t: 5 * np.cos(5 * t) + 0.5 * np.cos(t),
          2: lambda t: -25 * np.sin(5 * t) - 0.5 * np.sin(t)}),
        ("1 / (1 + x^2)", 2, 1,
         {0: lambda t: 1 / (1 + t ** 2),
          1: lambda t: -2 * t / (1 + t ** 2) ** 2,
          2: lambda t: (6 * t ** 2 - 2) / (1 + t ** 2) ** 3}),
        ("sin(2 x)", 3, 1,
         {0: lambda t: np.sin(2 * t), 1: lambda t: 2 * np.cos(2 * t),
          3: lambda t: -8 * np.cos(2 * t)}),
        ("sin(2 x)", 3, 2,
         {0: lambda t: np.sin(2 * t), 2: lambda t: -4 * np.sin(2 * t),
          3: lambda t: -8 * np.cos(2 * t)}),
    ]


def appendix_checks(rng=None):
    """Battery of closed-form inequality checks on sampled fields.

    Runs three families: pointwise product bounds for fields vanishing
    on coordinate hyperplanes (constant = a closed-form sup of the
    mixed derivative), Hoelder growth of difference quotients for a
    power-of-distance times smooth factor (constant 8 times a
    closed-form majorant), and derivative interpolation between the
    sup of a function and the sup of its top derivative (constant from
    the doubling recursion).

    Returns
    -------
    list of dict
        One entry per field with id, label, constant, margin, pass.
    """
    rng = np.random.default_rng(7) if rng is None else rng
    out = []

    for label, psi, k, n, C in _product_bound_fields():
        pts = rng.uniform(0.0, 1.0, (400, n))
        margin = np.inf
        for x in pts:
            margin = min(margin,
                         C * float(np.prod(x[:k])) - abs(float(psi(x))))
        out.append({"id": "product-bound", "label": label, "k": k,
                    "constant": C, "margin": float(margin),
                    "pass": margin >= 0.0})

    for label, delta, s, sup_s, sup_ds in _holder_fields():
        R = float(np.sqrt(2.0))
        M = max(sup_s, delta * sup_s + R * sup_ds)

        def f(x):
            return abs(x[0]) ** delta * float(s(x))

        pairs = rng.uniform(-1.0, 1.0, (2000, 2, 2))
        # pairs reaching the singular line drive the quotient hardest
        t = 10.0 ** rng.uniform(-6, 0, 200)
        straddle = np.stack([np.column_stack([t, 0.3 * t]),
                             np.column_stack([0.0 * t, 0.3 * t])], axis=1)
        sem = 0.0
        for a, b in np.concatenate([pairs, straddle]):
            gap = np.linalg.norm(a - b)
            if gap <= 0.0:
                continue
            sem = max(sem, abs(f(a) - f(b)) / gap ** delta)
        margin = 8.0 * M - sem
        out.append({"id": "holder-growth", "label": label, "delta": delta,
                    "constant": 8.0, "margin": float(margin),
                    "pass": margin >= 0.0})

    t = np.linspace(-3.0, 3.0, 4001)
    for label, k, l, der in _interpolation_fields():
        C = interpolation_constant(k)
        A = float(np.max(np.abs(der[0](t))))
        B = float(np.max(np.abs(der[k](t))))
        mid = float(np.max(np.abs(der[l](t))))
        bound = C * A ** (1.0 - l / k) * B ** (l / k)
        margin = bound - mid
        out.append({"id": "interpolation", "label": label, "order": k,
                    "l": l, "constant": C, "margin": float(margin),
                    "pass": margin >= 0.0})
    return out


def solution_probe(solution):
    """Smooth point evaluator for the regular part of a solved chart.

    Piecewise-linear interpolation of the lattice values has kinks
    whose second differences do not converge; the probe instead fits a
    local quadratic through the nearest lattice values, which the mesh
    estimators can difference safely.

    Parameters
    ----------
    solution : RegularizedSolution

    Returns
    -------
    callable
        x -> float evaluating the regular part.
    """
    chart = solution.chart
    pts = chart.to_problem(chart.nodes)
    if pts.shape[1] != 2:
        raise ValidationError("probe supports planar charts")
    tree = cKDTree(pts)
    values = np.asarray(solution.values, dtype=float)

    def probe(x):
        return local_quadratic_eval(tree, pts, values, x)

    return probe
