"""Partial Legendre transform and the half-space model solver.

Two coordinate changes matter near a facet where one functional
degenerates.  The partial Legendre transform dualizes the tangential
directions only: with y = (x1, D_tan u) the graph map sends a convex
field u to u*(y) = x_tan . y_tan - u(x), and the equation
x1 det D2u = h becomes an equation linear in the transversal second
derivative, y1 u*_11 + h det D2_tan u* = 0.  The square-root change
z1 = 2 sqrt(x1) regularizes the model problem det D2u = h/x1 instead:
writing u = x1 log x1 + v and v(x) = w(2 sqrt(x1), x_tan), the model
equation turns into det(D2w + (1 - w_1/z1) e1 e1^T) = h with a plain
Neumann-type closure at z1 = 0 supplied by even reflection.

Both are implemented in the plane: one transversal and one tangential
direction, which is the setting every companion check exercises.
"""

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve
from scipy.spatial import cKDTree

from .errors import (
    DegenerateTransversalHessian,
    LineSearchStall,
    NonEllipticIterate,
    SingularJacobian,
    ValidationError,
)

__all__ = [
    "PartialLegendrePair",
    "legendre_forward",
    "local_quadratic_eval",
    "ModelSolution",
    "model_solve_z",
]

# enough neighbors for a full quadratic fit in the plane plus slack
_LSQ_NEIGHBORS = 8
_LSQ_COEFFS = 6


def local_quadratic_eval(tree, points, values, y):
    """Quadratic least-squares value at y from scattered planar samples.

    Fits the six-coefficient quadratic to the nearest samples and widens
    the neighborhood until the basis has full rank; exact on quadratic
    data, third order on smooth data.

    Parameters
    ----------
    tree : scipy.spatial.cKDTree
        Built over ``points``.
    points : ndarray, shape (K, 2)
    values : ndarray, shape (K,)
    y : ndarray, shape (2,)

    Returns
    -------
    float
    """
    y = np.asarray(y, dtype=float)
    total = len(values)
    if total < _LSQ_COEFFS:
        raise ValidationError("too few samples for a quadratic fit")
    k = min(max(_LSQ_NEIGHBORS, _LSQ_COEFFS + 2), total)
    while True:
        _, idx = tree.query(y, k=k)
        d = points[idx] - y
        r = np.max(np.sqrt(np.sum(d * d, axis=1)))
        if r <= 0.0:
            return float(values[idx[0]])
        s = d / r
        B = np.column_stack([
            np.ones(k), s[:, 0], s[:, 1],
            s[:, 0] ** 2, s[:, 0] * s[:, 1], s[:, 1] ** 2])
        coef, _, rank, _ = np.linalg.lstsq(B, values[idx], rcond=None)
        # nearest grid neighbors can line up in two columns, which
        # degenerates the quadratic basis; widen until full rank
        if rank == _LSQ_COEFFS or k == total:
            return float(coef[0])
        k = min(2 * k, total)


def _uniform_spacing(axis, label):
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or len(axis) < 3:
        raise ValidationError("%s axis needs at least 3 nodes" % label)
    steps = np.diff(axis)
    if np.min(steps) <= 0:
        raise ValidationError("%s axis must increase strictly" % label)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise ValidationError("%s axis must be uniformly spaced" % label)
    return axis, float(steps[0])


class PartialLegendrePair:
    """Forward partial Legendre data at the interior nodes of an x-grid.

    Attributes
    ----------
    x_points : ndarray, shape (K, 2)
        Interior grid nodes, transversal coordinate first.
    y_points : ndarray, shape (K, 2)
        Images (x1, tangential derivative of u).
    ustar : ndarray, shape (K,)
        Transformed values x2 * u_2 - u.
    u_values : ndarray, shape (K,)
        Input values at the same nodes.
    hessians : ndarray, shape (K, 2, 2)
        Second derivatives of u used by the transform identities.
    """

    def __init__(self, x_points, y_points, ustar, u_values, hessians):
        self.x_points = x_points
        self.y_points = y_points
        self.ustar = ustar
        self.u_values = u_values
        self.hessians = hessians
        self._tree = None

    def transversal_residual(self, h):
        """Residual y1 u*_11 + h(y) det D2_tan u* at the sample points.

        The dual derivatives come from the exact transform identities
        u*_11 = -(u_11 - u_12^2 / u_22) and det D2_tan u* = 1 / u_22,
        so the residual is evaluated to the accuracy of the input
        Hessian with no resampling error.

        Parameters
        ----------
        h : callable
            Density on the dual chart, batched over points (K, 2).

        Returns
        -------
        ndarray, shape (K,)
        """
        u11 = self.hessians[:, 0, 0]
        u12 = self.hessians[:, 0, 1]
        u22 = self.hessians[:, 1, 1]
        ustar11 = -(u11 - u12 ** 2 / u22)
        hvals = np.asarray(h(self.y_points), dtype=float)
        return self.y_points[:, 0] * ustar11 + hvals / u22

    def ustar_at(self, y):
        """Evaluate the transformed field at a dual point.

        Local quadratic least squares on the nearest scattered samples;
        exact on quadratic data, third order on smooth data.
        """
        if self._tree is None:
            self._tree = cKDTree(self.y_points)
        return local_quadratic_eval(self._tree, self.y_points, self.ustar, y)

    def resample(self, axes):
        """Resample the transformed field onto a tensor grid in y.

        Parameters
        ----------
        axes : tuple of ndarray
            (y1_axis, y2_axis); the grid should sit inside the image of
            the forward map, where the scattered cloud surrounds it.

        Returns
        -------
        ndarray, shape (len(y1_axis), len(y2_axis))
        """
        y1, y2 = (np.asarray(a, dtype=float) for a in axes)
        out = np.empty((len(y1), len(y2)))
        for i, a in enumerate(y1):
            for j, b in enumerate(y2):
                out[i, j] = self.ustar_at(np.array([a, b]))
        return out


def legendre_forward(values, axes, gradient=None, hessian=None, c0=1e-8):
    """Partial Legendre transform of a grid field, tangential dual only.

    The transversal coordinate x1 is kept; the tangential one is
    replaced by the derivative of u.  Works at the interior nodes of
    the grid (a one-node collar is dropped) where full second-order
    stencils exist.

    Parameters
    ----------
    values : ndarray, shape (m1, m2)
        Field u at the tensor-grid nodes, x1 along the first axis.
    axes : tuple of ndarray
        (x1_axis, x2_axis), each uniformly spaced.
    gradient : callable, optional
        Analytic tangential derivative, batched over points (..., 2).
        Default: central differences on the grid.
    hessian : callable, optional
        Analytic Hessian at a single point (2,) -> (2, 2).
        Default: second-order stencils on the grid.
    c0 : float
        Lower bound demanded of the tangential second derivative.

    Returns
    -------
    PartialLegendrePair

    Raises
    ------
    DegenerateTransversalHessian
        If the tangential Hessian block is not positive definite on the
        chart.
    """
    values = np.asarray(values, dtype=float)
    if len(axes) != 2 or values.ndim != 2:
        raise ValidationError("planar fields only: values (m1, m2), two axes")
    x1, d1 = _uniform_spacing(axes[0], "transversal")
    x2, d2 = _uniform_spacing(axes[1], "tangential")
    if values.shape != (len(x1), len(x2)):
        raise ValidationError(
            "values shape %s does not match the axes" % (values.shape,))

    X1, X2 = np.meshgrid(x1[1:-1], x2[1:-1], indexing="ij")
    pts = np.column_stack([X1.ravel(), X2.ravel()])
    u = values[1:-1, 1:-1].ravel()

    if gradient is not None:
        g = np.asarray(gradient(pts), dtype=float)
    else:
        g = ((values[1:-1, 2:] - values[1:-1, :-2]) / (2.0 * d2)).ravel()

    K = len(pts)
    H = np.empty((K, 2, 2))
    if hessian is not None:
        for k in range(K):
            H[k] = np.asarray(hessian(pts[k]), dtype=float)
    else:
        core = values[1:-1, 1:-1]
        H[:, 0, 0] = ((values[2:, 1:-1] + values[:-2, 1:-1] - 2.0 * core)
                      / d1 ** 2).ravel()
        H[:, 1, 1] = ((values[1:-1, 2:] + values[1:-1, :-2] - 2.0 * core)
                      / d2 ** 2).ravel()
        cross = (values[2:, 2:] - values[2:, :-2]
                 - values[:-2, 2:] + values[:-2, :-2]) / (4.0 * d1 * d2)
        H[:, 0, 1] = cross.ravel()
        H[:, 1, 0] = H[:, 0, 1]

    u22 = H[:, 1, 1]
    worst = int(np.argmin(u22))
    if u22[worst] <= c0:
        raise DegenerateTransversalHessian(
            "tangential second derivative %.3e at (%.4f, %.4f)"
            % (u22[worst], pts[worst, 0], pts[worst, 1]))

    y = np.column_stack([pts[:, 0], g])
    ustar = pts[:, 1] * g - u
    return PartialLegendrePair(pts, y, ustar, u, H)


class ModelSolution:
    """Solution of the half-space model in square-root coordinates.

    Attributes
    ----------
    z1_axis, z2_axis : ndarray
        Tensor grid axes; z1 = 2 sqrt(x1) runs from the face outward.
    values : ndarray, shape (m1, m2)
        Regular part w at the nodes, so u = x1 log x1 + w(z(x)).
    report : dict
        Solve diagnostics; same keys as the chart solver plus the face
        checks.
    """

    def __init__(self, z1_axis, z2_axis, values, report):
        self.z1_axis = z1_axis
        self.z2_axis = z2_axis
        self.values = values
        self.report = report
        # local quadratic fits are exact on the quadratic model and
        # kink-free between lattice nodes, unlike bilinear interpolation
        Z1, Z2 = np.meshgrid(z1_axis, z2_axis, indexing="ij")
        self._points = np.column_stack([Z1.ravel(), Z2.ravel()])
        self._flat = np.asarray(values, dtype=float).ravel()
        self._tree = cKDTree(self._points)

    def v(self, x):
        """Regular part at x-coordinates, v(x) = w(2 sqrt(x1), x2)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        if np.min(X[:, 0]) < 0:
            raise ValidationError("transversal coordinate must be >= 0")
        z = np.column_stack([2.0 * np.sqrt(X[:, 0]), X[:, 1]])
        out = np.array([local_quadratic_eval(self._tree, self._points,
                                             self._flat, q) for q in z])
        return float(out[0]) if single else out


def _model_system(V, data):
    (I, J, z1I, d1, d2, hq) = data
    face = I == 0
    body = ~face
    Vc = V[I, J]
    D11 = np.empty(len(I))
    D11[body] = (V[I[body] + 1, J[body]] + V[I[body] - 1, J[body]]
                 - 2.0 * Vc[body]) / d1 ** 2
    D11[face] = 2.0 * (V[1, J[face]] - Vc[face]) / d1 ** 2
    ratio = np.zeros(len(I))
    ratio[body] = (V[I[body] + 1, J[body]] - V[I[body] - 1, J[body]]) \
        / (2.0 * d1 * z1I[body])
    # at the face the L'Hopital value of w_1/z1 equals w_11, so the two
    # transversal terms cancel exactly and the entry collapses to 1
    M11 = np.where(face, 1.0, 1.0 + D11 - ratio)
    D22 = (V[I, J + 1] + V[I, J - 1] - 2.0 * Vc) / d2 ** 2
    D12 = np.zeros(len(I))
    D12[body] = (V[I[body] + 1, J[body] + 1] - V[I[body] + 1, J[body] - 1]
                 - V[I[body] - 1, J[body] + 1]
                 + V[I[body] - 1, J[body] - 1]) / (4.0 * d1 * d2)
    det = M11 * D22 - D12 ** 2
    ok = (M11 > 0.0) & (det > 0.0)
    F = np.where(ok, np.sqrt(np.where(ok, det, 1.0)) - hq, np.nan)
    return F, ok, (M11, D22, D12, det)


def _model_jacobian(pieces, data, idx):
    (I, J, z1I, d1, d2, hq) = data
    M11, D22, D12, det = pieces
    K = len(I)
    rows_all = np.arange(K)
    base = 0.5 / np.sqrt(det)
    body = I >= 1

    rows, cols, vals = [], [], []

    def push(di, dj, w, sel):
        tgt = idx[I[sel] + di, J[sel] + dj]
        keep = tgt >= 0
        rows.append(rows_all[sel][keep])
        cols.append(tgt[keep])
        vals.append(w[keep])

    every = np.ones(K, dtype=bool)
    c11_center = np.where(body, -2.0 / d1 ** 2, 0.0)
    w_center = base * (D22 * c11_center + M11 * (-2.0 / d2 ** 2))
    push(0, 0, w_center, every)

    inv_z = np.zeros(K)
    inv_z[body] = 1.0 / (2.0 * d1 * z1I[body])
    c11_up = np.where(body, 1.0 / d1 ** 2 - inv_z, 0.0)
    c11_dn = np.where(body, 1.0 / d1 ** 2 + inv_z, 0.0)
    push(1, 0, (base * D22 * c11_up)[body], body)
    push(-1, 0, (base * D22 * c11_dn)[body], body)

    w_side = base * M11 / d2 ** 2
    push(0, 1, w_side, every)
    push(0, -1, w_side, every)

    w_corner = base * (-2.0 * D12) / (4.0 * d1 * d2)
    for di, dj, s in ((1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)):
        push(di, dj, (s * w_corner)[body], body)

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return coo_matrix((vals, (rows, cols)), shape=(K, K)).tocsc()


def model_solve_z(h, trace, x_depth=0.25, lateral=(-1.0, 1.0), grid=17,
                  tol=1e-10, max_iter=30, damping=0.5, init=None):
    """Solve det D2u = h/x1 near the face x1 = 0 in z-coordinates.

    The substitution z1 = 2 sqrt(x1), u = x1 log x1 + w turns the model
    equation into det(D2w + (1 - w_1/z1) e1 e1^T) = h(z1^2/4, z2) on the
    box [0, 2 sqrt(x_depth)] x lateral.  Even reflection across z1 = 0
    closes the stencils at the face, where the transversal entry of the
    operator collapses to 1 and the equation degenerates to the
    tangential trace equation.  Dirichlet data from `trace` is imposed
    on the outer boundary only; the face values are unknowns.

    Parameters
    ----------
    h : callable
        Positive density in x-coordinates, batched over points (..., 2).
    trace : callable
        Regular part of the solution on the closure, x-coordinates,
        batched; supplies the outer Dirichlet data and the initial
        iterate.
    x_depth : float
        Extent of the chart in x1; the z1 axis runs to 2 sqrt(x_depth).
    lateral : tuple of float
        (lo, hi) range of the tangential coordinate.
    grid : int or (int, int)
        Nodes along (z1, z2).
    tol : float
        Convergence threshold on the sup norm of the concave residual
        det(M)^(1/2) - h^(1/2).
    max_iter : int
        Newton iteration cap; exceeding it sets the nonconvergence flag
        instead of raising.
    damping : float
        Line search shrink factor.
    init : ndarray, optional
        Full-grid starting values overriding the trace fill.

    Returns
    -------
    (ModelSolution, dict)

    Raises
    ------
    NonEllipticIterate
        If the transversal operator entry or the determinant loses
        positivity and the line search cannot restore it.
    """
    if x_depth <= 0:
        raise ValidationError("x_depth must be positive")
    lo, hi = float(lateral[0]), float(lateral[1])
    if hi <= lo:
        raise ValidationError("lateral range must be increasing")
    if np.isscalar(grid):
        m1 = m2 = int(grid)
    else:
        m1, m2 = (int(g) for g in grid)
    if m1 < 5 or m2 < 5:
        raise ValidationError("model grid needs at least 5 nodes per axis")
    if tol <= 0:
        raise ValidationError("tolerance must be positive")

    Z = 2.0 * np.sqrt(x_depth)
    z1 = np.linspace(0.0, Z, m1)
    z2 = np.linspace(lo, hi, m2)
    d1 = z1[1] - z1[0]
    d2 = z2[1] - z2[0]
    Z1, Z2 = np.meshgrid(z1, z2, indexing="ij")
    xpts = np.stack([Z1 ** 2 / 4.0, Z2], axis=-1)

    if init is not None:
        V = np.array(init, dtype=float)
        if V.shape != (m1, m2):
            raise ValidationError("init shape must match the grid")
    else:
        V = np.asarray(trace(xpts.reshape(-1, 2)), dtype=float).reshape(m1, m2)

    mask = np.zeros((m1, m2), dtype=bool)
    mask[:m1 - 1, 1:m2 - 1] = True
    I, J = np.nonzero(mask)
    idx = np.full((m1, m2), -1, dtype=int)
    idx[mask] = np.arange(len(I))
    z1I = z1[I]

    hvals = np.asarray(h(xpts[mask]), dtype=float)
    if np.min(hvals) <= 0:
        raise ValidationError("density must stay positive on the chart")
    hq = np.sqrt(hvals)
    data = (I, J, z1I, d1, d2, hq)

    F, okv, pieces = _model_system(V, data)
    if not np.all(okv):
        raise NonEllipticIterate(
            "initial iterate loses ellipticity at %d nodes"
            % int(np.sum(~okv)))
    norm = float(np.max(np.abs(F)))
    converged = norm <= tol
    iterations = 0
    line_total = 0

    while not converged and iterations < max_iter:
        Jm = _model_jacobian(pieces, data, idx)
        step = spsolve(Jm, -F)
        if not np.all(np.isfinite(step)):
            raise SingularJacobian("model Newton system is singular")
        lam = 1.0
        saw_flag = False
        accepted = False
        while lam >= 2.0 ** -31:
            trial = V.copy()
            trial[mask] += lam * step
            Ft, okt, pt = _model_system(trial, data)
            line_total += 1
            if np.all(okt):
                nt = float(np.max(np.abs(Ft)))
                if nt <= (1.0 - 0.25 * lam) * norm + 1e-14 * (1.0 + norm):
                    V, F, pieces, norm = trial, Ft, pt, nt
                    accepted = True
                    break
            else:
                saw_flag = True
            lam *= damping
        if not accepted:
            if saw_flag:
                raise NonEllipticIterate(
                    "no elliptic descent step at iteration %d" % iterations)
            raise LineSearchStall(
                "no acceptable step at iteration %d" % iterations)
        iterations += 1
        converged = norm <= tol

    # a posteriori face checks: one-sided Neumann derivative (even
    # reflection demands zero) and the tangential trace equation
    jj = slice(1, m2 - 1)
    neumann = np.max(np.abs(
        (-3.0 * V[0, jj] + 4.0 * V[1, jj] - V[2, jj]) / (2.0 * d1)))
    d22_face = (V[0, 2:] + V[0, :-2] - 2.0 * V[0, 1:-1]) / d2 ** 2
    h_face = np.asarray(
        h(np.column_stack([np.zeros(m2 - 2), z2[1:-1]])), dtype=float)
    if np.min(d22_face) > 0:
        gap = float(np.max(np.abs(np.sqrt(d22_face) - np.sqrt(h_face))))
    else:
        gap = np.inf

    report = {
        "iterations": iterations,
        "converged": bool(converged),
        "nonconvergence": bool(not converged),
        "residual_norm": norm,
        "line_search_total": line_total,
        "grid": (m1, m2),
        "n_unknown": int(len(I)),
        "tol": tol,
        "face_neumann": float(neumann),
        "face_relation_gap": gap,
        "error_estimate": float(max(
            norm, max(d1, d2) ** 2 * max(1.0, np.ptp(V)))),
    }
    return ModelSolution(z1, z2, V, report), report
