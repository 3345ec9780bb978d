"""Damped Newton solver for the regular part on reference charts.

The unknown is the regular part v = u - sum_i l_i log l_i sampled on a
finite difference lattice.  The problem is first mapped to a reference
domain (the standard simplex when the polytope has n + 1 facets, the
unit box when it is an affine image of a box); functional values are
preserved by the map, so boundary data and the singular part transfer
without change.  The interior residual is

    R_i = log det(D2 v + sum_j n_j n_j^t / l_j) - log h + sum_j log l_j

with the mixed second differences formed from diagonal and antidiagonal
stencils.  The singular part is analytic and never differenced, so the
scheme is exact whenever v restricted to the lattice has cubic accuracy.

Also here: pointwise barrier bounds (convex interpolation from above,
vertex minorants minus a power of the facet product from below) and a
strict convexity monitor for computed solutions.
"""

import itertools
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import LinearNDInterpolator
from scipy.optimize import linprog
from scipy.sparse.linalg import spsolve

from . import geometry
from .boundary import build_boundary_data
from .errors import (BarrierConstantSearchFailed, ChartTooLarge,
                     LineSearchStall, NonConvexIterate, OutsideDomain,
                     SingularJacobian, ValidationError)
from .guillemin import guillemin_potential, potential_values

_EPS_LADDER = 10.0 ** -np.arange(0, 13)
_A_LADDER_MAX = 41
_VERTEX_LADDER = 2.0 ** -np.arange(1, 46)


def _lex_sorted(vertices):
    order = np.lexsort(vertices.T[::-1])
    return vertices[order]


def _simplex_map(P):
    verts = _lex_sorted(P.vertices)
    b = verts[0]
    M = (verts[1:] - b).T
    return M, b


def _box_map(P):
    n = P.dimension
    if len(P.vertices) != 2 ** n:
        return None
    unit = P.normals / np.linalg.norm(P.normals, axis=1, keepdims=True)
    paired = [False] * len(unit)
    for i in range(len(unit)):
        if paired[i]:
            continue
        hits = [j for j in range(len(unit)) if j != i and not paired[j]
                and np.linalg.norm(unit[i] + unit[j]) <= 1e-9]
        if len(hits) != 1:
            return None
        paired[i] = paired[hits[0]] = True
    order = np.lexsort(P.vertices.T[::-1])
    v0_id = order[0]
    b = P.vertices[v0_id]
    a0 = set(P.vertex_active[v0_id])
    edges = []
    for j, a in enumerate(P.vertex_active):
        if j != v0_id and len(a0 & set(a)) == n - 1:
            edges.append(P.vertices[j] - b)
    if len(edges) != n:
        return None
    edges.sort(key=lambda e: tuple(e))
    M = np.array(edges).T
    ref = np.linalg.solve(M, (P.vertices - b).T).T
    if np.max(np.abs(ref - np.round(ref))) > 1e-9:
        return None
    if not np.all((np.round(ref) >= 0) & (np.round(ref) <= 1)):
        return None
    return M, b


def _lattice(kind, n, m):
    idx = np.array(list(itertools.product(range(m), repeat=n)), dtype=int)
    if kind == "simplex":
        idx = idx[idx.sum(axis=1) <= m - 1]
        interior = np.all(idx >= 1, axis=1) & (idx.sum(axis=1) <= m - 2)
    else:
        interior = np.all((idx >= 1) & (idx <= m - 2), axis=1)
    return idx, np.nonzero(interior)[0], np.nonzero(~interior)[0]


class GridChart:
    """Reference finite difference lattice for one global or face problem.

    Parameters
    ----------
    problem : GuilleminProblem
        Must have n + 1 facets (simplex) or be an affine image of a box
        with 2n facets; anything else raises ChartTooLarge.
    m : int
        Nodes per edge of the reference domain; the mesh width is
        1/(m - 1).

    Attributes
    ----------
    nodes : ndarray, shape (K, n)
        Reference coordinates of every lattice node, in a fixed
        lexicographic order.
    interior, boundary : ndarray of node ids
    ref_problem : GuilleminProblem
        The problem transported to the reference domain; functional
        values agree with the original at corresponding points.
    """

    def __init__(self, problem, m=17):
        if m < 3:
            raise ValidationError("grid needs at least 3 nodes per edge")
        P = problem.polytope
        n = P.dimension
        N = len(P.facets)
        if N == n + 1:
            kind = "simplex"
            M, b = _simplex_map(P)
        elif N == 2 * n:
            mapped = _box_map(P)
            if mapped is None:
                raise ChartTooLarge(
                    "%d facets in dimension %d but not an affine box" % (N, n))
            kind = "box"
            M, b = mapped
        else:
            raise ChartTooLarge(
                "global chart covers simplices and affine boxes only; "
                "got %d facets in dimension %d" % (N, n))

        self.problem = problem
        self.kind = kind
        self.m = int(m)
        self.delta = 1.0 / (m - 1)
        self.matrix = M
        self.shift = b
        self._inv = np.linalg.inv(M)
        self.ref_problem = problem.transform(M, b)

        idx, interior, bdry = _lattice(kind, n, m)
        self._idx = idx
        self.nodes = idx * self.delta
        self.interior = interior
        self.boundary = bdry
        pos = {tuple(t): k for k, t in enumerate(idx)}
        self._int_pos = np.full(len(idx), -1, dtype=int)
        self._int_pos[interior] = np.arange(len(interior))

        offsets = [np.zeros(n, dtype=int)]
        for a in range(n):
            e = np.zeros(n, dtype=int)
            e[a] = 1
            offsets.extend([e.copy(), -e])
        self._pairs = list(itertools.combinations(range(n), 2))
        for a, c in self._pairs:
            e = np.zeros(n, dtype=int)
            e[a] = 1
            e[c] = -1
            offsets.extend([e.copy(), -e])
        self.offsets = np.array(offsets)
        nb = np.empty((len(interior), len(offsets)), dtype=int)
        for k, node in enumerate(interior):
            base = idx[node]
            for o, off in enumerate(offsets):
                nb[k, o] = pos[tuple(base + off)]
        self.neighbors = nb

        Q = self.ref_problem.polytope
        gvals = Q.evaluate_all(self.nodes[interior])
        if np.min(gvals) <= 0:
            raise ValidationError("interior lattice node on the boundary")
        self._svals = np.einsum("kj,ja,jb->kab", 1.0 / gvals,
                                Q.normals, Q.normals)
        h = np.asarray(self.ref_problem.density(self.nodes[interior]),
                       dtype=float)
        if np.min(h) <= 0:
            raise ValidationError("density must be positive at lattice nodes")
        self.rhslog = np.log(h) - np.sum(np.log(gvals), axis=1)

    def to_problem(self, xi):
        xi = np.asarray(xi, dtype=float)
        return xi @ self.matrix.T + self.shift

    def to_reference(self, x):
        x = np.asarray(x, dtype=float)
        return (x - self.shift) @ self._inv.T

    def discrete_hessians(self, v):
        """D2 v + singular part at every interior node, reference frame."""
        v = np.asarray(v, dtype=float)
        n = self.nodes.shape[1]
        nb = self.neighbors
        d2 = self.delta ** 2
        vc = v[nb[:, 0]]
        H = np.array(self._svals, copy=True)
        diag = np.empty((len(nb), n))
        for a in range(n):
            diag[:, a] = (v[nb[:, 1 + 2 * a]] + v[nb[:, 2 + 2 * a]]
                          - 2 * vc) / d2
            H[:, a, a] += diag[:, a]
        base = 1 + 2 * n
        for p, (a, c) in enumerate(self._pairs):
            anti = (v[nb[:, base + 2 * p]] + v[nb[:, base + 2 * p + 1]]
                    - 2 * vc) / d2
            mixed = 0.5 * (diag[:, a] + diag[:, c] - anti)
            H[:, a, c] += mixed
            H[:, c, a] += mixed
        return H


def assemble_residual(v, problem, chart):
    """Interior residual of the discrete equation and the flagged nodes.

    Parameters
    ----------
    v : ndarray, shape (len(chart.nodes),)
        Regular part values on every lattice node.
    problem : GuilleminProblem
        The problem the chart was built for.
    chart : GridChart

    Returns
    -------
    R : ndarray over chart.interior
        log det applied to the discrete Hessian minus the log of the
        right hand side; NaN where the discrete Hessian is not positive
        definite.
    flagged : ndarray
        Node ids whose discrete Hessian fails positivity; these are not
        evaluated.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (len(chart.nodes),):
        raise ValidationError("value array does not match the lattice")
    if problem is not None and problem is not chart.problem:
        raise ValidationError("chart was built for a different problem")
    H = chart.discrete_hessians(v)
    sign, logabs = np.linalg.slogdet(H)
    bad = sign <= 0
    R = logabs - chart.rhslog
    R[bad] = np.nan
    return R, chart.interior[bad]


def _jacobian_matrix(chart, v):
    """Sparse derivative of the interior residual in the interior values."""
    H = chart.discrete_hessians(v)
    Hinv = np.linalg.inv(H)
    n = chart.nodes.shape[1]
    d2 = chart.delta ** 2
    K = len(chart.interior)
    tr = np.trace(Hinv, axis1=1, axis2=2)
    offsum = 0.5 * (Hinv.sum(axis=(1, 2)) - tr)
    weights = [(-2.0 * tr - 2.0 * offsum) / d2]
    rowsum = Hinv.sum(axis=2)
    for a in range(n):
        weights.extend([rowsum[:, a] / d2] * 2)
    for a, c in chart._pairs:
        weights.extend([-Hinv[:, a, c] / d2] * 2)

    rows = []
    cols = []
    data = []
    base_rows = np.arange(K)
    for o, w in enumerate(weights):
        nbr = chart.neighbors[:, o]
        cpos = chart._int_pos[nbr]
        keep = cpos >= 0
        rows.append(base_rows[keep])
        cols.append(cpos[keep])
        data.append(w[keep])
    J = sp.coo_matrix((np.concatenate(data),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(K, K))
    return J.tocsc()


def _harmonic_lift(chart, v):
    """Fill interior values by a discrete Laplace solve from the boundary."""
    n = chart.nodes.shape[1]
    d2 = chart.delta ** 2
    K = len(chart.interior)
    rows = [np.arange(K)]
    cols = [np.arange(K)]
    data = [np.full(K, -2.0 * n / d2)]
    rhs = np.zeros(K)
    for o in range(1, 1 + 2 * n):
        nbr = chart.neighbors[:, o]
        cpos = chart._int_pos[nbr]
        keep = cpos >= 0
        rows.append(np.nonzero(keep)[0])
        cols.append(cpos[keep])
        data.append(np.full(int(keep.sum()), 1.0 / d2))
        rhs[~keep] -= v[nbr[~keep]] / d2
    A = sp.coo_matrix((np.concatenate(data),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(K, K)).tocsc()
    return spsolve(A, rhs)


class RegularizedSolution:
    """Computed regular part on a chart; u adds the singular part back.

    Evaluation maps the query point to reference coordinates, applies a
    piecewise linear interpolant of the lattice values, and for u adds
    sum_i l_i log l_i analytically.
    """

    def __init__(self, problem, chart, values, report):
        self.problem = problem
        self.chart = chart
        self.values = np.asarray(values, dtype=float)
        self.report = report
        self._interp = None

    def _eval_ref(self, xi):
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if xi.shape[1] == 1:
            order = np.argsort(self.chart.nodes[:, 0])
            return np.interp(xi[:, 0], self.chart.nodes[order, 0],
                             self.values[order])
        if self._interp is None:
            self._interp = LinearNDInterpolator(self.chart.nodes, self.values)
        out = self._interp(xi)
        miss = ~np.isfinite(out)
        if np.any(miss):
            # rounding can push boundary points marginally outside the
            # hull; snap those to the nearest lattice node
            Q = self.chart.ref_problem.polytope
            vals = np.atleast_2d(Q.evaluate_all(xi[miss]))
            if np.min(vals) < -Q.tau:
                raise OutsideDomain("evaluation outside the polytope")
            d = np.linalg.norm(xi[miss][:, None, :]
                               - self.chart.nodes[None, :, :], axis=-1)
            out[miss] = self.values[np.argmin(d, axis=1)]
        return out

    def v(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        vals = self._eval_ref(self.chart.to_reference(np.atleast_2d(x)))
        return float(vals[0]) if single else vals

    def u(self, x):
        x = np.asarray(x, dtype=float)
        pot = potential_values(self.problem.polytope, x)
        return self.v(x) + pot


def newton_solve(problem, boundary=None, grid=None, tol=1e-10, max_iter=30,
                 damping=0.5, init=None):
    """Solve the discrete problem by damped Newton iteration.

    Parameters
    ----------
    problem : GuilleminProblem
    boundary : BoundaryData, optional
        Built on demand when omitted.
    grid : GridChart, int, or None
        A prebuilt chart, or nodes per edge (default 17).
    tol : float
        Convergence threshold on the sup norm of the residual.
    max_iter : int
        Newton iteration cap; exceeding it is reported, not raised.
    damping : float
        Backtracking factor for the line search.
    init : ndarray, optional
        Initial interior values; default is a discrete harmonic lift of
        the boundary values.

    Returns
    -------
    (RegularizedSolution, dict)
        The report carries iterations, converged, residual_norm,
        line_search_total, nonconvergence, and error_estimate.

    Raises
    ------
    ChartTooLarge, NonConvexIterate, SingularJacobian, LineSearchStall
    """
    if isinstance(grid, GridChart):
        chart = grid
        if chart.problem is not problem:
            raise ValidationError("chart was built for a different problem")
    else:
        chart = GridChart(problem, m=17 if grid is None else int(grid))
    if boundary is None:
        boundary = build_boundary_data(problem, grid=chart.m,
                                       tol=min(tol, 1e-10))

    v = np.zeros(len(chart.nodes))
    for node in chart.boundary:
        v[node] = boundary.v(chart.to_problem(chart.nodes[node]))
    if init is not None:
        v[chart.interior] = np.asarray(init, dtype=float)
    else:
        v[chart.interior] = _harmonic_lift(chart, v)

    R, flagged = assemble_residual(v, problem, chart)
    if flagged.size:
        # convexify the start by blending toward the zero interior field,
        # whose discrete Hessian is the positive singular part alone
        blend = 1.0
        base = v[chart.interior].copy()
        for _ in range(60):
            blend *= 0.5
            v[chart.interior] = blend * base
            R, flagged = assemble_residual(v, problem, chart)
            if flagged.size == 0:
                break
        else:
            raise NonConvexIterate("initial iterate is not convexifiable")

    norm = float(np.max(np.abs(R)))
    iterations = 0
    ls_total = 0
    converged = norm <= tol
    while not converged and iterations < max_iter:
        J = _jacobian_matrix(chart, v)
        step = spsolve(J, -R)
        if not np.all(np.isfinite(step)):
            raise SingularJacobian(
                "linearized system failed at iteration %d" % iterations)
        lam = 1.0
        accepted = False
        while lam > 2.0 ** -31:
            vt = v.copy()
            vt[chart.interior] += lam * step
            Rt, fl = assemble_residual(vt, problem, chart)
            ls_total += 1
            if fl.size == 0:
                nt = float(np.max(np.abs(Rt)))
                if nt <= (1.0 - 0.25 * lam) * norm + 1e-14 * (1.0 + norm):
                    v, R, norm = vt, Rt, nt
                    accepted = True
                    break
            lam *= damping
        if not accepted:
            raise LineSearchStall(
                "no acceptable step at iteration %d, residual %.3e"
                % (iterations, norm))
        iterations += 1
        converged = norm <= tol

    vrange = float(np.ptp(v)) if len(v) else 0.0
    report = {
        "iterations": iterations,
        "converged": bool(converged),
        "nonconvergence": bool(not converged),
        "residual_norm": norm,
        "line_search_total": ls_total,
        "grid": chart.m,
        "kind": chart.kind,
        "n_interior": int(len(chart.interior)),
        "tol": float(tol),
        "error_estimate": float(max(norm,
                                    chart.delta ** 2 * max(1.0, vrange))),
    }
    solution = RegularizedSolution(problem, chart, v, report)
    return solution, report


def solve_face(problem, boundary_data, grid=None, tol=None):
    """Solve one face problem; the entry point the trace builder calls."""
    sol, _ = newton_solve(problem, boundary=boundary_data, grid=grid,
                          tol=1e-10 if tol is None else tol)
    return sol


class BarrierBounds(NamedTuple):
    lower: object
    upper: object
    constant: float


def _boundary_samples(problem, boundary, per_edge):
    """Vertices plus uniform and endpoint-geometric edge samples."""
    P = problem.polytope
    pts = [P.vertices]
    vals = [np.asarray(problem.vertex_values, dtype=float)]
    ts = np.concatenate([np.linspace(0.0, 1.0, per_edge + 2)[1:-1],
                         _VERTEX_LADDER, 1.0 - _VERTEX_LADDER])
    ts = np.unique(ts)
    for key, face in P.faces.items():
        if face.dim != 1 or not key:
            continue
        ends = P.vertices[list(face.vertex_ids)]
        if len(ends) != 2:
            continue
        seg = ends[0] + ts[:, None] * (ends[1] - ends[0])
        pts.append(seg)
        vals.append(np.array([boundary.u(p) for p in seg]))
    return np.vstack(pts), np.concatenate(vals)


def barrier_bounds(problem, boundary, x, alpha_exp=None, a_cap=1e12,
                   edge_samples=16, rng=None):
    """Pointwise enclosure of the solution between explicit barriers.

    The upper bound is the smallest convex combination of boundary
    values reproducing x (a linear program over vertex and edge
    samples); it pinches to the prescribed value at every vertex.  The
    lower bound takes the best affine vertex minorant, calibrated on the
    same samples, minus A (prod_i l_i)^alpha with the constant A found
    on a doubling ladder from the curvature certificate of the power
    barrier.  Both bounds are sampled calibrations, not formal proofs.

    Parameters
    ----------
    problem : GuilleminProblem
    boundary : BoundaryData
    x : array_like, shape (n,) or (m, n)
    alpha_exp : float, optional
        Exponent in (0, 1/n); default 1/(2n).
    a_cap : float
        Largest admissible constant before the search gives up.

    Returns
    -------
    BarrierBounds
        lower, upper (floats or arrays matching x) and the constant A.

    Raises
    ------
    BarrierConstantSearchFailed
        If the curvature certificate fails at a sample or the ladder
        exceeds a_cap.
    """
    P = problem.polytope
    n = P.dimension
    alpha = 1.0 / (2.0 * n) if alpha_exp is None else float(alpha_exp)
    if not 0.0 < alpha < 1.0 / n:
        raise ValidationError("exponent must lie in (0, 1/n)")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    for row in X:
        if not P.contains(row):
            raise OutsideDomain("barrier query outside the polytope")

    spts, svals = _boundary_samples(problem, boundary, edge_samples)

    ones = np.ones((1, len(spts)))
    A_eq = np.vstack([spts.T, ones])
    upper = np.empty(len(X))
    for k, xi in enumerate(X):
        res = linprog(svals, A_eq=A_eq, b_eq=np.append(xi, 1.0),
                      bounds=(0.0, None), method="highs")
        if not res.success:
            raise ValidationError(
                "interpolation program failed at %s: %s" % (xi, res.message))
        upper[k] = res.fun

    # lower: best affine minorant anchored at each vertex
    sl = P.evaluate_all(spts)
    Xl = P.evaluate_all(X)
    phi = np.full(len(X), -np.inf)
    dtol = 1e-12 * P.diameter
    for vp, act in enumerate(P.vertex_active):
        a_p = float(np.asarray(problem.vertex_values)[vp])
        ds = sl[:, list(act)].sum(axis=1)
        dX = Xl[:, list(act)].sum(axis=1)
        mask = ds > dtol
        for eps in _EPS_LADDER:
            ratio = (a_p - eps - svals[mask]) / ds[mask]
            K = 1.05 * max(0.0, float(np.max(ratio)))
            phi = np.maximum(phi, a_p - eps - K * dX)

    # constant for the power barrier from the curvature certificate
    gen = np.random.default_rng(0) if rng is None else rng
    samples = [geometry.sample_interior(P, 256, gen)]
    center = P.interior_point()
    for p in P.vertices:
        for k in range(1, 9):
            samples.append((p + 10.0 ** -k * (center - p))[None, :])
    Y = np.vstack(samples)
    lY = P.evaluate_all(Y)
    keep = np.min(lY, axis=1) > P.tau
    Y, lY = Y[keep], lY[keep]
    hY = np.asarray(problem.density(Y), dtype=float)
    need = 0.0
    for y, ly, hy in zip(Y, lY, hY):
        bvec = (P.normals / ly[:, None]).sum(axis=0)
        Q = np.einsum("j,ja,jb->ab", 1.0 / ly ** 2, P.normals, P.normals)
        Mmat = alpha * Q - alpha * alpha * np.outer(bvec, bvec)
        detM = float(np.linalg.det(Mmat))
        if detM <= 0:
            raise BarrierConstantSearchFailed(
                "curvature certificate failed at %s" % (y,))
        g = float(np.prod(ly))
        need = max(need, hy / (g ** (1.0 + n * alpha) * detM))
    target = need ** (1.0 / n)
    constant = None
    for j in range(_A_LADDER_MAX):
        cand = 2.0 ** j
        if cand > a_cap:
            break
        if cand >= target:
            constant = cand
            break
    if constant is None:
        raise BarrierConstantSearchFailed(
            "constant ladder exceeded the cap %.3e (needs %.3e)"
            % (a_cap, target))

    gX = np.clip(np.prod(Xl, axis=1), 0.0, None)
    lower = phi - constant * gX ** alpha
    if single:
        return BarrierBounds(float(lower[0]), float(upper[0]), constant)
    return BarrierBounds(lower, upper, constant)


class CallableSolution:
    """Adapter giving closed form potentials the computed-solution shape."""

    def __init__(self, problem, u):
        self.problem = problem
        self._u = u

    def u(self, x):
        x = np.asarray(x, dtype=float)
        out = self._u(x)
        return float(out) if np.ndim(out) == 0 or x.ndim == 1 else out


def _fd_min_eigenvalue(u, P, rng):
    pts = geometry.sample_interior(P, 15, rng, margin=0.15)
    n = P.dimension
    step = np.finfo(float).eps ** 0.25 * max(1.0, P.diameter)
    worst = np.inf
    for x in pts:
        H = np.empty((n, n))
        for a in range(n):
            ea = np.zeros(n)
            ea[a] = step
            H[a, a] = (u(x + ea) - 2.0 * u(x) + u(x - ea)) / step ** 2
            for c in range(a + 1, n):
                ec = np.zeros(n)
                ec[c] = step
                H[a, c] = H[c, a] = (u(x + ea + ec) - u(x + ea - ec)
                                     - u(x - ea + ec) + u(x - ea - ec)) \
                    / (4.0 * step ** 2)
        worst = min(worst, float(np.linalg.eigvalsh(H)[0]))
    return worst


def strict_convexity_monitor(solution, facet=None, distances=None):
    """Convexity margin and boundary gradient growth of a solution.

    Reports the smallest eigenvalue of the (discrete or finite
    difference) Hessian of u over interior nodes, and the ratio of the
    inward directional derivative to |log distance| along a ray hitting
    one facet; the ratio settling at a positive level is the expected
    logarithmic gradient blow-up of the singular part.

    Parameters
    ----------
    solution : RegularizedSolution or CallableSolution
    facet : int, optional
        Facet index for the ray; default 0.
    distances : array_like, optional
        Distances from the facet along the inward unit normal, in
        problem units; default a geometric ladder down to 1e-5 of the
        diameter.

    Returns
    -------
    dict with min_eigenvalue, gradient_ratios, distances, facet,
    log_blowup.
    """
    problem = solution.problem
    P = problem.polytope
    n = P.dimension
    diam = P.diameter
    j = 0 if facet is None else int(facet)
    face = P.faces.get((j,))
    if face is None:
        raise ValidationError("facet %d bounds no face" % j)
    foot = P.vertices[list(face.vertex_ids)].mean(axis=0)
    nj = P.normals[j]
    d = nj / np.linalg.norm(nj)

    if distances is None:
        distances = diam * np.array([1e-1, 3e-2, 1e-2, 1e-3, 1e-4, 1e-5])
    distances = np.asarray(distances, dtype=float)
    keep = np.array([P.contains(foot + t * d, tol=-P.tau)
                     for t in distances])
    distances = distances[keep]
    if distances.size == 0:
        raise ValidationError("no ray point lies inside the polytope")

    grid_based = hasattr(solution, "chart")
    ratios = np.empty(len(distances))
    for k, t in enumerate(distances):
        xt = foot + t * d
        if grid_based:
            grad_pot = guillemin_potential(P, xt)[1]
            s = max(t / 2.0, 0.5 * solution.chart.delta * diam)
            while not P.contains(xt + s * d, tol=-P.tau):
                s *= 0.5
            dv = (solution.v(xt + s * d) - solution.v(xt)) / s
            val = abs(float(grad_pot @ d) + dv)
        else:
            s = t / 4.0
            val = abs(solution.u(xt + s * d) - solution.u(xt - s * d)) \
                / (2.0 * s)
        lj = float(P.evaluate_all(xt)[j])
        ratios[k] = val / max(abs(np.log(lj)), 0.5)

    if grid_based:
        H = solution.chart.discrete_hessians(solution.values)
        back = solution.chart._inv
        Hx = np.einsum("ca,kcd,db->kab", back, H, back)
        min_eig = float(np.min(np.linalg.eigvalsh(Hx)[:, 0]))
    else:
        min_eig = _fd_min_eigenvalue(solution.u, P, np.random.default_rng(2))

    return {
        "min_eigenvalue": min_eig,
        "gradient_ratios": ratios,
        "distances": distances,
        "facet": j,
        "log_blowup": bool(ratios[-1] > 0.2),
    }
