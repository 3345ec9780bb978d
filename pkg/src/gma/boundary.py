"""Boundary data by induction over the face lattice.

The solution of the degenerate Monge-Ampere problem restricts, on every
proper face, to the solution of a problem of the same type in fewer
variables.  This module carries out that induction: it pulls the problem
back to a face chart, solves the one dimensional edge problems by
quadrature, recurses through higher dimensional faces with an interior
solver, and assembles the traces into a single evaluator with a
cross-face consistency report.
"""

import numpy as np
from concurrent.futures import ThreadPoolExecutor
from scipy.special import xlogy

from . import geometry, guillemin
from .errors import (
    IncompatibleEndpoint,
    InconsistentTraces,
    MissingTrace,
    NonSimpleVertex,
    NotAFace,
    OutsideDomain,
    QuadratureFailure,
    ValidationError,
)
from .problem import GuilleminProblem

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(15)
_ENDPOINT_LEVELS = 45
_MAX_DEPTH = 40


class RestrictedProblem:
    """A problem pulled back to a proper face in orthonormal face coordinates.

    Attributes
    ----------
    problem : GuilleminProblem
        The face problem: face polytope in chart coordinates, effective
        density, and the ambient vertex values carried over.
    face_key : tuple of int
        Active set of the face in the ambient polytope.
    absorbed : list of (int, AffineFunctional)
        Ambient facets strictly positive on the closed face, paired with
        their pullbacks; the ambient density is divided by them.
    vertex_map : list of int
        For each face-polytope vertex, the ambient vertex index.
    facet_origin : list of int
        For each face-polytope facet, the ambient facet index.
    """

    __slots__ = ("problem", "chart", "face_key", "absorbed", "vertex_map",
                 "facet_origin", "_base", "_tangent")

    def __init__(self, problem, chart, face_key, absorbed, vertex_map,
                 facet_origin, base, tangent):
        self.problem = problem
        self.chart = chart
        self.face_key = face_key
        self.absorbed = absorbed
        self.vertex_map = vertex_map
        self.facet_origin = facet_origin
        self._base = base
        self._tangent = tangent

    def to_ambient(self, xi):
        """Map face coordinates (shape (..., d)) to ambient points."""
        xi = np.asarray(xi, dtype=float)
        return xi @ self._tangent.T + self._base

    def from_face(self, x):
        """Tangential coordinates of an ambient point on the face."""
        x = np.asarray(x, dtype=float)
        return (x - self._base) @ self._tangent


def restrict_problem(problem, gamma):
    """Pull the problem back to the face cut out by the facets ``gamma``.

    Ambient facet functionals restrict to affine functions on the face.
    Those vanishing somewhere on the closed face become the facets of the
    face polytope; the strictly positive ones are absorbed into the
    effective density, which is the ambient density divided by their
    product and by the Gram determinant det(G G^t) of the active normals.
    The Gram factor comes from the limit of det D2u as the active
    functionals vanish: the Hessian splits into a singular block over the
    active normals, contributing Gram / prod(active l), and the
    tangential block of the restricted function.  The absorbed factors
    are generally nonconstant, so the effective density of an
    induced-density problem need not coincide with the face's own induced
    density.

    Parameters
    ----------
    problem : GuilleminProblem
    gamma : iterable of int
        Facet indices of a proper face of dimension >= 1.

    Returns
    -------
    RestrictedProblem

    Raises
    ------
    NotAFace
        ``gamma`` is not the active set of a proper face of positive
        dimension.
    """
    P = problem.polytope
    n = P.dimension
    key = tuple(sorted(int(i) for i in gamma))
    face = P.faces.get(key)
    if face is None or face.dim == 0 or face.dim == n:
        raise NotAFace("%s does not label a proper face of positive "
                       "dimension" % (key,))
    chart = geometry.face_chart(P, key, s=1e-6 * P.diameter)
    k = len(key)
    base = chart.base
    tangent = chart.matrix[:, k:]

    fvid = list(face.vertex_ids)
    fverts = P.vertices[fvid]
    face_functionals = []
    facet_origin = []
    absorbed = []
    for j, f in enumerate(P.facets):
        if j in key:
            continue
        g = geometry.AffineFunctional(tangent.T @ f.normal,
                                      f.offset - f.normal @ base)
        if float(np.min(f(fverts))) <= P.tau:
            face_functionals.append(g)
            facet_origin.append(j)
        else:
            absorbed.append((j, g))
    face_poly = geometry.build_polytope(face_functionals, tau_geom=P.tau)

    vertex_map = []
    for xi in face_poly.vertices:
        x = base + tangent @ xi
        d = np.linalg.norm(fverts - x, axis=1)
        vertex_map.append(fvid[int(np.argmin(d))])
    values = np.array([problem.vertex_values[i] for i in vertex_map])

    ambient_density = problem.density
    absorbed_funcs = [g for _, g in absorbed]
    G = P.normals[list(key)]
    gram = float(np.linalg.det(G @ G.T))

    def effective_density(xi):
        xi = np.asarray(xi, dtype=float)
        x = xi @ tangent.T + base
        vals = np.asarray(ambient_density(x), dtype=float) / gram
        for g in absorbed_funcs:
            vals = vals / g(xi)
        return vals

    density = guillemin.DensitySpec.from_callable(effective_density,
                                                  tag="restricted")
    name = None
    if problem.name:
        name = "%s|%s" % (problem.name, ",".join(str(i) for i in key))
    face_problem = GuilleminProblem(face_poly, density, values, name=name)
    return RestrictedProblem(face_problem, chart, key, absorbed, vertex_map,
                             facet_origin, base, tangent)


class EdgeProfile:
    """Solution of a one dimensional problem on an interval.

    The substitution u = w + a log a + b log b turns u'' = h/(ab) into
    w'' = q with q = (h - a'^2 b - b'^2 a)/(ab), which extends
    continuously to the closed interval exactly when the endpoint
    matching condition holds.  The profile stores cumulative moments of q
    on an adaptive panel decomposition and reconstructs w, w', w'' and u
    anywhere on the interval.
    """

    __slots__ = ("problem", "t_lo", "t_hi", "a_slope", "b_slope", "w0", "c",
                 "n_panels", "tol", "_starts", "_ends", "_cum0", "_cum1",
                 "_panel")

    def __init__(self, problem, t_lo, t_hi, a_slope, b_slope, w0, c,
                 starts, ends, cum0, cum1, panel, tol):
        self.problem = problem
        self.t_lo = t_lo
        self.t_hi = t_hi
        self.a_slope = a_slope
        self.b_slope = b_slope
        self.w0 = w0
        self.c = c
        self._starts = starts
        self._ends = ends
        self._cum0 = cum0
        self._cum1 = cum1
        self._panel = panel
        self.n_panels = len(starts)
        self.tol = tol

    def _moments(self, ts):
        idx = np.clip(np.searchsorted(self._starts, ts, side="right") - 1,
                      0, self.n_panels - 1)
        I0 = self._cum0[idx].copy()
        I1 = self._cum1[idx].copy()
        for m, (t, i) in enumerate(zip(ts, idx)):
            lo = self._starts[i]
            if t > lo:
                p0, p1 = self._panel(lo, min(t, self._ends[i]))[:2]
                I0[m] += p0
                I1[m] += p1
        return I0, I1

    def _check_range(self, ts):
        pad = 1e-9 * (self.t_hi - self.t_lo)
        if np.min(ts) < self.t_lo - pad or np.max(ts) > self.t_hi + pad:
            raise OutsideDomain("edge profile evaluated outside the interval")

    def w(self, ts):
        """The regular part at ts (scalar or 1d array)."""
        ts = np.asarray(ts, dtype=float)
        scalar = ts.ndim == 0
        tt = np.atleast_1d(ts)
        self._check_range(tt)
        I0, I1 = self._moments(tt)
        out = self.w0 + self.c * (tt - self.t_lo) + tt * I0 - I1
        return float(out[0]) if scalar else out

    def w_prime(self, ts):
        ts = np.asarray(ts, dtype=float)
        scalar = ts.ndim == 0
        tt = np.atleast_1d(ts)
        self._check_range(tt)
        I0, _ = self._moments(tt)
        out = self.c + I0
        return float(out[0]) if scalar else out

    def w_second(self, t):
        """w'' = q at an interior point."""
        out = self._panel(float(t), float(t))[2]
        return float(out)

    def u(self, ts):
        """The full trace w + a log a + b log b."""
        ts = np.asarray(ts, dtype=float)
        scalar = ts.ndim == 0
        tt = np.atleast_1d(ts)
        av = np.maximum(self.a_slope * (tt - self.t_lo), 0.0)
        bv = np.maximum(self.b_slope * (tt - self.t_hi), 0.0)
        out = self.w(tt) + xlogy(av, av) + xlogy(bv, bv)
        return float(out[0]) if scalar else out


def solve_edge(problem, tol=1e-10):
    """Solve a one dimensional problem on an interval by quadrature.

    With facet functionals a (vanishing at the left endpoint) and b
    (vanishing at the right), the equation u'' = h/(ab) with u = alpha at
    the endpoints is solved in the split form u = w + a log a + b log b.
    The regular part satisfies w'' = q with bounded q, integrated by
    composite 15 point Gauss-Legendre panels: a geometric ladder of
    forced breakpoints toward each endpoint absorbs the cancellation in
    q, and panels are bisected until the two-half estimate agrees with
    the whole-panel one.  Requested tolerances below about 1e-11 are
    limited by rounding in the integrand.

    Parameters
    ----------
    problem : GuilleminProblem
        One dimensional, with exactly two facets.
    tol : float
        Target absolute accuracy of the reconstructed w.

    Returns
    -------
    EdgeProfile

    Raises
    ------
    IncompatibleEndpoint
        The density does not match the value forced by the endpoint
        functionals, so q is unbounded and no solution with the split
        structure exists.
    QuadratureFailure
        Panel bisection hit the depth limit without converging.
    """
    P = problem.polytope
    if P.dimension != 1 or len(P.facets) != 2:
        raise ValidationError("solve_edge needs a one dimensional problem "
                              "with two facets")
    coords = P.vertices[:, 0]
    i_lo = int(np.argmin(coords))
    i_hi = int(np.argmax(coords))
    t_lo = float(coords[i_lo])
    t_hi = float(coords[i_hi])
    L = t_hi - t_lo
    f0, f1 = P.facets
    if abs(float(f0(P.vertices[i_lo]))) <= P.tau:
        a, b = f0, f1
    else:
        a, b = f1, f0
    a_slope = float(a.normal[0])
    b_slope = float(b.normal[0])
    alpha_lo = float(problem.vertex_values[i_lo])
    alpha_hi = float(problem.vertex_values[i_hi])

    density = problem.density

    def hfun(ts):
        return np.asarray(density(np.asarray(ts, dtype=float)[..., None]),
                          dtype=float)

    # endpoint matching: h(t_lo) = b(t_lo) a'^2 and h(t_hi) = a(t_hi) b'^2
    for t_end, other_val, slope in (
            (t_lo, b_slope * (t_lo - t_hi), a_slope),
            (t_hi, a_slope * (t_hi - t_lo), b_slope)):
        required = other_val * slope ** 2
        got = float(hfun(np.array([t_end]))[0])
        if abs(got - required) > 1e-8 * max(abs(required), abs(got)):
            raise IncompatibleEndpoint(
                "density %.17g at t=%.17g, endpoint structure needs %.17g"
                % (got, t_end, required))

    eps = np.finfo(float).eps

    def panel(lo, hi):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        s = mid + half * _GL_NODES
        av = a_slope * (s - t_lo)
        bv = b_slope * (s - t_hi)
        den = av * bv
        hs = hfun(s)
        bad = den <= 0.0
        qs = np.where(bad, 0.0,
                      (hs - a_slope ** 2 * bv - b_slope ** 2 * av)
                      / np.where(bad, 1.0, den))
        I0 = half * (qs @ _GL_WEIGHTS)
        I1 = half * ((s * qs) @ _GL_WEIGHTS)
        qmid = float(qs[len(qs) // 2])
        dmin = float(np.min(np.abs(den[~bad]))) if np.any(~bad) else 1.0
        hmax = float(np.max(np.abs(hs)))
        return I0, I1, qmid, dmin, hmax

    starts, ends, mom0, mom1 = [], [], [], []
    tscale = max(1.0, abs(t_lo), abs(t_hi))

    def refine(lo, hi, depth):
        w0, w1, _, dmin_w, hmax_w = panel(lo, hi)
        mid = 0.5 * (lo + hi)
        l0, l1, _, dmin_l, hmax_l = panel(lo, mid)
        r0, r1, _, dmin_r, hmax_r = panel(mid, hi)
        err = abs(w0 - l0 - r0) + abs(w1 - l1 - r1)
        dmin = min(dmin_w, dmin_l, dmin_r)
        hmax = max(hmax_w, hmax_l, hmax_r, 1e-30)
        noise = 64.0 * eps * (hmax / max(dmin, 1e-300)) * (hi - lo) * tscale
        if err <= max(0.01 * tol * (hi - lo) / L, noise):
            starts.append(lo)
            ends.append(mid)
            mom0.append(l0)
            mom1.append(l1)
            starts.append(mid)
            ends.append(hi)
            mom0.append(r0)
            mom1.append(r1)
            return
        if depth >= _MAX_DEPTH:
            raise QuadratureFailure(
                "panel [%.17g, %.17g] did not converge at depth %d"
                % (lo, hi, depth))
        refine(lo, mid, depth + 1)
        refine(mid, hi, depth + 1)

    ladder = 0.5 ** np.arange(1, _ENDPOINT_LEVELS + 1)
    pts = np.unique(np.concatenate([[t_lo, t_hi],
                                    t_lo + L * ladder,
                                    t_hi - L * ladder]))
    for lo, hi in zip(pts[:-1], pts[1:]):
        refine(float(lo), float(hi), 0)

    starts = np.array(starts)
    ends = np.array(ends)
    cum0 = np.concatenate([[0.0], np.cumsum(mom0)])[:-1]
    cum1 = np.concatenate([[0.0], np.cumsum(mom1)])[:-1]
    I0_tot = float(np.sum(mom0))
    I1_tot = float(np.sum(mom1))

    # w(t_lo) and w(t_hi) from the vertex values; a log a and b log b
    # vanish at their own endpoints
    b_at_lo = b_slope * (t_lo - t_hi)
    a_at_hi = a_slope * (t_hi - t_lo)
    w0 = alpha_lo - b_at_lo * np.log(b_at_lo)
    w1 = alpha_hi - a_at_hi * np.log(a_at_hi)
    G1 = t_hi * I0_tot - I1_tot
    c = (w1 - w0 - G1) / L

    return EdgeProfile(problem, t_lo, t_hi, a_slope, b_slope, float(w0),
                       float(c), starts, ends, cum0, cum1, panel, tol)


class _VertexTrace:
    __slots__ = ("key", "value", "point")

    def __init__(self, key, value, point):
        self.key = key
        self.value = value
        self.point = point


class _EdgeTrace:
    __slots__ = ("key", "restriction", "profile")

    def __init__(self, key, restriction, profile):
        self.key = key
        self.restriction = restriction
        self.profile = profile


class _FaceTrace:
    __slots__ = ("key", "restriction", "boundary", "solution")

    def __init__(self, key, restriction, boundary, solution):
        self.key = key
        self.restriction = restriction
        self.boundary = boundary
        self.solution = solution


def _eval_trace(trace, x):
    """Trace value u(x) at an ambient point on the trace's face."""
    if isinstance(trace, _VertexTrace):
        return trace.value
    res = trace.restriction
    xi = res.from_face(np.asarray(x, dtype=float))
    if isinstance(trace, _EdgeTrace):
        return trace.profile.u(float(xi[0]))
    face_poly = res.problem.polytope
    vals = face_poly.evaluate_all(xi)
    if float(np.min(vals)) <= face_poly.tau:
        return trace.boundary.u(xi)
    v = float(trace.solution.v(xi))
    return v + float(guillemin.potential_values(face_poly, xi))


class BoundaryData:
    """Complete boundary trace of the solution, face by face.

    ``u(x)`` evaluates the trace at any boundary point by dispatching on
    the active set; ``v(x)`` subtracts the canonical potential
    sum_i l_i log l_i, so it is the boundary value of the regular part.
    ``consistency`` reports the largest mismatch found between each face
    trace and its subface traces at shared sample points, along with the
    measured sensitivity of the edge profiles to the vertex values.
    """

    def __init__(self, problem, traces, consistency):
        self.problem = problem
        self.traces = traces
        self.consistency = consistency

    def u(self, x):
        """Trace value at a boundary point.

        Raises
        ------
        OutsideDomain
            x is outside the closed polytope or strictly interior.
        MissingTrace
            The active facets at x do not cut out a face.
        """
        P = self.problem.polytope
        x = np.asarray(x, dtype=float)
        vals = P.evaluate_all(x)
        if float(np.min(vals)) < -P.tau:
            raise OutsideDomain("point is outside the closed polytope")
        active = tuple(int(i) for i in np.nonzero(vals <= P.tau)[0])
        if not active:
            raise OutsideDomain("point is interior; the trace lives on the "
                                "boundary")
        key = P.canonical_active(active)
        if key is None or key not in self.traces:
            raise MissingTrace("no face with active set %s" % (active,))
        return _eval_trace(self.traces[key], x)

    def v(self, x):
        """Regular part u(x) - sum_i l_i log l_i at a boundary point."""
        P = self.problem.polytope
        x = np.asarray(x, dtype=float)
        total = self.u(x)
        return total - float(guillemin.potential_values(P, x))


def _default_solver(problem, boundary_data, grid, tol):
    from . import solver
    return solver.solve_face(problem, boundary_data, grid=grid, tol=tol)


def _subface_samples(P, face):
    ids = list(face.vertex_ids)
    pts = [P.vertices[i] for i in ids]
    if face.dim >= 1:
        pts.append(P.vertices[ids].mean(axis=0))
    return pts


def _edge_alpha_sensitivity(trace, tol):
    """Measured sup |dw/dalpha| for one edge: perturb and re-solve."""
    prob = trace.restriction.problem
    coords = prob.polytope.vertices[:, 0]
    delta = 1e-6 * max(1.0, float(np.max(np.abs(prob.vertex_values))))
    vals = np.array(prob.vertex_values, dtype=float)
    vals[int(np.argmin(coords))] += delta
    pert = GuilleminProblem(prob.polytope, prob.density, vals)
    p2 = solve_edge(pert, tol=tol)
    ts = np.linspace(float(coords.min()), float(coords.max()), 33)
    return float(np.max(np.abs(p2.w(ts) - trace.profile.w(ts))) / delta)


def build_boundary_data(problem, solver=None, grid=None, tol=1e-10,
                        threads=None, tau_match=None):
    """Assemble boundary traces for all proper faces.

    Vertices carry the prescribed values.  Edges are solved by
    :func:`solve_edge` on the restricted one dimensional problems.  Faces
    of dimension two and higher are solved with ``solver`` on their
    restricted problems, each with boundary data built recursively.
    After assembly every face trace is compared with its subface traces
    at shared points; the largest mismatch and the tolerance are reported
    and an excess raises.

    Parameters
    ----------
    problem : GuilleminProblem
    solver : callable, optional
        ``solver(problem, boundary_data, grid, tol)`` returning an object
        with a ``v(xi)`` evaluator for the regular part and a ``report``
        mapping with an ``error_estimate`` entry.  Defaults to the
        interior Newton solver.
    grid : int, optional
        Grid parameter handed to the solver.
    tol : float
        Quadrature tolerance for the edge profiles.
    threads : int, optional
        Worker threads for faces of equal dimension; sequential when
        omitted.
    tau_match : float, optional
        Consistency tolerance; defaults to ten times the largest of
        ``tol`` and the solver error estimates.

    Returns
    -------
    BoundaryData

    Raises
    ------
    NonSimpleVertex
        Some vertex does not lie on exactly n facets.
    IncompatibleEndpoint
        The density violates a vertex matching condition.
    InconsistentTraces
        A face trace and a subface trace disagree beyond tolerance.
    """
    P = problem.polytope
    n = P.dimension
    simple, report = geometry.is_simple(P)
    if not simple:
        bad = [r["index"] for r in report if not r["simple"]]
        raise NonSimpleVertex("vertices %s are not simple" % (bad,))
    if not problem.compatibility_ok():
        res = problem.compatibility_residuals()
        worst = int(np.argmax(np.abs(res)))
        raise IncompatibleEndpoint(
            "vertex %d violates the matching condition by %.3g"
            % (worst, res[worst]))
    if solver is None:
        solver = _default_solver

    traces = {}
    for key, face in P.faces.items():
        if face.dim == 0:
            vid = face.vertex_ids[0]
            traces[key] = _VertexTrace(key, float(problem.vertex_values[vid]),
                                       P.vertices[vid].copy())

    error_estimates = [tol]

    def build_one(key, d):
        res = restrict_problem(problem, key)
        if d == 1:
            return key, _EdgeTrace(key, res, solve_edge(res.problem, tol=tol))
        sub = build_boundary_data(res.problem, solver=solver, grid=grid,
                                  tol=tol, tau_match=tau_match)
        sol = solver(res.problem, sub, grid, tol)
        return key, _FaceTrace(key, res, sub, sol)

    for d in range(1, n):
        keys = [k for k, f in P.faces.items() if f.dim == d]
        if threads and threads > 1 and len(keys) > 1:
            with ThreadPoolExecutor(max_workers=int(threads)) as pool:
                built = list(pool.map(lambda k: build_one(k, d), keys))
        else:
            built = [build_one(k, d) for k in keys]
        for key, tr in built:
            traces[key] = tr
            if isinstance(tr, _FaceTrace):
                error_estimates.append(
                    float(tr.boundary.consistency["max_mismatch"]))

    checks = []
    worst = (0.0, None, None)
    for key, face in P.faces.items():
        if face.dim < 1 or face.dim >= n:
            continue
        for ck in P.subfaces.get(key, ()):
            child = P.faces[ck]
            for x in _subface_samples(P, child):
                ua = _eval_trace(traces[key], x)
                ub = _eval_trace(traces[ck], x)
                gap = abs(ua - ub)
                checks.append(gap)
                if gap > worst[0]:
                    worst = (gap, key, ck)

    max_mismatch = float(max(checks)) if checks else 0.0
    tolerance = (float(tau_match) if tau_match is not None
                 else 10.0 * max(error_estimates))
    if max_mismatch > tolerance:
        raise InconsistentTraces(
            "faces %s and %s disagree by %.3g (tolerance %.3g)"
            % (worst[1], worst[2], worst[0], tolerance))

    alpha_sens = float("nan")
    for tr in traces.values():
        if isinstance(tr, _EdgeTrace):
            alpha_sens = _edge_alpha_sensitivity(tr, tol)
            break

    consistency = {
        "max_mismatch": max_mismatch,
        "tolerance": tolerance,
        "pairs": len(checks),
        "alpha_sensitivity": alpha_sens,
    }
    return BoundaryData(problem, traces, consistency)
