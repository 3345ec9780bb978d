"""Simple convex polytopes cut out by affine functionals.

A polytope is stored as the intersection of halfspaces l_i(x) >= 0 with
l_i(x) = normal_i . x - offset_i.  Construction enumerates vertices by
solving every n-subset of facet equations, validates boundedness and
nondegeneracy, and builds the face lattice from vertex active sets.  The
raw functionals are preserved exactly as given (several downstream
quantities are not invariant under rescaling them); normalization happens
only inside chart construction, where the scale factors are recorded.
"""

import itertools

import numpy as np
from scipy.optimize import linprog

from .errors import (
    ChartTooLarge,
    DegenerateNormals,
    EmptyInterior,
    NotAFace,
    RedundantFacet,
    Unbounded,
)

_PARALLEL_TOL = 1e-9
_RANK_TOL = 1e-8


class AffineFunctional:
    """Affine function l(x) = normal . x - offset.

    Parameters
    ----------
    normal : array_like, shape (n,)
        Nonzero gradient of the functional.
    offset : float
        Constant so that the zero set is {x : normal . x = offset}.
    """

    __slots__ = ("normal", "offset")

    def __init__(self, normal, offset):
        self.normal = np.atleast_1d(np.asarray(normal, dtype=float))
        self.offset = float(offset)
        if self.normal.ndim != 1:
            raise ValueError("normal must be one dimensional")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.normal - self.offset

    def __repr__(self):
        return "AffineFunctional(normal=%s, offset=%r)" % (
            np.array2string(self.normal, separator=", "), self.offset)


class Face:
    """One face of the lattice: canonical active set, dimension, vertices."""

    __slots__ = ("active", "dim", "vertex_ids")

    def __init__(self, active, dim, vertex_ids):
        self.active = tuple(active)
        self.dim = int(dim)
        self.vertex_ids = tuple(vertex_ids)

    def __repr__(self):
        return "Face(active=%s, dim=%d, nverts=%d)" % (
            self.active, self.dim, len(self.vertex_ids))


def _affine_rank(points, scale):
    points = np.asarray(points, dtype=float)
    if len(points) <= 1:
        return 0
    diffs = points[1:] - points[0]
    sv = np.linalg.svd(diffs, compute_uv=False)
    return int(np.sum(sv > _RANK_TOL * max(1.0, scale)))


class Polytope:
    """Bounded intersection of halfspaces with vertex and face data.

    Not meant to be constructed directly; use :func:`build_polytope`.
    Instances are immutable after construction and safe to share across
    threads.
    """

    def __init__(self, facets, vertices, vertex_active, faces, subfaces, tau):
        self.facets = tuple(facets)
        self.dimension = self.facets[0].normal.size
        self.vertices = np.asarray(vertices, dtype=float)
        self.vertex_active = tuple(tuple(a) for a in vertex_active)
        self.faces = dict(faces)
        self.subfaces = dict(subfaces)
        self.tau = float(tau)
        self._normals = np.array([f.normal for f in self.facets])
        self._offsets = np.array([f.offset for f in self.facets])

    @property
    def normals(self):
        return self._normals

    @property
    def offsets(self):
        return self._offsets

    def evaluate_all(self, x):
        """Values of every facet functional at x; batched over leading axes."""
        x = np.asarray(x, dtype=float)
        return x @ self._normals.T - self._offsets

    def contains(self, x, tol=None):
        tol = self.tau if tol is None else tol
        return bool(np.min(self.evaluate_all(x)) >= -tol)

    @property
    def diameter(self):
        d = getattr(self, "_diameter", None)
        if d is None:
            v = self.vertices
            d = float(np.max(np.linalg.norm(v[:, None, :] - v[None, :, :],
                                            axis=-1)))
            object.__setattr__(self, "_diameter", d)
        return d

    def interior_point(self):
        """Chebyshev center: deepest interior point by linear programming."""
        x, r = _chebyshev(self._normals, self._offsets)
        if r <= 0:
            raise EmptyInterior("no interior point")
        return x

    def canonical_active(self, gamma):
        """Smallest face active set containing gamma, or None if no vertex has it."""
        g = set(gamma)
        hits = [set(a) for a in self.vertex_active if g <= set(a)]
        if not hits:
            return None
        return tuple(sorted(set.intersection(*hits)))

    def __repr__(self):
        return "Polytope(n=%d, facets=%d, vertices=%d)" % (
            self.dimension, len(self.facets), len(self.vertices))


def _chebyshev(normals, offsets):
    m, n = normals.shape
    norms = np.linalg.norm(normals, axis=1)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-normals, norms[:, None]])
    res = linprog(c, A_ub=A_ub, b_ub=-offsets,
                  bounds=[(None, None)] * (n + 1), method="highs")
    if res.status == 2:
        return np.zeros(n), -np.inf
    if not res.success:
        raise EmptyInterior("interior-point LP failed: " + res.message)
    return res.x[:-1], res.x[-1]


def _has_recession_direction(normals):
    m, n = normals.shape
    for j in range(n):
        for sign in (1.0, -1.0):
            c = np.zeros(n)
            c[j] = -sign
            res = linprog(c, A_ub=-normals, b_ub=np.zeros(m),
                          bounds=[(-1.0, 1.0)] * n, method="highs")
            if res.success and -res.fun > 1e-9:
                return True
    return False


def build_polytope(functionals, tau_geom=None):
    """Build a bounded polytope {x : l_i(x) >= 0 for all i}.

    Vertices are enumerated by solving all n-subsets of facet equations
    and filtering by feasibility; the face lattice is the intersection
    closure of the vertex active sets.

    Parameters
    ----------
    functionals : sequence of AffineFunctional
        The facet functionals, kept in the given order.
    tau_geom : float, optional
        Geometric tolerance.  Defaults to 1e-9 times the diameter.

    Returns
    -------
    Polytope

    Raises
    ------
    DegenerateNormals
        A normal is zero or two normals are positively parallel.
    Unbounded
        The halfspace intersection admits a recession direction.
    EmptyInterior
        No point satisfies all inequalities strictly.
    RedundantFacet
        Some functional supports no face of dimension n-1.
    """
    facets = list(functionals)
    if not facets:
        raise DegenerateNormals("no functionals given")
    normals = np.array([f.normal for f in facets], dtype=float)
    offsets = np.array([f.offset for f in facets], dtype=float)
    m, n = normals.shape

    lengths = np.linalg.norm(normals, axis=1)
    if np.any(lengths == 0):
        bad = int(np.argmin(lengths))
        raise DegenerateNormals("facet %d has zero normal" % bad)
    units = normals / lengths[:, None]
    for i, j in itertools.combinations(range(m), 2):
        if np.linalg.norm(units[i] - units[j]) < _PARALLEL_TOL:
            raise DegenerateNormals(
                "facets %d and %d have positively parallel normals" % (i, j))

    if _has_recession_direction(normals):
        raise Unbounded("halfspace intersection has a recession direction")
    center, radius = _chebyshev(normals, offsets)
    scale = max(1.0, float(np.abs(center).max()))
    if radius <= 1e-12 * scale:
        raise EmptyInterior("halfspace intersection has empty interior")

    candidates = []
    for subset in itertools.combinations(range(m), n):
        A = normals[list(subset)]
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] <= 1e-12 * sv[0]:
            continue
        x = np.linalg.solve(A, offsets[list(subset)])
        slack = normals @ x - offsets
        if np.min(slack) >= -1e-9 * max(1.0, np.abs(x).max()):
            candidates.append(x)
    if not candidates:
        raise EmptyInterior("no vertex found")
    pts = np.array(candidates)
    span = max(1.0, float(np.abs(pts).max()))
    rounded = np.round(pts / (1e-9 * span)).astype(np.int64)
    _, keep = np.unique(rounded, axis=0, return_index=True)
    pts = pts[sorted(keep)]

    diam = float(np.max(np.linalg.norm(pts[:, None, :] - pts[None, :, :],
                                       axis=-1)))
    tau = float(tau_geom) if tau_geom is not None else 1e-9 * diam

    values = pts @ normals.T - offsets
    keep = np.min(values, axis=1) >= -tau
    pts = pts[keep]
    values = values[keep]
    vertex_active = [tuple(np.nonzero(np.abs(row) <= tau)[0]) for row in values]

    for i in range(m):
        on_facet = pts[[i in a for a in vertex_active]]
        if _affine_rank(on_facet, diam) != n - 1:
            raise RedundantFacet(
                "facet %d supports no face of dimension %d" % (i, n - 1))

    # face lattice: intersection closure of vertex active sets
    sets = {frozenset(a) for a in vertex_active}
    while True:
        fresh = set()
        for a, b in itertools.combinations(sets, 2):
            c = a & b
            if c not in sets:
                fresh.add(c)
        if not fresh:
            break
        sets |= fresh
    sets.add(frozenset())

    faces = {}
    for s in sets:
        ids = [k for k, a in enumerate(vertex_active) if s <= set(a)]
        if not ids:
            continue
        canon = frozenset.intersection(*[frozenset(vertex_active[k])
                                         for k in ids])
        key = tuple(sorted(canon))
        if key in faces:
            continue
        dim = _affine_rank(pts[ids], diam)
        faces[key] = Face(key, dim, ids)

    subfaces = {}
    items = list(faces.values())
    for g in items:
        kids = [f.active for f in items
                if f.dim == g.dim - 1 and set(f.vertex_ids) < set(g.vertex_ids)]
        subfaces[g.active] = tuple(sorted(kids))

    return Polytope(facets, pts, vertex_active, faces, subfaces, tau)


def is_simple(P):
    """Check that every vertex lies on exactly n facets.

    Parameters
    ----------
    P : Polytope

    Returns
    -------
    ok : bool
    report : list of dict
        One entry per vertex with keys ``index``, ``point``, ``active``,
        ``n_active``, ``simple`` and ``conditioning`` (the ratio of extreme
        singular values of the active normal matrix, a warning signal for
        nearly degenerate vertices).
    """
    n = P.dimension
    report = []
    ok = True
    for k, active in enumerate(P.vertex_active):
        A = P.normals[list(active)]
        sv = np.linalg.svd(A, compute_uv=False)
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
        simple = len(active) == n
        ok = ok and simple
        report.append({
            "index": k,
            "point": P.vertices[k].copy(),
            "active": tuple(active),
            "n_active": len(active),
            "simple": simple,
            "conditioning": cond,
        })
    return ok, report


class FaceChart:
    """Affine chart straightening a face to a coordinate corner.

    The map is x = base + M xi with the first ``codim`` reference
    coordinates proportional to the active functionals:
    l_active[a](x) = kappa[a] * xi[a] with kappa[a] > 0.  The reference
    domain is [0, s]^codim x [-s, s]^(n - codim).
    """

    __slots__ = ("active", "base", "matrix", "kappa", "s", "codim", "_inv")

    def __init__(self, active, base, matrix, kappa, s):
        self.active = tuple(active)
        self.base = np.asarray(base, dtype=float)
        self.matrix = np.asarray(matrix, dtype=float)
        self.kappa = np.asarray(kappa, dtype=float)
        self.s = float(s)
        self.codim = len(self.active)
        self._inv = np.linalg.inv(self.matrix)

    @property
    def dimension(self):
        return self.base.size

    @property
    def det_abs(self):
        return abs(float(np.linalg.det(self.matrix)))

    def to_ambient(self, xi):
        xi = np.asarray(xi, dtype=float)
        return xi @ self.matrix.T + self.base

    def from_ambient(self, x):
        x = np.asarray(x, dtype=float)
        return (x - self.base) @ self._inv.T

    def pullback_functional(self, functional):
        """The composition l(x(xi)) as an affine functional of xi."""
        n = functional.normal
        return AffineFunctional(self.matrix.T @ n,
                                functional.offset - n @ self.base)


def face_chart(P, gamma, s):
    """Affine chart adapted to the face with active set ``gamma``.

    Parameters
    ----------
    P : Polytope
    gamma : iterable of int
        Facet indices cutting out the face; must be the canonical active
        set of a face of dimension n - len(gamma).
    s : float
        Reference box half-size; the box is [0, s]^k x [-s, s]^(n-k).

    Returns
    -------
    FaceChart

    Raises
    ------
    NotAFace
        gamma is not a face label, or the face has the wrong dimension
        (non-simple corner).
    ChartTooLarge
        The image of the reference box leaves the closed polytope.
    """
    key = tuple(sorted(int(g) for g in gamma))
    n = P.dimension
    if key not in P.faces:
        raise NotAFace("%s is not the active set of a face" % (key,))
    face = P.faces[key]
    k = len(key)
    if face.dim != n - k:
        raise NotAFace(
            "face %s has dimension %d, expected %d" % (key, face.dim, n - k))

    G = P.normals[list(key)]
    sv = np.linalg.svd(G, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise NotAFace("active normals of %s are linearly dependent" % (key,))

    base = P.vertices[list(face.vertex_ids)].mean(axis=0)

    B = G.T @ np.linalg.inv(G @ G.T)
    col_norms = np.linalg.norm(B, axis=0)
    transversal = B / col_norms
    kappa = 1.0 / col_norms

    if k < n:
        _, _, Vt = np.linalg.svd(G, full_matrices=True)
        tangent = Vt[k:].T
        for j in range(tangent.shape[1]):
            lead = int(np.argmax(np.abs(tangent[:, j])))
            if tangent[lead, j] < 0:
                tangent[:, j] = -tangent[:, j]
        M = np.hstack([transversal, tangent])
    else:
        M = transversal

    others = [i for i in range(len(P.facets)) if i not in key]
    axes = [(0.0, s)] * k + [(-s, s)] * (n - k)
    for corner in itertools.product(*axes):
        x = base + M @ np.asarray(corner)
        for j in others:
            if P.facets[j](x) <= P.tau:
                raise ChartTooLarge(
                    "chart for %s with s=%g leaves the polytope at facet %d"
                    % (key, s, j))
    return FaceChart(key, base, M, kappa, s)


def sample_interior(P, count, rng, margin=0.0):
    """Uniform rejection sample of ``count`` interior points.

    Points satisfy min_i l_i(x) > margin.  Deterministic for a given rng
    state.
    """
    lo = P.vertices.min(axis=0)
    hi = P.vertices.max(axis=0)
    out = []
    need = int(count)
    guard = 0
    while need > 0:
        guard += 1
        if guard > 10000:
            raise RuntimeError("rejection sampling stalled; margin too large?")
        batch = rng.uniform(lo, hi, size=(max(4 * need, 64), P.dimension))
        vals = P.evaluate_all(batch)
        good = batch[np.min(vals, axis=1) > margin]
        take = good[:need]
        if take.size:
            out.append(take)
            need -= len(take)
    return np.vstack(out)[:count]
