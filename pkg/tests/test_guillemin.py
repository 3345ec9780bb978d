import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gma import geometry, guillemin
from gma.errors import MissingTrace, NonSimpleVertex, OutsideDomain, SingularEvaluation

from oracles import fd_gradient, fd_hessian


def segment():
    return geometry.build_polytope([
        geometry.AffineFunctional([1.0], 0.0),
        geometry.AffineFunctional([-1.0], -1.0),
    ])


def simplex2d():
    return geometry.build_polytope([
        geometry.AffineFunctional([1.0, 0.0], 0.0),
        geometry.AffineFunctional([0.0, 1.0], 0.0),
        geometry.AffineFunctional([-1.0, -1.0], -1.0),
    ])


def unit_square():
    return geometry.build_polytope([
        geometry.AffineFunctional([1.0, 0.0], 0.0),
        geometry.AffineFunctional([-1.0, 0.0], -1.0),
        geometry.AffineFunctional([0.0, 1.0], 0.0),
        geometry.AffineFunctional([0.0, -1.0], -1.0),
    ])


def trapezoid():
    # vertices (0,0), (0,1), (1,1), (2,0); two antiparallel facets
    return geometry.build_polytope([
        geometry.AffineFunctional([1.0, 0.0], 0.0),
        geometry.AffineFunctional([0.0, 1.0], 0.0),
        geometry.AffineFunctional([0.0, -1.0], -1.0),
        geometry.AffineFunctional([-1.0, -1.0], -2.0),
    ])


def octahedron():
    import itertools
    fs = []
    for signs in itertools.product([1.0, -1.0], repeat=3):
        fs.append(geometry.AffineFunctional(-np.array(signs), -1.0))
    return geometry.build_polytope(fs)


def trapezoid_density_closed_form(P, x):
    # pairwise expansion worked out by hand for this facet list; the
    # antiparallel pair contributes nothing
    l = P.evaluate_all(x)
    return (l[2] * l[3] + l[1] * l[3] + l[1] * l[2]
            + l[0] * l[2] + l[0] * l[1])


class TestPotential:
    def test_segment_midpoint(self):
        P = segment()
        val, grad, hess = guillemin.guillemin_potential(P, [0.5])
        assert np.isclose(val, -np.log(2.0))
        assert np.isclose(grad[0], 0.0)
        assert np.isclose(hess[0, 0], 4.0)

    def test_simplex_centroid(self):
        P = simplex2d()
        val, grad, hess = guillemin.guillemin_potential(P, [1 / 3, 1 / 3])
        assert np.isclose(val, -np.log(3.0))
        expect = 3.0 * np.eye(2) + 3.0 * np.ones((2, 2))
        assert np.allclose(hess, expect)

    def test_vertex_value_convention(self):
        P = simplex2d()
        val, grad, hess = guillemin.guillemin_potential(P, [0.0, 0.0])
        assert val == 0.0
        assert grad is None and hess is None

    def test_matches_finite_differences(self):
        P = trapezoid()
        pts = geometry.sample_interior(P, 5, np.random.default_rng(1),
                                       margin=0.05)
        f = lambda x: guillemin.guillemin_potential(P, x)[0]
        for x in pts:
            val, grad, hess = guillemin.guillemin_potential(P, x)
            assert np.allclose(grad, fd_gradient(f, x), atol=1e-7)
            assert np.allclose(hess, fd_hessian(f, x), atol=1e-5)

    def test_outside_raises(self):
        with pytest.raises(OutsideDomain):
            guillemin.guillemin_potential(simplex2d(), [2.0, 2.0])

    def test_values_batched(self):
        P = simplex2d()
        xs = geometry.sample_interior(P, 10, np.random.default_rng(2))
        vals = guillemin.potential_values(P, xs)
        singles = [guillemin.guillemin_potential(P, x)[0] for x in xs]
        assert np.allclose(vals, singles)


class TestInducedDensity:
    def test_simplex_is_one(self):
        P = simplex2d()
        pts = geometry.sample_interior(P, 20, np.random.default_rng(3))
        for x in pts:
            assert abs(guillemin.guillemin_density(P, x) - 1.0) <= 1e-12

    def test_square_is_one(self):
        P = unit_square()
        pts = geometry.sample_interior(P, 20, np.random.default_rng(4))
        for x in pts:
            assert abs(guillemin.guillemin_density(P, x) - 1.0) <= 1e-12

    def test_boundary_values_simplex(self):
        P = simplex2d()
        # continuous extension equals 1 on the closed simplex
        for x in ([0.0, 0.0], [0.5, 0.0], [0.0, 0.3], [0.5, 0.5]):
            assert abs(guillemin.guillemin_density(P, x) - 1.0) <= 1e-12

    def test_trapezoid_closed_form(self):
        P = trapezoid()
        rng = np.random.default_rng(5)
        pts = geometry.sample_interior(P, 20, rng)
        for x in pts:
            expect = trapezoid_density_closed_form(P, x)
            assert np.isclose(guillemin.guillemin_density(P, x), expect,
                              rtol=1e-10)
        assert np.isclose(guillemin.guillemin_density(P, [0.0, 0.0]), 2.0)
        assert np.isclose(guillemin.guillemin_density(P, [0.5, 0.5]), 1.75)

    def test_interior_and_expansion_routes_agree(self):
        P = trapezoid()
        rng = np.random.default_rng(6)
        pts = geometry.sample_interior(P, 20, rng, margin=0.05)
        for x in pts:
            naive = guillemin.guillemin_density(P, x)
            expanded = guillemin.guillemin_density(P, x, force_expansion=True)
            assert np.isclose(naive, expanded, rtol=1e-10)

    def test_octahedron_vanishes_at_vertex(self):
        P = octahedron()
        vals = [guillemin.guillemin_density(P, [0.0, 0.0, 1.0 - eps])
                for eps in (1e-1, 1e-2, 1e-3)]
        assert vals[0] > vals[1] > vals[2] > 0

    def test_oscillation_shrinks_at_boundary(self):
        P = trapezoid()
        rng = np.random.default_rng(7)
        # boundary points on facet 3, away from its endpoints
        for _ in range(5):
            t = rng.uniform(0.2, 0.8)
            p = np.array([2.0, 0.0]) * (1 - t) + np.array([1.0, 1.0]) * t
            oscs = []
            for r in (0.2, 0.1, 0.05):
                box = p + rng.uniform(-r, r, size=(400, 2))
                box = box[np.min(P.evaluate_all(box), axis=1) > 0]
                vals = [guillemin.guillemin_density(P, x) for x in box]
                oscs.append(np.max(vals) - np.min(vals))
            assert oscs[2] < oscs[0]
            assert oscs[2] < 0.6 * oscs[0]

    def test_outside_raises(self):
        with pytest.raises(OutsideDomain):
            guillemin.guillemin_density(simplex2d(), [1.0, 1.0])


class TestVertexCompatibility:
    def test_simplex_origin(self):
        P = simplex2d()
        h = guillemin.DensitySpec.constant(1.0)
        vid = next(i for i, a in enumerate(P.vertex_active) if a == (0, 1))
        assert abs(guillemin.check_vertex_compatibility(P, h, vid)) <= 1e-14

    def test_simplex_other_vertex(self):
        P = simplex2d()
        h = guillemin.DensitySpec.constant(1.0)
        vid = int(np.argmin(np.linalg.norm(P.vertices - [1.0, 0.0], axis=1)))
        assert abs(guillemin.check_vertex_compatibility(P, h, vid)) <= 1e-14

    def test_square_constant_two(self):
        P = unit_square()
        h = guillemin.DensitySpec.constant(2.0)
        vid = int(np.argmin(np.linalg.norm(P.vertices, axis=1)))
        assert np.isclose(guillemin.check_vertex_compatibility(P, h, vid), 1.0)

    def test_induced_density_compatible_everywhere(self):
        for P in (simplex2d(), unit_square(), trapezoid()):
            h = guillemin.DensitySpec.guillemin(P)
            for vid in range(len(P.vertices)):
                r = guillemin.check_vertex_compatibility(P, h, vid)
                assert abs(r) <= 1e-10

    def test_perturbed_density_compatible(self):
        P = trapezoid()
        h = guillemin.DensitySpec.perturbed(P, 0.3)
        for vid in range(len(P.vertices)):
            assert abs(guillemin.check_vertex_compatibility(P, h, vid)) <= 1e-10

    def test_non_simple_vertex_raises(self):
        P = octahedron()
        h = guillemin.DensitySpec.constant(1.0)
        with pytest.raises(NonSimpleVertex):
            guillemin.check_vertex_compatibility(P, h, 0)

    def test_rescaling_covariance(self):
        # the required vertex value picks up prod(lam_inactive) * prod(lam_active^2)
        P = trapezoid()
        rng = np.random.default_rng(8)
        lam = rng.uniform(0.5, 2.0, size=len(P.facets))
        scaled = geometry.build_polytope(
            [geometry.AffineFunctional(lam[i] * f.normal, lam[i] * f.offset)
             for i, f in enumerate(P.facets)])
        zero = guillemin.DensitySpec.constant(0.0)
        for vid, active in enumerate(P.vertex_active):
            req = -guillemin.check_vertex_compatibility(P, zero, vid)
            # match the vertex in the rescaled polytope
            p = P.vertices[vid]
            vid2 = int(np.argmin(np.linalg.norm(scaled.vertices - p, axis=1)))
            req2 = -guillemin.check_vertex_compatibility(scaled, zero, vid2)
            inactive = [i for i in range(len(P.facets)) if i not in active]
            factor = np.prod(lam[inactive]) * np.prod(lam[list(active)]) ** 2
            assert np.isclose(req2, factor * req, rtol=1e-10)


class TestDensitySpec:
    def test_constant(self):
        h = guillemin.DensitySpec.constant(3.0)
        assert h.tag == "analytic"
        assert h([0.2, 0.7]) == 3.0

    def test_polynomial(self):
        h = guillemin.DensitySpec.polynomial({(0, 0): 1.0, (2, 1): 4.0}, 2)
        assert np.isclose(h([0.5, 2.0]), 1.0 + 4.0 * 0.25 * 2.0)
        assert h.tag == "analytic"

    def test_guillemin_tag(self):
        P = simplex2d()
        h = guillemin.DensitySpec.guillemin(P)
        assert h.tag == "guillemin-induced"
        assert np.isclose(h([0.2, 0.3]), 1.0)

    def test_perturbed_formula(self):
        P = unit_square()
        h = guillemin.DensitySpec.perturbed(P, 0.5)
        x = np.array([0.25, 0.5])
        prod_l = np.prod(P.evaluate_all(x))
        assert np.isclose(h(x), 1.0 * (1.0 + 0.5 * prod_l))
        assert h.tag == "perturbed"

    def test_gradient_hessian_fd(self):
        h = guillemin.DensitySpec.polynomial({(1, 1): 2.0, (0, 2): 1.0}, 2)
        x = np.array([0.4, 0.7])
        g = h.gradient(x)
        assert np.allclose(g, [2 * 0.7, 2 * 0.4 + 2 * 0.7], atol=1e-8)
        H = h.hessian(x)
        assert np.allclose(H, [[0.0, 2.0], [2.0, 2.0]], atol=1e-5)


class TestSmoothExtension:
    def test_two_dim_formula(self):
        v = lambda x: x[..., 0] + x[..., 1] + x[..., 0] * x[..., 1]
        rng = np.random.default_rng(9)
        pts = rng.uniform(0, 1, size=(50, 2))
        F = guillemin.smooth_extension(v, pts, k=2)
        assert np.allclose(F, pts[:, 0] + pts[:, 1])

    def test_reproduces_traces_on_axes(self):
        v = lambda x: np.sin(x[..., 0]) + x[..., 1] ** 2 + x[..., 0] * x[..., 1] ** 3
        rng = np.random.default_rng(10)
        pts = rng.uniform(0, 1, size=(100, 2))
        pts[:50, 0] = 0.0
        pts[50:, 1] = 0.0
        F = guillemin.smooth_extension(v, pts, k=2)
        assert np.allclose(F, v(pts), atol=1e-15)

    def test_three_dim_two_active(self):
        v = lambda x: np.cos(x[..., 0] + 2 * x[..., 1]) * (1 + x[..., 2])
        x = np.array([0.3, 0.4, 0.5])
        direct = (v(np.array([0.3, 0.0, 0.5])) + v(np.array([0.0, 0.4, 0.5]))
                  - v(np.array([0.0, 0.0, 0.5])))
        F = guillemin.smooth_extension(v, x, k=2)
        assert np.isclose(F, direct)

    def test_constant_in_singular_coords_telescopes(self):
        v = lambda x: 1.0 + x[..., 2] ** 2 if x.ndim else None
        x = np.array([0.3, 0.4, 0.5])
        F = guillemin.smooth_extension(lambda y: 1.0 + y[..., 2] ** 2, x, k=2)
        assert np.isclose(F, 1.0 + 0.25)

    def test_missing_trace(self):
        def broken(x):
            out = np.asarray(x[..., 0], dtype=float)
            return np.where(np.asarray(x[..., 1]) == 0.0, np.nan, out)
        with pytest.raises(MissingTrace):
            guillemin.smooth_extension(broken, np.array([0.2, 0.3]), k=2)


class TestScaledHessian:
    def test_model_field_is_identity(self):
        # F = sum x_a log x_a + |x''|^2 / 2
        G = guillemin.QuadraticField(np.diag([0.0, 0.0, 1.0]))
        for x in ([0.2, 0.4, -0.3], [1e-8, 0.5, 2.0], [0.0, 0.1, 0.0]):
            M = guillemin.scaled_hessian(G, x, k=2, includes_log=True)
            assert np.allclose(M.matrix, np.eye(3), atol=1e-12)

    def test_quadratic_at_ones(self):
        G = guillemin.QuadraticField(np.eye(3))
        M = guillemin.scaled_hessian(G, [1.0, 1.0, 1.0], k=3,
                                     includes_log=False)
        assert np.allclose(M.matrix, np.eye(3))

    def test_hand_example(self):
        # F = x1 log x1 + x1 x2: entries (1,1)=1, (1,2)=sqrt(x1), (2,2)=0
        class Bilinear:
            def hessian(self, x):
                return np.array([[0.0, 1.0], [1.0, 0.0]])
        x = np.array([0.25, 0.3])
        M = guillemin.scaled_hessian(Bilinear(), x, k=1, includes_log=True)
        expect = np.array([[1.0, 0.5], [0.5, 0.0]])
        assert np.allclose(M.matrix, expect, atol=1e-12)

    def test_hand_example_fd_cross_check(self):
        F = lambda x: x[0] * np.log(x[0]) + x[0] * x[1]
        x = np.array([0.25, 0.3])
        H = fd_hessian(F, x, h=1e-5)
        W = np.diag([np.sqrt(0.25), 1.0])
        assert np.allclose(W @ H @ W, [[1.0, 0.5], [0.5, 0.0]], atol=1e-5)

    def test_det_identity(self):
        rng = np.random.default_rng(11)
        A = rng.normal(size=(3, 3))
        G = guillemin.QuadraticField(A @ A.T + 0.5 * np.eye(3))
        x = np.array([0.3, 0.7, -0.2])
        k = 2
        M = guillemin.scaled_hessian(G, x, k=k, includes_log=True)
        F = lambda y: (y[0] * np.log(y[0]) + y[1] * np.log(y[1])
                       + 0.5 * y @ G.Q @ y)
        H = fd_hessian(F, x, h=1e-4)
        lhs = np.linalg.det(M.matrix)
        rhs = x[0] * x[1] * np.linalg.det(H)
        assert np.isclose(lhs, rhs, rtol=1e-6)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6))
    def test_det_identity_random(self, seed):
        rng = np.random.default_rng(seed)
        n, k = 3, rng.integers(1, 4)
        A = rng.normal(size=(n, n))
        G = guillemin.QuadraticField(A @ A.T + np.eye(n))
        x = np.empty(n)
        x[:k] = rng.uniform(0.1, 1.0, size=k)
        x[k:] = rng.uniform(-1.0, 1.0, size=n - k)
        M = guillemin.scaled_hessian(G, x, k=int(k), includes_log=True)
        D2 = G.Q.copy()
        for a in range(k):
            D2[a, a] += 1.0 / x[a]
        assert np.isclose(np.linalg.det(M.matrix),
                          np.prod(x[:k]) * np.linalg.det(D2), rtol=1e-9)

    def test_singular_black_box_raises(self):
        F = lambda x: x[0] * np.log(x[0]) + 0.5 * x[1] ** 2
        with pytest.raises(SingularEvaluation):
            guillemin.scaled_hessian(F, np.array([0.0, 0.5]), k=1,
                                     includes_log=False)
