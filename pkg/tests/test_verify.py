import numpy as np
import pytest
from scipy.special import xlogy

from gma import geometry, guillemin, solver, verify
from gma.errors import ConstantSearchFailed, OutsideQuadrant
from gma.problem import GuilleminProblem

from oracles import fd_hessian


def unit_square():
    fs = [geometry.AffineFunctional([1.0, 0.0], 0.0),
          geometry.AffineFunctional([-1.0, 0.0], -1.0),
          geometry.AffineFunctional([0.0, 1.0], 0.0),
          geometry.AffineFunctional([0.0, -1.0], -1.0)]
    return geometry.build_polytope(fs)


def standard_simplex():
    fs = [geometry.AffineFunctional([1.0, 0.0], 0.0),
          geometry.AffineFunctional([0.0, 1.0], 0.0),
          geometry.AffineFunctional([-1.0, -1.0], -1.0)]
    return geometry.build_polytope(fs)


class TestLiouvilleOracle:
    def test_unit_point(self):
        out = verify.liouville_oracle(np.array([1.0, 1.0]), 2)
        assert out.value == 0.0
        assert np.allclose(out.gradient, [1.0, 1.0])
        assert np.allclose(out.hessian, np.eye(2))
        assert abs(out.residual) <= 1e-15

    def test_diagonal_point(self):
        x = np.array([0.5, 0.25, 0.7])
        out = verify.liouville_oracle(x, 2)
        assert np.isclose(np.linalg.det(out.hessian), 8.0, rtol=1e-13)
        assert abs(out.residual) <= 1e-13
        expect = 0.5 * np.log(0.5) + 0.25 * np.log(0.25) + 0.5 * 0.49
        assert np.isclose(out.value, expect, rtol=1e-14)

    def test_single_degenerate_direction_matches_model(self):
        # k = 1 is the half-space model with h = 1: u = x1 log x1 + |x2|^2/2
        rng = np.random.default_rng(3)
        for _ in range(20):
            x = np.array([rng.uniform(0.05, 2.0), rng.normal()])
            out = verify.liouville_oracle(x, 1)
            assert np.isclose(out.value,
                              xlogy(x[0], x[0]) + 0.5 * x[1] ** 2,
                              rtol=1e-14, atol=1e-14)
            assert np.allclose(out.hessian,
                               np.diag([1.0 / x[0], 1.0]), rtol=1e-14)
            assert abs(x[0] * np.linalg.det(out.hessian) - 1.0) <= 1e-14

    def test_outside_quadrant(self):
        with pytest.raises(OutsideQuadrant):
            verify.liouville_oracle(np.array([0.0, 1.0]), 1)
        with pytest.raises(OutsideQuadrant):
            verify.liouville_oracle(np.array([0.3, -0.2, 1.0]), 2)
        # tangential coordinates may have any sign
        out = verify.liouville_oracle(np.array([0.3, -0.2]), 1)
        assert np.isfinite(out.value)

    def test_thousand_random_points(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for k in (1, 2, 3):
            for n in range(k, 5):
                x = np.empty((1000, n))
                x[:, :k] = 10.0 ** rng.uniform(-2, 1, (1000, k))
                x[:, k:] = rng.normal(0.0, 2.0, (1000, n - k))
                for row in x:
                    out = verify.liouville_oracle(row, k)
                    worst = max(worst, abs(out.residual))
        assert worst <= 1e-12


class TestVerifyBarrier:
    def test_product_power_square(self):
        P = unit_square()
        check = verify.verify_barrier(
            "product-power", P, samples=400,
            constants={"alpha_exp": 0.25})
        assert check.barrier_id == "product-power"
        assert check.margin_differential >= 0.0
        assert check.constants["C"] > 0.0
        assert len(check.samples) >= 400
        assert check.margin_boundary == 0.0

    def test_product_power_simplex_default_alpha(self):
        P = standard_simplex()
        check = verify.verify_barrier("product-power", P, samples=400)
        assert check.constants["alpha_exp"] == 0.25
        assert check.margin_differential >= 0.0

    def test_product_power_hessian_matches_fd(self):
        P = unit_square()
        alpha = 0.25
        rng = np.random.default_rng(5)
        pts = geometry.sample_interior(P, 5, rng, margin=0.2)

        def field(x):
            return float(np.prod(P.evaluate_all(x)) ** alpha)

        for x in pts:
            closed = verify.product_power_hessian(P, alpha, x)
            numeric = fd_hessian(field, x, 1e-5)
            assert np.allclose(closed, numeric, rtol=1e-4, atol=1e-6)

    def test_product_power_impossible_exponent(self):
        # far above 1/n the curvature certificate fails near the
        # vertices and no ladder constant verifies
        P = standard_simplex()
        with pytest.raises(ConstantSearchFailed):
            verify.verify_barrier(
                "product-power", P, samples=200,
                constants={"alpha_exp": 0.9})

    def test_face_lift_equality_calibration(self):
        def model_u(x):
            x = np.asarray(x, dtype=float)
            return xlogy(x[..., 0], x[..., 0]) + 0.5 * x[..., 1] ** 2

        check = verify.verify_barrier("face-lift", samples=300, u=model_u)
        assert abs(check.margin_differential) <= 1e-10
        assert abs(check.margin_boundary) <= 1e-10
        assert check.constants["C0"] == 1.0

    def test_face_lift_margin_sign(self):
        ones = None  # default density is h = 1
        surplus = verify.verify_barrier(
            "face-lift", samples=200, constants={"C0": 2.0}, h=ones)
        assert surplus.margin_differential > 0.0
        deficit = verify.verify_barrier(
            "face-lift", samples=200, constants={"C0": 0.5})
        assert deficit.margin_differential < 0.0

    def test_g_concavity_planar(self):
        check = verify.verify_barrier("g-concavity", samples=200)
        assert check.barrier_id == "g-concavity"
        assert len(check.samples) == 200
        assert check.margin_differential >= 0.0

    def test_g_concavity_three_coordinates(self):
        check = verify.verify_barrier("g-concavity", samples=100, k=3)
        assert check.margin_differential >= 0.0

    def test_g_concavity_detects_weak_constant(self):
        check = verify.verify_barrier(
            "g-concavity", samples=200, constants={"C0": 0.01})
        assert check.margin_differential < 0.0

    def test_unknown_barrier_id(self):
        with pytest.raises(Exception):
            verify.verify_barrier("no-such-barrier")


def make_field(fn, x1, x2):
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    return fn(X1, X2), (x1, x2)


def model_levels(fn, depth, span, ms):
    levels = []
    for m in ms:
        x1 = np.linspace(0.0, depth, m)
        x2 = np.linspace(span[0], span[1], m)
        levels.append(make_field(fn, x1, x2))
    return levels


class TestEstimators:
    def test_lipschitz_model_is_zero(self):
        levels = model_levels(lambda a, b: 0.5 * b ** 2,
                              0.3, (-0.5, 0.5), (9, 17, 33))
        rep = verify.estimate_lipschitz(levels)
        assert rep.estimate_id == "lipschitz"
        assert all(r == 0.0 for r in rep.ratios)
        assert rep.bounded

    def test_lipschitz_closed_form_edge(self):
        # regular part of the simplex potential near the facet x1 = 0
        def vfield(a, b):
            return xlogy(b, b) + xlogy(1.0 - a - b, 1.0 - a - b)

        levels = model_levels(vfield, 0.3, (0.25, 0.55), (9, 17, 33))
        rep = verify.estimate_lipschitz(levels)
        assert all(np.isfinite(rep.ratios))
        assert rep.ratios[-1] <= 1.0
        assert rep.bounded

    def test_weighted_hessian_model_exact(self):
        levels = model_levels(lambda a, b: 0.5 * b ** 2,
                              0.3, (-0.5, 0.5), (9, 17, 33))
        rep = verify.estimate_weighted_hessian(levels)
        assert rep.estimate_id == "weighted-hessian"
        # n - 1 tangential directions each contribute 1
        assert all(abs(r - 1.0) <= 1e-11 for r in rep.ratios)
        assert rep.bounded

    def test_weighted_hessian_closed_form_edge(self):
        # window kept away from the far corner: the sup of the weighted
        # combination converges as the one-node collar shrinks, and too
        # close to the corner that convergence itself exceeds the ten
        # percent trend policy at coarse grids
        def vfield(a, b):
            return xlogy(b, b) + xlogy(1.0 - a - b, 1.0 - a - b)

        levels = model_levels(vfield, 0.25, (0.25, 0.45), (9, 17, 33))
        rep = verify.estimate_weighted_hessian(levels)
        assert all(np.isfinite(rep.ratios))
        assert rep.bounded

    def test_face_asymptotics_separable_field_vanishes(self):
        # the inclusion-exclusion extension reproduces separable fields,
        # so the remainder is identically zero
        def vfield(a, b):
            return xlogy(1.0 - a, 1.0 - a) + xlogy(1.0 - b, 1.0 - b)

        levels = model_levels(vfield, 0.5, (0.0, 0.5), (9, 17, 33))
        reports = verify.estimate_face_asymptotics(levels)
        assert set(reports) == {"root-product", "quadratic", "full-product"}
        for rep in reports.values():
            assert all(r <= 1e-12 for r in rep.ratios)

    def test_face_asymptotics_factored_remainder(self):
        def g(a, b):
            return np.exp(a - b)

        def vfield(a, b):
            return np.cos(a) + b ** 2 - 1.0 + a * b * g(a, b)

        levels = model_levels(vfield, 0.5, (0.0, 0.5), (9, 17, 33))
        reports = verify.estimate_face_asymptotics(levels)
        m = 33
        x = np.linspace(0.0, 0.5, m)
        X1, X2 = np.meshgrid(x[1:-1], x[1:-1], indexing="ij")
        gmax = float(np.max(g(X1, X2)))
        assert abs(reports["full-product"].ratios[-1] - gmax) <= 1e-12
        # for two degenerate coordinates the quadratic symmetric sum is
        # the same single product, so those two ratios coincide
        assert reports["quadratic"].ratios == reports["full-product"].ratios
        dmax = float(np.max(np.sqrt(X1 * X2)))
        assert reports["root-product"].ratios[-1] \
            <= reports["full-product"].ratios[-1] * dmax + 1e-12

    def test_face_asymptotics_scale_covariance(self):
        def g(a, b):
            return 1.0 + 0.5 * np.sin(3.0 * a) * np.cos(2.0 * b)

        lam = 4.0
        m = 17
        base_axis = np.linspace(0.0, 0.5, m)
        base = make_field(lambda a, b: a * b * g(a, b),
                          base_axis, base_axis)
        scaled_axis = base_axis / lam
        scaled = make_field(
            lambda a, b: (lam * a) * (lam * b) * g(lam * a, lam * b) / lam,
            scaled_axis, scaled_axis)
        rep_base = verify.estimate_face_asymptotics([base] * 3)
        rep_scaled = verify.estimate_face_asymptotics([scaled] * 3)
        r42b = rep_base["root-product"].ratios[-1]
        r42s = rep_scaled["root-product"].ratios[-1]
        assert abs(r42s - r42b) <= 1e-8 * max(1.0, r42b)
        r48b = rep_base["full-product"].ratios[-1]
        r48s = rep_scaled["full-product"].ratios[-1]
        assert abs(r48s - lam * r48b) <= 1e-8 * max(1.0, lam * r48b)

    def test_face_asymptotics_numeric_quadrant_solve(self):
        # local solve of det D2u = 1/(x1 x2) on the unit square with
        # traces from the closed-form quadrant solution
        P = unit_square()

        def hfun(x):
            x = np.asarray(x, dtype=float)
            return (1.0 - x[..., 0]) * (1.0 - x[..., 1])

        prob = GuilleminProblem(
            P, guillemin.DensitySpec.from_callable(hfun), 0.0)

        class LiouvilleBoundary:
            def v(self, x):
                x = np.asarray(x, dtype=float)
                u = xlogy(x[0], x[0]) + xlogy(x[1], x[1])
                return float(u - guillemin.potential_values(P, x))

        levels = []
        for m in (9, 17, 33):
            sol, rep = solver.newton_solve(
                prob, boundary=LiouvilleBoundary(), grid=m, tol=1e-11)
            assert rep["converged"]
            probe = verify.solution_probe(sol)
            ax = np.linspace(0.0, 0.5, m)
            vals = np.empty((m, m))
            for i, a in enumerate(ax):
                for j, b in enumerate(ax):
                    x = np.array([a, b])
                    vals[i, j] = probe(x) \
                        + xlogy(1.0 - a, 1.0 - a) + xlogy(1.0 - b, 1.0 - b)
            levels.append((vals, (ax, ax)))
        reports = verify.estimate_face_asymptotics(levels)
        for rep in reports.values():
            assert all(np.isfinite(rep.ratios))
        assert reports["full-product"].bounded

    def test_numeric_edge_trends_on_perturbed_simplex(self):
        P = standard_simplex()
        prob = GuilleminProblem(
            P, guillemin.DensitySpec.perturbed(P, 0.4), 0.0)
        levels = []
        for m in (9, 17, 33):
            sol, rep = solver.newton_solve(prob, grid=m, tol=1e-11)
            assert rep["converged"]
            probe = verify.solution_probe(sol)
            x1 = np.linspace(0.0, 0.25, m)
            x2 = np.linspace(0.25, 0.45, m)
            vals = np.empty((m, m))
            for i, a in enumerate(x1):
                for j, b in enumerate(x2):
                    x = np.array([a, b])
                    vals[i, j] = probe(x) \
                        + guillemin.potential_values(P, x) - xlogy(a, a)
            levels.append((vals, (x1, x2)))
        lip = verify.estimate_lipschitz(levels)
        hes = verify.estimate_weighted_hessian(levels)
        assert lip.bounded
        assert hes.bounded
        assert all(np.isfinite(lip.ratios))
        assert all(np.isfinite(hes.ratios))


class TestAppendixChecks:
    def test_battery_passes(self):
        checks = verify.appendix_checks()
        assert len(checks) >= 20
        assert all(c["pass"] for c in checks)
        ids = {c["id"] for c in checks}
        assert ids == {"product-bound", "holder-growth", "interpolation"}

    def test_product_bound_frozen_example(self):
        checks = [c for c in verify.appendix_checks()
                  if c["id"] == "product-bound"]
        spec = [c for c in checks if "x1 x2 sin(x3)" in c["label"]]
        assert len(spec) == 1
        assert spec[0]["constant"] == 1.0
        assert spec[0]["margin"] >= 0.0

    def test_holder_constant_is_eight(self):
        checks = [c for c in verify.appendix_checks()
                  if c["id"] == "holder-growth"]
        assert len(checks) >= 6
        assert all(c["constant"] == 8.0 for c in checks)
        assert all(c["margin"] >= 0.0 for c in checks)

    def test_interpolation_constants_from_recursion(self):
        # epsilon-form recursion: c2 = 5/2, c_{k+1} = 2 c_k + 36 c_k^2;
        # the direct two-norm constant is twice that
        assert verify.interpolation_constant(2) == 5.0
        assert verify.interpolation_constant(3) == 460.0

    def test_interpolation_frozen_example(self):
        checks = [c for c in verify.appendix_checks()
                  if c["id"] == "interpolation"]
        spec = [c for c in checks if "sin(10 x)" in c["label"]
                and c["order"] == 2]
        assert len(spec) == 1
        assert spec[0]["constant"] == 5.0
        assert spec[0]["margin"] >= 0.0
