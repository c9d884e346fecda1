import math

import numpy as np
import pytest

from beltrami_lab import (ComplexField, ConvergenceError, GridSpec, MollifierSpec,
                          PointCloud, bump_field, equation_residual, evaluate_map,
                          invert_map, invert_points, load_solution_fields,
                          log_derivative_solve, lp_norm,
                          make_log_example_coefficient,
                          make_radial_stretch_coefficient, mollify, neumann_solve,
                          save_solution, second_derivative, smooth_window,
                          spectral_derivative, weak_residual)
from oracles import radial_stretch_inverse, radial_stretch_map


@pytest.fixture(scope="module")
def grid128():
    return GridSpec(128, 2.0)


@pytest.fixture(scope="module")
def identity_sol(grid128):
    mu = make_radial_stretch_coefficient(1.0, 0.5, grid128)
    return neumann_solve(mu, tol=1e-12)


@pytest.fixture(scope="module")
def logmoll16_512(grid512):
    # gentler smoothing than the CLI auto-rule: resolves d_z mu well at N=512
    raw = make_log_example_coefficient(0.3, grid512)
    mu = mollify(raw, MollifierSpec(16))
    return mu, neumann_solve(mu, tol=1e-12, max_iter=300)


class TestNeumannSolve:
    def test_zero_coefficient_identity(self, identity_sol):
        assert identity_sol.iterations == 1
        assert identity_sol.h.max_abs() == 0.0
        assert identity_sol.displacement.max_abs() == 0.0
        assert np.allclose(identity_sol.dphi.samples, 1.0)

    def test_dphi_definition(self, radial_sol_512):
        from beltrami_lab import beurling_transform
        bh = beurling_transform(radial_sol_512.h)
        assert np.max(np.abs(radial_sol_512.dphi.samples - 1.0 - bh.samples)) < 1e-12

    def test_trace_decreasing_after_warmup(self, radial_sol_512):
        t = radial_sol_512.trace
        assert all(t[i + 1] < t[i] for i in range(3, len(t) - 1))

    def test_contraction_rate(self, grid256):
        mu = make_radial_stretch_coefficient(2.0, 0.8, grid256)
        sol = neumann_solve(mu, tol=1e-10)
        t = sol.trace
        ratios = [t[i + 1] / t[i] for i in range(3, len(t) - 1)]
        assert max(ratios) <= mu.sup_bound + 0.05

    def test_closed_form_recovery_small(self, grid256):
        # matched closed form z |z/R|^(1/K-1) inside the support, id outside
        K, R = 2.0, 0.8
        mu = make_radial_stretch_coefficient(K, R, grid256)
        sol = neumann_solve(mu, tol=1e-12)
        z = grid256.mesh()
        ann = (np.abs(z) >= 0.1) & (np.abs(z) <= 0.7)
        err = np.abs(sol.phi_samples() - radial_stretch_map(z, K, R))[ann]
        assert err.max() <= 5 * grid256.spacing

    def test_orientation_preserved(self, radial_sol_512):
        inner = radial_sol_512.grid.radii() <= 1.0
        assert radial_sol_512.jacobian()[inner].min() > 0

    def test_distortion_inequality(self, radial_sol_512):
        # |dzbar phi| <= sup|mu| |dz phi| + slack, pointwise at acceptance
        s = radial_sol_512.mu.sup_bound
        lhs = np.abs(radial_sol_512.phi_dzbar().samples)
        rhs = s * np.abs(radial_sol_512.dphi.samples)
        assert np.max(lhs - rhs) <= 1e-8

    def test_far_field_normalization(self, radial_sol_512):
        disp = radial_sol_512.displacement
        assert abs(disp.mean()) < 1e-13
        grid = radial_sol_512.grid
        r = grid.radii()
        far = np.abs(disp.samples)[r >= 0.9 * grid.half_extent]
        edge_band = np.abs(np.abs(r) - 0.8) <= 2 * grid.spacing
        edge = np.abs(disp.samples)[edge_band]
        assert far.max() <= 10 * edge.max()

    def test_nonconvergence_carries_trace(self, grid128):
        mu = make_radial_stretch_coefficient(3.0, 0.8, grid128)
        with pytest.raises(ConvergenceError) as exc:
            neumann_solve(mu, tol=1e-14, max_iter=3)
        assert len(exc.value.trace) == 3

    def test_bad_tol_rejected(self, grid128):
        mu = make_radial_stretch_coefficient(2.0, 0.8, grid128)
        with pytest.raises(ValueError):
            neumann_solve(mu, tol=0.0)


class TestLogDerivative:
    def test_zero_coefficient(self, grid128):
        mu = make_radial_stretch_coefficient(1.0, 0.5, grid128)
        res = log_derivative_solve(mu, tol=1e-12)
        assert res.g.max_abs() == 0.0

    def test_sigma_matches_dzbar_log_dphi(self, logmoll16_512):
        mu, sol = logmoll16_512
        res = log_derivative_solve(mu, tol=1e-12, max_iter=300)
        lg = ComplexField(sol.grid, np.log(sol.dphi.samples))
        direct = spectral_derivative(lg, "d_zbar")
        region = sol.grid.radii() <= 1.0
        diff = (res.sigma.samples - direct.samples) * region
        h = sol.grid.spacing
        err = math.sqrt(float(np.sum(np.abs(diff) ** 2)) * h * h)
        assert err <= 1e-3

    def test_exponential_link(self, logmoll16_512):
        mu, sol = logmoll16_512
        res = log_derivative_solve(mu, tol=1e-12, max_iter=300)
        expg = ComplexField(sol.grid, np.exp(res.g.samples))
        rel = lp_norm(expg - sol.dphi, 2) / lp_norm(sol.dphi, 2)
        assert rel <= 1e-2

    def test_residual_contract(self, logmoll16_512):
        # g is fixed only up to the mean-zero gauge of C; the residual is
        # tested after removing the (tiny) mean of sigma
        mu, _ = logmoll16_512
        res = log_derivative_solve(mu, tol=1e-10, max_iter=300)
        dmu = spectral_derivative(mu.field, "d_z")
        gz = spectral_derivative(res.g, "d_z")
        gzb = spectral_derivative(res.g, "d_zbar")
        mean_sigma = res.sigma.mean()
        resid = gzb - mu.field * gz - dmu + mean_sigma
        assert lp_norm(resid, 2) <= 1e-10 * (1 + lp_norm(dmu, 2))
        assert abs(mean_sigma) <= 1e-8


class TestSecondDerivative:
    def test_zero_coefficient(self, identity_sol, grid128):
        sigma = ComplexField.zeros(grid128)
        assert second_derivative(identity_sol, sigma).max_abs() == 0.0

    def test_two_routes_agree(self, logmoll_mu_512, logmoll_sol_512):
        res = log_derivative_solve(logmoll_mu_512, tol=1e-12, max_iter=300)
        d2 = second_derivative(logmoll_sol_512, res.sigma)
        direct = spectral_derivative(logmoll_sol_512.dphi, "d_zbar")
        region = logmoll_sol_512.grid.radii() <= 1.0
        h = logmoll_sol_512.grid.spacing
        diff = (d2.samples - direct.samples) * region
        num = math.sqrt(float(np.sum(np.abs(diff) ** 2)) * h * h)
        den = math.sqrt(float(np.sum(np.abs(direct.samples * region) ** 2)) * h * h)
        assert num / den <= 1e-2

    def test_grid_mismatch_rejected(self, radial_sol_512):
        with pytest.raises(ValueError):
            second_derivative(radial_sol_512, ComplexField.zeros(GridSpec(64, 2.0)))


class TestEvaluateMap:
    def test_identity_on_cloud(self, identity_sol):
        pts = PointCloud(np.array([0.1 + 0.2j, -0.4j, 0.3]))
        out = evaluate_map(identity_sol, pts)
        assert np.allclose(out.points, pts.points, atol=1e-12)

    def test_reproduces_grid_nodes(self, radial_sol_512):
        z = radial_sol_512.grid.mesh()
        nodes = z[(np.abs(z.real) <= 1.0) & (np.abs(z.imag) <= 1.0)][::523]
        out = radial_sol_512.map_points(nodes)
        direct = radial_sol_512.phi_samples()[
            (np.abs(z.real) <= 1.0) & (np.abs(z.imag) <= 1.0)][::523]
        assert np.max(np.abs(out - direct)) < 1e-9

    def test_radial_moduli(self, radial_sol_512):
        # |phi| = sqrt(R) |z|^(1/2) on the support (matched closed form)
        radii = np.array([0.04, 0.16, 0.36, 0.64])
        pts = PointCloud(radii.astype(complex))
        out = evaluate_map(radial_sol_512, pts)
        want = np.abs(radial_stretch_map(radii.astype(complex), 2.0, 0.8))
        assert np.max(np.abs(np.abs(out.points) - want)) <= 3 * radial_sol_512.grid.spacing

    def test_outside_safe_region_rejected(self, radial_sol_512):
        with pytest.raises(ValueError, match="inside"):
            evaluate_map(radial_sol_512, PointCloud(np.array([1.5 + 0j])))


class TestInvertMap:
    def test_identity(self, identity_sol):
        pts = PointCloud(np.array([0.5 + 0.1j, -0.2 - 0.2j]))
        out = invert_map(identity_sol, pts, tol=1e-12)
        assert np.allclose(out.points, pts.points, atol=1e-11)

    def test_roundtrip_thousand_points(self, radial_sol_512):
        rng = np.random.default_rng(5)
        pts = rng.uniform(-0.9, 0.9, 1000) + 1j * rng.uniform(-0.9, 0.9, 1000)
        fwd = radial_sol_512.map_points(pts)
        back = invert_points(radial_sol_512, fwd, tol=1e-9)
        assert np.max(np.abs(back - pts)) <= 1e-8

    def test_preimage_closed_form(self, radial_sol_512):
        # preimage of w = 0.5 for the matched stretch: (|w|/sqrt(R))^K
        want = radial_stretch_inverse(np.array([0.5 + 0j]), 2.0, 0.8)[0]
        got = invert_points(radial_sol_512, np.array([0.5 + 0j]), tol=1e-10)[0]
        assert abs(got - want) <= 3 * radial_sol_512.grid.spacing
        assert want.real == pytest.approx((0.5 / math.sqrt(0.8)) ** 2)


class TestResiduals:
    def test_identity_zero_residual(self, identity_sol):
        mu = identity_sol.mu
        assert equation_residual(identity_sol.phi_dz(), identity_sol.phi_dzbar(), mu) == 0.0

    def test_solver_self_consistency(self, logmoll_mu_512, logmoll_sol_512):
        res = equation_residual(logmoll_sol_512.phi_dz(), logmoll_sol_512.phi_dzbar(),
                                logmoll_mu_512)
        assert res <= 10 * 1e-12 + 1e-11

    def test_region_override(self, radial_sol_512):
        grid = radial_sol_512.grid
        annulus = (grid.radii() >= 0.2) & (grid.radii() <= 0.5)
        res = equation_residual(radial_sol_512.phi_dz(), radial_sol_512.phi_dzbar(),
                                radial_sol_512.mu, region=annulus)
        assert res <= 1e-9


class TestWeakResidual:
    def test_dzbar_of_zbar_is_one(self, grid512):
        # f = conj(z), mu = 0: pairing equals the integral of the test function
        mu = make_radial_stretch_coefficient(1.0, 0.5, grid512)
        f = ComplexField.from_function(grid512, np.conj)
        t = bump_field(grid512, radius=0.9)
        got = weak_residual(f, mu, t)
        want = np.sum(t.samples) * grid512.spacing ** 2
        assert abs(got - want) <= 1e-10 * abs(want)

    def test_holomorphic_polynomial_vanishes(self, grid512):
        mu = make_radial_stretch_coefficient(1.0, 0.5, grid512)
        f = ComplexField.from_function(grid512, lambda z: z ** 3 - 2 * z)
        t = bump_field(grid512, radius=0.9)
        tz = spectral_derivative(t, "d_z")
        tzb = spectral_derivative(t, "d_zbar")
        w11 = lp_norm(t, 1) + lp_norm(tz, 1) + lp_norm(tzb, 1)
        assert abs(weak_residual(f, mu, t)) <= 1e-10 * w11

    def test_support_violation_rejected(self, grid128):
        mu = make_radial_stretch_coefficient(2.0, 0.5, grid128)
        wide = bump_field(grid128, radius=1.5)  # pokes past |z| = L/2
        with pytest.raises(ValueError, match="vanish"):
            weak_residual(ComplexField.zeros(grid128), mu, wide)


class TestWindowHelpers:
    def test_smooth_window_plateaus(self, grid128):
        w = smooth_window(grid128, 0.4, 0.9)
        r = grid128.radii()
        assert np.all(w.samples[r <= 0.4] == 1.0)
        assert np.all(w.samples[r >= 0.9] == 0.0)
        mid = w.samples[(r > 0.4) & (r < 0.9)]
        assert np.all((mid.real >= 0) & (mid.real <= 1))

    def test_bump_support(self, grid128):
        t = bump_field(grid128, center=0.2 + 0.1j, radius=0.5)
        rc = np.abs(grid128.mesh() - (0.2 + 0.1j))
        assert np.all(t.samples[rc >= 0.5] == 0.0)
        # peak is 1 at the center; the nearest sample sits within one cell
        assert 0.99 <= t.max_abs() <= 1.0


class TestSerialization:
    def test_save_load_roundtrip(self, radial_sol_512, tmp_path):
        save_solution(radial_sol_512, tmp_path / "sol")
        bundle = load_solution_fields(tmp_path / "sol")
        assert np.array_equal(bundle["fields"]["h"].samples, radial_sol_512.h.samples)
        assert np.array_equal(bundle["fields"]["displacement"].samples,
                              radial_sol_512.displacement.samples)
        meta = bundle["metadata"]
        assert meta["iterations"] == radial_sol_512.iterations
        assert meta["K"] == pytest.approx(2.0, abs=1e-9)
        assert meta["tol"] == 1e-12
