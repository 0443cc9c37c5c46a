import numpy as np
import pytest

from levyvolterra import (
    JumpPart,
    KernelSpec,
    LevyTriplet,
    PointMass,
    TagRule,
    TimeGrid,
    build_panel,
    build_resolvent_family,
    build_spectral_model,
    characteristic_exponent,
    convolve_at,
    ecf_comparison,
    empirical_cf,
    gaussian_covariance_check,
    identity_resolvent_family,
    predicted_log_cf,
    predicted_triplet,
    sample_path,
    terminal_values,
)

KERNEL = KernelSpec.exponential(1.0)
# independent quadrature of int_0^1 s(tau, 1)^2 dtau for the exponential kernel
Q_MU1 = 0.5275214517603009
# independent quadrature of 2 * int_0^1 s(tau, pi^2) 1_{2 s(tau) < 1} dtau
ALPHA_CORRECTION_H2 = 0.24552603917867658


def family(K, grid, mus=None):
    model = build_spectral_model(K, mus if mus is not None else "dirichlet_laplacian")
    return build_resolvent_family(model, KERNEL, grid)


class TestPredictedTriplet:
    def test_time_zero_is_degenerate(self):
        fam = family(2, TimeGrid(1.0, 100))
        trip = LevyTriplet(np.ones(2), np.ones(2), JumpPart(2.0, PointMass(np.array([3.0, 0.0]))))
        pred = predicted_triplet(fam, trip, 0.0)
        assert np.array_equal(pred.alpha, np.zeros(2))
        assert np.array_equal(pred.q_diag, np.zeros(2))
        assert pred.jump_mass == 0.0

    def test_identity_family_reduces_to_levy_scaling(self):
        # R == I: alpha = t * drift, Q = t * gauss_var, jump mass = rate * t
        grid = TimeGrid(1.0, 100)
        fam = identity_resolvent_family(2, KERNEL, grid)
        trip = LevyTriplet(np.array([0.5, -1.0]), np.array([2.0, 0.3]),
                           JumpPart(1.5, PointMass(np.array([0.4, 0.1]))))
        pred = predicted_triplet(fam, trip, 1.0)
        assert np.allclose(pred.alpha, [0.5, -1.0], atol=1e-13)
        assert np.allclose(pred.q_diag, [2.0, 0.3], atol=1e-13)
        assert pred.jump_mass == 1.5

    def test_gaussian_q_against_independent_quadrature(self):
        fam = family(1, TimeGrid(1.0, 1000), [1.0])
        pred = predicted_triplet(fam, LevyTriplet(np.zeros(1), np.ones(1)), 1.0)
        assert pred.q_diag[0] == pytest.approx(Q_MU1, abs=1e-5)

    def test_indicator_correction_against_independent_quadrature(self):
        # jumps of size 2 shrink through the resolvent and enter the unit
        # ball once s < 1/2; the correction integrand jumps there, so the
        # grid quadrature carries an O(dt) defect at the crossing
        fam = family(1, TimeGrid(1.0, 1000), [np.pi**2])
        trip = LevyTriplet(np.zeros(1), np.zeros(1), JumpPart(1.0, PointMass(np.array([2.0]))))
        pred = predicted_triplet(fam, trip, 1.0)
        assert pred.alpha[0] == pytest.approx(ALPHA_CORRECTION_H2, abs=2e-3)

    def test_correction_skipped_for_inside_ball_jumps(self):
        fam = family(1, TimeGrid(1.0, 200), [np.pi**2])
        trip = LevyTriplet(np.array([0.7]), np.zeros(1),
                           JumpPart(2.0, PointMass(np.array([0.8]))))
        pred = predicted_triplet(fam, trip, 1.0)
        # alpha is exactly drift * trap(s): both indicators agree pointwise
        w = np.full(201, fam.grid.dt)
        w[0] = w[-1] = fam.grid.dt / 2
        assert pred.alpha[0] == pytest.approx(0.7 * float(w @ fam.s_matrix[:, 0]), abs=1e-15)

    def test_q_bounded_by_flat_scaling(self):
        fam = family(3, TimeGrid(1.0, 500))
        trip = LevyTriplet(np.zeros(3), np.array([1.0, 2.0, 0.5]))
        pred = predicted_triplet(fam, trip, 1.0)
        assert np.all(pred.q_diag <= 1.0 * trip.gauss_var + 1e-12)

    def test_mass_conservation_exact(self):
        fam = family(1, TimeGrid(2.0, 128), [1.0])
        trip = LevyTriplet(np.zeros(1), np.zeros(1), JumpPart(3.25, PointMass(np.array([5.0]))))
        pred = predicted_triplet(fam, trip, 2.0)
        assert pred.jump_mass == 3.25 * 2.0

    def test_off_grid_time_rejected(self):
        fam = family(1, TimeGrid(1.0, 100), [1.0])
        with pytest.raises(ValueError):
            predicted_triplet(fam, LevyTriplet.zero(1), 0.5037)


class TestPredictedLogCf:
    def test_time_zero(self):
        fam = family(2, TimeGrid(1.0, 50))
        assert predicted_log_cf(fam, LevyTriplet.zero(2), 0.0, np.ones(2)) == 0.0

    def test_identity_family_gives_t_phi(self):
        grid = TimeGrid(1.0, 64)
        fam = identity_resolvent_family(2, KERNEL, grid)
        trip = LevyTriplet(np.array([0.3, -0.1]), np.array([1.0, 0.5]),
                           JumpPart(2.0, PointMass(np.array([0.5, 1.5]))))
        y = np.array([0.7, -1.3])
        expected = 1.0 * characteristic_exponent(trip, y)
        assert predicted_log_cf(fam, trip, 1.0, y) == pytest.approx(expected, abs=1e-12)

    def test_gaussian_route_agreement(self):
        # functional quadrature vs i<alpha, y> - (1/2) sum Q_k y_k^2
        fam = family(3, TimeGrid(1.0, 400))
        trip = LevyTriplet(np.array([0.2, -0.4, 0.1]), np.array([1.0, 0.6, 0.2]))
        pred = predicted_triplet(fam, trip, 1.0)
        rng = np.random.default_rng(3)
        for _ in range(10):
            y = rng.standard_normal(3)
            lk = 1j * (pred.alpha @ y) - 0.5 * (pred.q_diag @ y**2)
            assert predicted_log_cf(fam, trip, 1.0, y) == pytest.approx(lk, abs=1e-12)

    def test_jump_route_agreement_via_pushforward(self):
        # reassemble the log CF from [alpha, Q, pushforward jump mixture] and
        # compare with the functional quadrature on the same grid
        grid = TimeGrid(1.0, 500)
        fam = family(1, grid, [np.pi**2])
        lam, h = 1.3, 2.0
        trip = LevyTriplet(np.array([0.4]), np.array([0.7]),
                           JumpPart(lam, PointMass(np.array([h]))))
        pred = predicted_triplet(fam, trip, 1.0)
        s = fam.s_matrix[:, 0]
        w = np.full(grid.n_steps + 1, grid.dt)
        w[0] = w[-1] = grid.dt / 2
        for y in (0.5, 1.0, -2.0):
            z = s * h  # jump image through R(tau)
            levy_term = np.exp(1j * y * z) - 1.0 - 1j * y * z * (np.abs(z) < 1.0)
            lk = 1j * pred.alpha[0] * y - 0.5 * pred.q_diag[0] * y**2 + lam * float(w @ levy_term.real) \
                + 1j * lam * float(w @ levy_term.imag)
            assert predicted_log_cf(fam, trip, 1.0, np.array([y])) == pytest.approx(lk, abs=1e-10)

    def test_real_part_nonpositive(self):
        fam = family(2, TimeGrid(1.0, 100))
        trip = LevyTriplet(np.array([0.3, 0.3]), np.array([0.5, 0.1]),
                           JumpPart(1.0, PointMass(np.array([0.4, -0.6]))))
        rng = np.random.default_rng(12)
        for _ in range(20):
            y = 3 * rng.standard_normal(2)
            assert predicted_log_cf(fam, trip, 1.0, y).real <= 1e-12


class TestEmpiricalCf:
    def test_all_zero_samples(self):
        val, se = empirical_cf(np.zeros((100, 2)), np.array([0.4, 0.4]))
        assert val == 1.0 + 0.0j
        assert se == pytest.approx(0.1)

    def test_zero_functional(self):
        rng = np.random.default_rng(0)
        val, _ = empirical_cf(rng.standard_normal((50, 3)), np.zeros(3))
        assert val == 1.0 + 0.0j

    def test_modulus_bounded(self):
        rng = np.random.default_rng(1)
        val, _ = empirical_cf(rng.standard_normal((1000, 1)), np.array([0.7]))
        assert abs(val) <= 1.0

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            empirical_cf(np.zeros((1, 2)), np.ones(2))


class TestTerminalValues:
    def test_matches_path_route(self):
        grid = TimeGrid(1.0, 150)
        fam = family(2, grid)
        trip = LevyTriplet(np.array([0.3, -0.2]), np.array([0.5, 0.25]),
                           JumpPart(1.5, PointMass(np.array([0.6, -0.4]))))
        vals = terminal_values(fam, trip, 1.0, 4, seed=606, tag_rule=TagRule.LEFT)
        for idx in range(4):
            path = sample_path(trip, grid, idx, seed=606)
            direct = convolve_at(fam, path, grid.n_steps, TagRule.LEFT)
            assert np.allclose(vals[idx], direct, atol=1e-12)

    def test_worker_count_invariance(self):
        grid = TimeGrid(1.0, 100)
        fam = family(2, grid)
        trip = LevyTriplet(np.zeros(2), np.array([1.0, 0.5]))
        a = terminal_values(fam, trip, 1.0, 64, seed=9, workers=1)
        b = terminal_values(fam, trip, 1.0, 64, seed=9, workers=4)
        assert np.array_equal(a, b)


class TestPanel:
    def test_eigen_block_then_random_units(self):
        panel = build_panel(2, 10, seed=5)
        assert panel.shape == (10, 2)
        assert np.array_equal(panel[0], [0.5, 0.0])
        assert np.array_equal(panel[5], [0.0, 2.0])
        assert np.allclose(np.linalg.norm(panel[6:], axis=1), 1.0)

    def test_deterministic(self):
        assert np.array_equal(build_panel(3, 15, seed=1), build_panel(3, 15, seed=1))

    def test_size_validation(self):
        with pytest.raises(ValueError):
            build_panel(2, 0, seed=1)


class TestEcfComparison:
    def test_minimum_sample_size_enforced(self):
        fam = family(1, TimeGrid(1.0, 50), [1.0])
        with pytest.raises(ValueError):
            ecf_comparison(fam, LevyTriplet.zero(1), 1.0, 4, 10, seed=1)

    def test_zero_noise_scores_exactly_zero(self):
        fam = family(2, TimeGrid(1.0, 100))
        rep = ecf_comparison(fam, LevyTriplet.zero(2), 1.0, 8, 1000, seed=42)
        assert np.array_equal(rep.z_scores, np.zeros(8))
        assert rep.passed

    def test_small_gaussian_run_passes(self):
        fam = family(2, TimeGrid(1.0, 200))
        trip = LevyTriplet(np.zeros(2), np.array([1.0, 0.5]))
        rep = ecf_comparison(fam, trip, 1.0, 10, 4000, seed=7)
        assert rep.passed, rep.z_scores
        for row in rep.rows:
            assert abs(row.empirical) <= 1.0 and abs(row.predicted) <= 1.0
            assert row.stderr == pytest.approx(1.0 / np.sqrt(4000))
            assert row.stderr_component_bound <= row.stderr + 1e-15


class TestCovarianceCheck:
    def test_rejects_jump_triplets(self):
        fam = family(1, TimeGrid(1.0, 50), [1.0])
        trip = LevyTriplet(np.zeros(1), np.ones(1), JumpPart(1.0, PointMass(np.array([1.0]))))
        with pytest.raises(ValueError):
            gaussian_covariance_check(fam, trip, 1.0, 1000, seed=0)

    def test_zero_variance_scores_zero(self):
        fam = family(2, TimeGrid(1.0, 50))
        trip = LevyTriplet(np.array([0.3, 0.0]), np.zeros(2))
        check = gaussian_covariance_check(fam, trip, 1.0, 500, seed=0)
        assert np.array_equal(check.z, np.zeros(2))

    def test_identity_family_flat_variance(self):
        grid = TimeGrid(1.0, 100)
        fam = identity_resolvent_family(1, KERNEL, grid)
        trip = LevyTriplet(np.zeros(1), np.ones(1))
        check = gaussian_covariance_check(fam, trip, 1.0, 20_000, seed=3)
        assert check.q_predicted[0] == pytest.approx(1.0, abs=1e-12)
        assert check.max_abs_z < 4.0
