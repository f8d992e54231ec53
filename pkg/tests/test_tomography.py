import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from waveplate_mub.bloch import hs_error
from waveplate_mub.budget import state_estimation_coefficients
from waveplate_mub.exceptions import SingularDesignError
from waveplate_mub.settings import qwp_hwp_setting, single_plate_setting, twp_setting
from waveplate_mub.tomography import (
    EXACT,
    SAMPLED,
    CountRecord,
    TomographyConfig,
    fit_through_origin,
    linear_inversion,
    monte_carlo,
    outcome_probabilities,
    parse_state,
    project_to_physical,
    realized_bases,
    reconstruct,
    run_point,
    sample_counts,
    singlet,
    sweep,
    systematic_error_curve,
    trial_rng,
    two_qubit_experiment,
    werner_qubit,
)

TWP = twp_setting()
QH = qwp_hwp_setting()
P = 0.92


def _random_density(rng, d, rank=None):
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def _random_unit_trace_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = a + a.conj().T
    return h - (np.trace(h) - 1) * np.eye(d) / d


class TestRealizedBases:
    def test_twp_nominal(self):
        r = realized_bases(TWP)
        s = 1 / np.sqrt(2)
        np.testing.assert_allclose(r, [[0, 0, 1], [s, -s, 0], [s, s, 0]], atol=1e-12)

    def test_qwp_hwp_nominal(self):
        np.testing.assert_allclose(realized_bases(QH), np.eye(3), atol=1e-12)

    def test_one_degree_axis_offset(self):
        d = np.radians(1.0)
        r0, r1 = realized_bases(TWP), realized_bases(TWP, {"axis": d})
        theta = np.radians([p.axis for p in TWP.plates])
        delta = np.radians(120.0)
        predicted = 16 * np.sin(delta / 2) ** 2 - 4 * np.sin(delta) ** 2 * np.sin(2 * theta) ** 2
        np.testing.assert_allclose(np.sum((r1 - r0) ** 2, axis=1) / d**2, predicted, rtol=0.02)
        jac = TWP.jacobians()["axis"]
        gram_first_order = d * (jac @ r0.T + r0 @ jac.T)
        np.testing.assert_allclose(r1 @ r1.T - np.eye(3), gram_first_order, atol=10 * d**2)

    def test_unknown_parameter(self):
        with pytest.raises(ValueError):
            realized_bases(TWP, {"q": 0.1})


class TestOutcomeProbabilities:
    def test_maximally_mixed(self, rng):
        v = rng.normal(size=3)
        rec = outcome_probabilities(np.eye(2) / 2, np.array([v / np.linalg.norm(v)] * 3))
        np.testing.assert_allclose(rec.values, 0.5, atol=1e-15)

    def test_h_in_z_basis(self):
        rec = outcome_probabilities(werner_qubit("H", 1.0), realized_bases(QH))
        np.testing.assert_allclose(rec.values[2], [1.0, 0.0], atol=1e-15)

    def test_singlet_anticorrelated(self):
        rec = outcome_probabilities(singlet(), (realized_bases(TWP), realized_bases(TWP)))
        assert rec.values.shape == (9, 4)
        for i in range(3):
            same = rec.values[3 * i + i]
            assert same[0] == pytest.approx(0.0, abs=1e-15)
            assert same[3] == pytest.approx(0.0, abs=1e-15)
        np.testing.assert_allclose(rec.values.sum(axis=1), 1.0, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            outcome_probabilities(singlet(), realized_bases(TWP))


class TestSampleCounts:
    def test_certain_outcome(self):
        rec = sample_counts(CountRecord(np.array([[1.0, 0.0]]), True), 100, 1)
        assert rec.values.tolist() == [[100, 0]]

    def test_binomial_tail(self):
        rec = CountRecord(np.array([[0.5, 0.5]]), True)
        firsts = np.array([sample_counts(rec, 10**6, seed).values[0, 0] for seed in range(1000)])
        assert np.sum((firsts >= 498_000) & (firsts <= 502_000)) >= 999

    def test_deterministic(self):
        rec = outcome_probabilities(singlet(0.8), (realized_bases(QH), realized_bases(QH)))
        a = sample_counts(rec, 1000, 42).values
        b = sample_counts(rec, 1000, 42).values
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(a.sum(axis=1), 1000)

    def test_trial_streams_independent_of_order(self):
        a = trial_rng(5, 3, 7).integers(0, 2**32, 4)
        trial_rng(5, 0, 0).integers(0, 2**32, 100)
        b = trial_rng(5, 3, 7).integers(0, 2**32, 4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, trial_rng(5, 3, 8).integers(0, 2**32, 4))


class TestLinearInversion:
    @pytest.mark.parametrize("setting", [TWP, QH], ids=["twp", "qh"])
    def test_exact_single_qubit(self, setting, rng):
        for _ in range(50):
            rho = _random_density(rng, 2)
            rec = outcome_probabilities(rho, realized_bases(setting))
            np.testing.assert_allclose(linear_inversion(rec, realized_bases(setting)), rho, atol=1e-12)

    @pytest.mark.parametrize("setting", [TWP, QH], ids=["twp", "qh"])
    def test_exact_two_qubit(self, setting, rng):
        bases = (realized_bases(setting),) * 2
        for _ in range(20):
            rho = _random_density(rng, 4, rank=rng.integers(1, 5))
            rec = outcome_probabilities(rho, bases)
            np.testing.assert_allclose(linear_inversion(rec, bases), rho, atol=1e-12)

    def test_miscalibrated_matches_first_order(self):
        for name in "HDR":
            rho = werner_qubit(name, P)
            coeffs = state_estimation_coefficients(rho, TWP)
            for off in (0.005, 0.01, 0.02):
                rec = outcome_probabilities(rho, realized_bases(TWP, {"axis": off}))
                err = hs_error(linear_inversion(rec, realized_bases(TWP)), rho)
                assert err == pytest.approx(coeffs["axis"] * off**2, rel=0.10)

    def test_unphysical_frequencies_flagged(self):
        bases = realized_bases(QH)
        rec = CountRecord(np.array([[0.5, 0.5], [0.5, 0.5], [1.0, 0.0]]), True)
        rec2 = CountRecord(np.array([[0.95, 0.05], [0.95, 0.05], [0.95, 0.05]]), True)
        out = linear_inversion(rec2, bases)
        assert np.linalg.eigvalsh(out).min() < 0
        np.testing.assert_allclose(linear_inversion(rec, bases), np.diag([1.0, 0.0]), atol=1e-12)
        result = reconstruct(rec2, bases, truth=werner_qubit("H", 1.0))
        assert result.projected
        assert np.linalg.eigvalsh(result.estimate).min() >= -1e-10

    def test_singular_design(self):
        bases = np.array([[0.0, 0.0, 1.0]] * 3)
        rec = outcome_probabilities(np.eye(2) / 2, bases)
        with pytest.raises(SingularDesignError):
            linear_inversion(rec, bases)


class TestProjection:
    def test_physical_unchanged(self, rng):
        for d in (2, 4):
            rho = _random_density(rng, d)
            np.testing.assert_allclose(project_to_physical(rho), rho, atol=1e-12)

    def test_diag_example(self):
        # projecting (1.1, -0.1) onto the simplex: shift by 0.1 then clip
        np.testing.assert_allclose(project_to_physical(np.diag([1.1, -0.1])), np.diag([1.0, 0.0]), atol=1e-15)

    def test_random_hermitian(self, rng):
        for d in (2, 4):
            for _ in range(200):
                out = project_to_physical(_random_unit_trace_hermitian(rng, d))
                assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)
                assert np.linalg.eigvalsh(out).min() >= -1e-10
                np.testing.assert_allclose(project_to_physical(out), out, atol=1e-12)

    def test_contraction(self, rng):
        for d in (2, 4):
            for _ in range(200):
                rho = _random_density(rng, d, rank=rng.integers(1, d + 1))
                h = rho + 0.2 * (_random_unit_trace_hermitian(rng, d) - np.eye(d) / d)
                assert hs_error(project_to_physical(h), rho) <= hs_error(h, rho) + 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
    def test_spectrum_projection_is_euclidean(self, w):
        # brute force: compare against a fine search over the probability simplex in 2D
        w = np.array(w[:2])
        w = w - (w.sum() - 1) / 2
        out = np.linalg.eigvalsh(project_to_physical(np.diag(w)))
        grid = np.linspace(0, 1, 20001)
        cand = np.stack([grid, 1 - grid], axis=1)
        best = cand[np.argmin(np.sum((cand - np.sort(w)) ** 2, axis=1))]
        np.testing.assert_allclose(np.sort(out), np.sort(best), atol=1e-4)


class TestCurves:
    def test_zero_offset_is_exact(self, rng):
        for setting in (TWP, QH):
            for name in "HVDARL":
                curve = systematic_error_curve(werner_qubit(name, P), setting, setting.angle_parameters[0], [0.0])
                assert curve[0][1] <= 1e-12

    def test_h_twp_axis(self):
        offs = np.linspace(-0.02, 0.02, 11)
        curve = systematic_error_curve(werner_qubit("H", P), TWP, "axis", offs)
        assert fit_through_origin(*zip(*curve)) == pytest.approx(8 * P**2, rel=0.05)

    def test_r_qwp_hwp_h(self):
        offs = np.linspace(-0.02, 0.02, 11)
        curve = systematic_error_curve(werner_qubit("R", P), QH, "h", offs)
        assert fit_through_origin(*zip(*curve)) == pytest.approx(16 * P**2, rel=0.05)

    def test_product_state_additivity(self):
        # photon-2 perfect and pure: the two-qubit error equals the one-qubit error
        h = werner_qubit("H", 1.0)
        offs = [-0.02, -0.01, 0.01, 0.02]
        single = sweep(TomographyConfig((TWP,), project=False), h, 0, "axis", offs)
        cfg = TomographyConfig((TWP, TWP), project=False)
        both = [sweep(cfg, np.kron(h, h), q, "axis", offs) for q in (0, 1)]
        for s in both:
            np.testing.assert_allclose(s.mean, single.mean, atol=1e-12)
        total = sum(s.coefficient for s in both)
        assert total == pytest.approx(2 * single.coefficient, rel=1e-9)

    def test_product_estimate_factorizes(self):
        a, b = werner_qubit("D", 0.7), werner_qubit("R", 0.5)
        offs = ({"axis": 0.01}, {"axis": -0.015})
        cfg = TomographyConfig((TWP, TWP), miscalibration=offs, project=False)
        two = run_point(cfg, np.kron(a, b))[0].estimate
        one_a = run_point(TomographyConfig((TWP,), (offs[0],), project=False), a)[0].estimate
        one_b = run_point(TomographyConfig((TWP,), (offs[1],), project=False), b)[0].estimate
        np.testing.assert_allclose(two, np.kron(one_a, one_b), atol=1e-12)


class TestTwoQubit:
    def test_werner_gap_small(self):
        state = singlet(P)
        summary = two_qubit_experiment(TomographyConfig((TWP, TWP)), state=state)
        for s in summary.sweeps:
            assert s.first_order == pytest.approx(8 * P**2)
            assert abs(s.gap) < 0.05

    def test_singlet_gap_present(self):
        summary = two_qubit_experiment(TomographyConfig((QH, QH)))
        for s in summary.sweeps:
            assert s.coefficient < s.first_order
            assert s.unprojected_coefficient == pytest.approx(s.first_order, rel=0.01)

    def test_discrepancy_report(self):
        summary = two_qubit_experiment(TomographyConfig((TWP, TWP)))
        assert summary.discrepancies({"axis": 6.9}) == []
        lines = summary.discrepancies({"axis": 12.0})
        assert len(lines) == 1 and "axis" in lines[0]

    def test_needs_two_settings(self):
        with pytest.raises(ValueError):
            two_qubit_experiment(TomographyConfig((TWP,)))


class TestMonteCarlo:
    def _config(self, **kw):
        base = dict(photons_per_basis=10**6, trials=100, rng_seed=11, statistics=SAMPLED)
        base.update(kw)
        return TomographyConfig((TWP,), **base)

    def test_shot_noise_floor(self):
        summary = monte_carlo(self._config(), werner_qubit("H", P))
        assert summary.mean <= 5e-5
        assert summary.std > 0

    def test_deterministic(self):
        cfg = self._config(trials=10, photons_per_basis=1000)
        assert monte_carlo(cfg, werner_qubit("D", P)) == monte_carlo(cfg, werner_qubit("D", P))

    def test_projection_contracts_every_trial(self):
        cfg = TomographyConfig((TWP, TWP), photons_per_basis=200, trials=30, rng_seed=3, statistics=SAMPLED)
        for r in run_point(cfg, singlet()):
            assert r.hs_error_vs_truth <= r.hs_error_unprojected + 1e-12

    def test_requires_sampling(self):
        with pytest.raises(ValueError):
            monte_carlo(self._config(statistics=EXACT), werner_qubit("H", P))


class TestConfigAndStates:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            TomographyConfig((TWP,), trials=0)
        with pytest.raises(ValueError):
            TomographyConfig((TWP,), statistics="bogus")
        with pytest.raises(ValueError):
            TomographyConfig((TWP,), statistics=SAMPLED, photons_per_basis=0)
        with pytest.raises(ValueError):
            TomographyConfig((TWP, TWP), miscalibration=({},))

    def test_parse_state(self):
        np.testing.assert_allclose(parse_state("H:0.92"), werner_qubit("H", 0.92))
        np.testing.assert_allclose(parse_state("singlet"), singlet())
        with pytest.raises(ValueError):
            parse_state("Q:0.5")

    def test_non_mub_setting_still_simulates(self):
        setting = single_plate_setting(120.0, (0.0, 30.0, 100.0))
        curve = systematic_error_curve(werner_qubit("H", P), setting, "axis", [0.0])
        assert curve[0][1] <= 1e-12
