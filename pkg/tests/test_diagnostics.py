"""Tests for residuals, tie breaking, reproduction numbers, envelopes and plot tables."""

import math

import numpy as np
import pytest

from Ansteckung.envelope import incidence_envelope, tile_counts
from Ansteckung.errors import EnvelopeError, TieBreakingError, ValidationError
from Ansteckung.events import EventHistory
from Ansteckung.grid import regular_grid
from Ansteckung.intensity import IntensityModel
from Ansteckung.interaction import InteractionSpec
from Ansteckung.likelihood import LikelihoodModel
from Ansteckung.model_spec import ModelSpec
from Ansteckung.plot_data import endemic_curve, interaction_curve
from Ansteckung.reproduction import individual_means, mu_individual, project_psd, reproduction_numbers
from Ansteckung.residuals import (break_ties, cumulative_ground_intensity, ks_band_half_width, rescaled_residuals)
from utils.globals import Globals, TieBreakingScheme


class TestResiduals:
    """Time-rescaling residuals and tie breaking."""

    def test_unit_rate_gives_unit_spacings(self, unit_grid, endemic_spec):
        """Test events at t = 1, 2, 3 under rate 1: Y = (1, 1) and U = 1 - e^-1."""
        history = EventHistory([1.0, 2.0, 3.0], [[0.5, 0.5]] * 3, [0, 0, 0], ["1"])
        model = LikelihoodModel(unit_grid, endemic_spec, history)
        series = rescaled_residuals(model.parameters([0.0]), model)
        np.testing.assert_allclose(series.Y, [1.0, 1.0])
        np.testing.assert_allclose(series.U, [0.6321205588, 0.6321205588])
        assert series.exact_band

    def test_cumulative_at_T_equals_the_integrals(self, square_grid, two_type_spec, two_type_history):
        """Test that Lambda(T) is the endemic plus epidemic integral."""
        model = LikelihoodModel(square_grid, two_type_spec, two_type_history)
        layout = model.layout
        values = np.full(layout.size, 0.05)
        values[layout.beta0] = -6.0
        values[layout.gamma.start] = -2.0
        theta = model.parameters(values)
        expected = model.endemic_integral(theta) + model.epidemic_integral(theta)
        assert cumulative_ground_intensity(square_grid.T, theta, model) == pytest.approx(expected, rel=1e-12)

    def test_homogeneous_data_series(self, unit_grid, homogeneous_history, endemic_spec):
        """Test the residual count, the KS summary and the plot table on 100 events."""
        model = LikelihoodModel(unit_grid, endemic_spec, homogeneous_history)
        series = rescaled_residuals(model.parameters([0.0]), model)
        assert series.m == 99
        assert 0.0 <= series.p_value <= 1.0
        assert series.to_dict()["pass"] == (series.ks_statistic <= series.band_half_width)
        assert len(series.cdf_table()) == 99

    def test_band_constant_for_large_m(self):
        """Test the asymptotic 95% band 1.358 / sqrt(m)."""
        half_width, exact = ks_band_half_width(400)
        assert half_width == pytest.approx(1.358 / 20.0)
        assert not exact

    def test_ties_are_rejected(self, unit_grid, endemic_spec):
        """Test that tied times must be broken before computing residuals."""
        history = EventHistory([1.0, 1.0, 2.0], [[0.5, 0.5]] * 3, [0, 0, 0], ["1"])
        model = LikelihoodModel(unit_grid, endemic_spec, history)
        with pytest.raises(TieBreakingError):
            rescaled_residuals(model.parameters([0.0]), model)

    def test_epsilon_shift(self):
        """Test that (5, 5, 5) becomes (4.98, 4.99, 5.00)."""
        history = EventHistory([5.0, 5.0, 5.0], [[0, 0], [1, 1], [2, 2]], [0, 0, 0], ["1"])
        broken = break_ties(history, TieBreakingScheme.EPSILON_SHIFT)
        np.testing.assert_allclose(broken.times, [4.98, 4.99, 5.0])

    def test_uniform_subdaily(self):
        """Test that sub-daily jitter separates ties and stays within a day."""
        history = EventHistory([5.0, 5.0, 6.0], [[0, 0], [1, 1], [2, 2]], [0, 0, 0], ["1"])
        broken = break_ties(history, TieBreakingScheme.UNIFORM_SUBDAILY, seed=1)
        assert np.all(np.diff(broken.times) > 0)
        assert np.all((broken.times > 4.0) & (broken.times <= 6.0))

    def test_shift_below_zero(self):
        """Test that breaking ties cannot move an event out of the period."""
        history = EventHistory([0.005, 0.005], [[0, 0], [1, 1]], [0, 0], ["1"])
        with pytest.raises(TieBreakingError):
            break_ties(history, TieBreakingScheme.EPSILON_SHIFT)


def repro_model(epidemic_terms=(), types=("1",), history=None):
    grid = regular_grid(1, 1, 100.0, 100.0, 1)
    spec = ModelSpec(types=list(types), epidemic_terms=list(epidemic_terms), interaction=InteractionSpec(eps=30.0, delta=1.0))
    if history is None:
        history = EventHistory([10.0, 20.0], [[50.0, 50.0], [20.0, 20.0]], [0, 0], list(types))
    return IntensityModel(grid, spec, history)


class TestReproduction:
    """Reproduction numbers and their bootstrap intervals."""

    def test_constant_kernels(self):
        """Test eta = 0, eps = 30 and delta = 1: mu = 30 pi."""
        model = repro_model()
        theta = model.parameters([0.0, 0.0])
        assert mu_individual(0.0, 0, theta, model.spec) == pytest.approx(30 * math.pi)
        np.testing.assert_allclose(individual_means(theta, model), [30 * math.pi] * 2)

    def test_type_ratio(self):
        """Test that pooled type-level numbers differ by the factor e^gamma_type."""
        history = EventHistory([10.0, 20.0, 30.0], [[50.0, 50.0]] * 3, [0, 1, 1], ["B", "C"])
        model = repro_model(["type"], ["B", "C"], history)
        theta = model.parameters([0.0, -3.0, -0.8496])
        summaries = reproduction_numbers(theta, np.zeros((3, 3)), model, n_bootstrap=10)
        assert summaries[1].estimate / summaries[0].estimate == pytest.approx(0.4276, abs=1e-4)

    def test_zero_covariance_collapses_interval(self):
        """Test that without parameter uncertainty the interval is the estimate."""
        model = repro_model()
        theta = model.parameters([0.0, -2.0])
        summary = reproduction_numbers(theta, np.zeros((2, 2)), model, n_bootstrap=50)[0]
        assert summary.ci_lower == pytest.approx(summary.estimate)
        assert summary.ci_upper == pytest.approx(summary.estimate)
        assert summary.n_bootstrap == 50

    def test_interval_contains_estimate(self):
        """Test that the bootstrap interval brackets the point estimate."""
        model = repro_model()
        theta = model.parameters([0.0, -2.0])
        summary = reproduction_numbers(theta, np.diag([0.1, 0.2]), model, n_bootstrap=200, seed=4)[0]
        assert summary.ci_lower <= summary.estimate <= summary.ci_upper
        assert summary.ci_upper > summary.ci_lower

    def test_monotone_in_gamma0(self):
        """Test that raising the epidemic intercept raises mu."""
        model = repro_model()
        estimates = [reproduction_numbers(model.parameters([0.0, g]), np.zeros((2, 2)), model, n_bootstrap=0)[0].estimate
                     for g in (-3.0, -2.0, -1.0)]
        assert estimates == sorted(estimates)

    def test_by_type_skips_types_without_events(self):
        """Test that by-type averaging skips empty types."""
        history = EventHistory([10.0, 20.0], [[50.0, 50.0]] * 2, [0, 0], ["B", "C"])
        model = repro_model(["type"], ["B", "C"], history)
        summaries = reproduction_numbers(model.parameters([0.0, -3.0, 0.5]), np.zeros((3, 3)), model, n_bootstrap=0, by_type=True)
        assert [s.type_name for s in summaries] == ["B"]

    def test_endemic_only_model(self, unit_grid, homogeneous_history, endemic_spec):
        """Test that an endemic-only model has no reproduction number."""
        model = IntensityModel(unit_grid, endemic_spec, homogeneous_history)
        with pytest.raises(ValidationError):
            reproduction_numbers(model.parameters([0.0]), np.zeros((1, 1)), model)

    def test_covariance_shape(self):
        """Test that the covariance must be P x P."""
        model = repro_model()
        with pytest.raises(ValidationError):
            reproduction_numbers(model.parameters([0.0, -2.0]), np.zeros((3, 3)), model)

    def test_psd_projection(self):
        """Test that negative eigenvalues are clipped to zero."""
        projected = project_psd(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert np.min(np.linalg.eigvalsh(projected)) >= -1e-12
        np.testing.assert_allclose(projected, [[1.5, 1.5], [1.5, 1.5]])


class TestEnvelope:
    """Per-tile incidence envelopes."""

    @pytest.fixture
    def envelope_model(self):
        grid = regular_grid(2, 1, 1.0, 50.0, 1, populations=[1000.0, 0.0])
        spec = ModelSpec(epidemic=False, seed=3)
        history = EventHistory([1.0, 2.0, 3.0], [[0.5, 0.5], [0.2, 0.7], [1.5, 0.5]], [0, 0, 0], ["1"])
        return IntensityModel(grid, spec, history)

    def test_zero_population_tile_is_excluded(self, envelope_model):
        """Test that a tile with population 0 is listed as excluded and not flagged."""
        envelope = incidence_envelope(envelope_model.parameters([0.0]), envelope_model, n_sims=20)
        assert envelope.excluded == ["1_0"]
        assert envelope.tile_ids == ["0_0"]
        assert envelope.n_sims == 20

    def test_observed_incidence(self, envelope_model):
        """Test the observed incidence per 100000 inhabitants."""
        envelope = incidence_envelope(envelope_model.parameters([0.0]), envelope_model, n_sims=5)
        assert envelope.observed[0] == pytest.approx(2 / 1000.0 * 100000.0)

    def test_too_low_rate_is_flagged_high(self, envelope_model):
        """Test that a rate far below the data flags the tile as high."""
        envelope = incidence_envelope(envelope_model.parameters([-20.0]), envelope_model, n_sims=20)
        assert envelope.rows()[0]["flag"] == "high"
        assert envelope.flag_rate == 1.0

    def test_no_simulations(self, envelope_model):
        """Test that at least one simulation is needed."""
        with pytest.raises(EnvelopeError):
            incidence_envelope(envelope_model.parameters([0.0]), envelope_model, n_sims=0)

    def test_no_populations(self):
        """Test that a grid without populations has no envelope."""
        grid = regular_grid(1, 1, 1.0, 10.0, 1)
        model = IntensityModel(grid, ModelSpec(epidemic=False), EventHistory.empty(["1"]))
        with pytest.raises(EnvelopeError):
            incidence_envelope(model.parameters([0.0]), model, n_sims=2)

    def test_tile_counts(self, envelope_model):
        """Test the per-tile event counts."""
        np.testing.assert_array_equal(tile_counts(envelope_model.history.xy, envelope_model), [2, 1])


class TestPlotData:
    """Tables behind the fitted trend and season plot and the spatial interaction plot."""

    def test_seasonal_curve(self):
        """Test that the curve is exp(b_sin sin + b_cos cos) of the day, without the intercept."""
        grid = regular_grid(1, 1, 1.0, 365.0, 2)
        spec = ModelSpec(endemic_terms=["sin", "cos"], epidemic=False)
        model = IntensityModel(grid, spec, EventHistory.empty(["1"]))
        curve = endemic_curve(model.parameters([-3.0, 0.5, -0.2]), model)
        assert len(curve.times) == 730
        assert curve.terms == ["sin", "cos"]
        angle = 2.0 * math.pi * 100.0 / Globals.DAYS_PER_YEAR
        assert curve.multiplier[0] == pytest.approx(math.exp(-0.2))
        assert curve.multiplier[100] == pytest.approx(math.exp(0.5 * math.sin(angle) - 0.2 * math.cos(angle)))
        assert curve.rows()[100]["t"] == 100.0

    def test_covariates_leave_the_curve_flat(self, square_grid, two_type_spec, two_type_history):
        """Test that gridded covariates do not enter the trend and season curve."""
        model = IntensityModel(square_grid, two_type_spec, two_type_history)
        curve = endemic_curve(model.parameters(np.full(model.layout.size, 0.3)), model, step=2.0)
        assert curve.terms == []
        assert len(curve.times) == 50
        np.testing.assert_array_equal(curve.multiplier, 1.0)

    def test_interaction_curve_scaled_by_type(self, square_grid, two_type_spec, two_type_history):
        """Test f(r) exp(eta_k) per type with marks at zero: type C carries its type coefficient."""
        model = IntensityModel(square_grid, two_type_spec, two_type_history)
        layout = model.layout
        values = np.full(layout.size, 0.05)
        values[layout.gamma.start] = -2.0
        type_c = layout.gamma.start + next(k for k, name in enumerate(layout.epidemic_names) if name.startswith("type"))
        values[type_c] = 0.7
        values[layout.log_sigma] = 0.5
        curve = interaction_curve(model.parameters(values), model, n_points=11)
        np.testing.assert_allclose(curve.distances, np.linspace(0.0, 5.0, 11))
        np.testing.assert_allclose(curve.values[0], [math.exp(-2.0), math.exp(-1.3)])
        np.testing.assert_allclose(curve.values[-1], np.exp([-2.0, -1.3]) * math.exp(-0.5 * 25.0 * math.exp(-1.0)))
        assert curve.fieldnames == ["distance", "B", "C"]
        assert curve.rows()[-1]["distance"] == 5.0

    def test_endemic_only_has_no_interaction_curve(self, unit_grid, endemic_spec):
        """Test that an endemic-only model is refused."""
        model = IntensityModel(unit_grid, endemic_spec, EventHistory.empty(["1"]))
        with pytest.raises(ValidationError):
            interaction_curve(model.parameters([0.0]), model)
