"""Tests for the quasi-Newton optimizer, maximum likelihood fits and model search."""

import math

import numpy as np
import pytest

from Ansteckung.errors import ConvergenceError, FitError, ValidationError
from Ansteckung.fitting import FitResult, covariance_from_information, fit, initial_parameters, require_converged
from Ansteckung.interaction import InteractionSpec
from Ansteckung.likelihood import LikelihoodModel
from Ansteckung.model_search import build_lattice, model_label, model_search, power_set, ranking_rows
from Ansteckung.model_spec import ModelSpec
from Ansteckung.optimizer import maximize_bfgs


def concave_quadratic(x):
    target = np.array([1.0, -2.0, 0.5])
    A = np.diag([1.0, 4.0, 0.25])
    d = x - target
    return -0.5 * float(d @ A @ d), -(A @ d)


def rosenbrock(x):
    a, b = x
    value = -((1 - a) ** 2 + 100 * (b - a * a) ** 2)
    gradient = np.array([2 * (1 - a) + 400 * a * (b - a * a), -200 * (b - a * a)])
    return value, gradient


class TestOptimizer:
    """The optimizer on functions with known maxima."""

    def test_quadratic(self):
        """Test that a concave quadratic is maximized at its centre."""
        result = maximize_bfgs(concave_quadratic, np.zeros(3))
        assert result.converged
        np.testing.assert_allclose(result.x, [1.0, -2.0, 0.5], atol=1e-5)

    def test_rosenbrock(self):
        """Test the banana valley from the classical start."""
        result = maximize_bfgs(rosenbrock, [-1.2, 1.0], max_iterations=1000, relative_tolerance=0.0)
        np.testing.assert_allclose(result.x, [1.0, 1.0], atol=1e-3)

    def test_values_never_decrease(self):
        """Test that accepted iterates are monotone."""
        result = maximize_bfgs(rosenbrock, [-1.2, 1.0], max_iterations=200)
        assert all(b >= a for a, b in zip(result.trace, result.trace[1:]))

    def test_non_finite_start(self):
        """Test that the starting values must have a finite objective."""
        with pytest.raises(FitError):
            maximize_bfgs(lambda x: (-math.inf, np.zeros_like(x)), np.zeros(2))

    def test_iteration_cap(self):
        """Test that running out of iterations is reported, not raised."""
        result = maximize_bfgs(rosenbrock, [-1.2, 1.0], max_iterations=2, relative_tolerance=0.0)
        assert not result.converged
        assert result.iterations == 2

    def test_already_optimal(self):
        """Test that a zero gradient at the start converges in zero iterations."""
        result = maximize_bfgs(concave_quadratic, [1.0, -2.0, 0.5])
        assert result.converged
        assert result.iterations == 0


class TestFit:
    """Fits with closed-form or known answers."""

    def test_homogeneous_closed_form(self, unit_grid, homogeneous_history, endemic_spec):
        """Test beta0_hat = log(n / (T |W| rho)) = 0 with standard error 1/sqrt(n)."""
        result = fit(LikelihoodModel(unit_grid, endemic_spec, homogeneous_history))
        assert result.converged
        assert result.theta.values[0] == pytest.approx(0.0, abs=1e-8)
        assert result.standard_errors[0] == pytest.approx(0.1, rel=1e-8)
        assert result.loglik == pytest.approx(-100.0)
        assert result.aic == pytest.approx(202.0)

    def test_two_type_fit_improves_on_start(self, square_grid, two_type_spec, two_type_history):
        """Test that the fitted log-likelihood is at least the starting value."""
        model = LikelihoodModel(square_grid, two_type_spec, two_type_history)
        start = initial_parameters(model)
        result = fit(model, start)
        assert result.loglik >= model.log_likelihood(start).loglik
        assert result.covariance.shape == (model.layout.size, model.layout.size)

    def test_initial_parameters(self, square_grid, two_type_spec, two_type_history):
        """Test the documented starting values for the interaction scales."""
        model = LikelihoodModel(square_grid, two_type_spec, two_type_history)
        start = initial_parameters(model)
        assert start.log_sigma[0] == pytest.approx(math.log(0.5))
        assert start.log_alpha[0] == pytest.approx(math.log(0.1))
        assert start.gamma[0] == -10.0

    def test_layout_mismatch(self, unit_grid, homogeneous_history, endemic_spec, square_grid, two_type_spec, two_type_history):
        """Test that starting values from another model are rejected."""
        other = LikelihoodModel(square_grid, two_type_spec, two_type_history)
        with pytest.raises(ValidationError):
            fit(LikelihoodModel(unit_grid, endemic_spec, homogeneous_history), initial_parameters(other))

    def test_result_dictionary_round_trip(self, unit_grid, homogeneous_history, endemic_spec):
        """Test that a fit result survives its JSON dictionary form."""
        result = fit(LikelihoodModel(unit_grid, endemic_spec, homogeneous_history))
        again = FitResult.from_dict(result.to_dict())
        assert again.layout == result.layout
        assert again.loglik == result.loglik
        np.testing.assert_array_equal(again.covariance, result.covariance)

    def test_table_text(self, unit_grid, homogeneous_history, endemic_spec):
        """Test that the table lists every parameter with the fit summary."""
        result = fit(LikelihoodModel(unit_grid, endemic_spec, homogeneous_history))
        text = result.table_text()
        assert "endemic.intercept" in text
        assert "AIC" in text

    def test_require_converged(self, unit_grid, homogeneous_history, endemic_spec):
        """Test that a non-converged result raises on demand."""
        result = fit(LikelihoodModel(unit_grid, endemic_spec, homogeneous_history))
        assert require_converged(result) is result
        result.converged = False
        with pytest.raises(ConvergenceError):
            require_converged(result)

    def test_singular_information_uses_pseudo_inverse(self):
        """Test that a rank-deficient information matrix still yields a covariance."""
        covariance = covariance_from_information(np.array([[1.0, 1.0], [1.0, 1.0]]))
        np.testing.assert_allclose(covariance, [[0.25, 0.25], [0.25, 0.25]])

    def test_likelihood_ratio(self, unit_grid, homogeneous_history, endemic_spec):
        """Test the likelihood ratio of a model against itself."""
        result = fit(LikelihoodModel(unit_grid, endemic_spec, homogeneous_history))
        lr = result.likelihood_ratio(result)
        assert lr["statistic"] == 0.0
        assert lr["df"] == 0


class TestModelSearch:
    """Lattice construction and AIC ranking."""

    def test_power_set(self):
        """Test that the power set includes the empty selection first."""
        assert power_set(["a", "b"]) == [[], ["a"], ["b"], ["a", "b"]]

    def test_lattice_size(self):
        """Test 2^2 endemic subsets times (2^1 epidemic subsets + endemic-only)."""
        base = ModelSpec(endemic_terms=["trend", "sin"], epidemic_terms=["age"])
        lattice = build_lattice(base, base.endemic_terms, base.epidemic_terms)
        assert len(lattice) == 4 * 3
        assert sum(1 for spec in lattice if not spec.epidemic) == 4

    def test_labels(self):
        """Test the candidate labels."""
        assert model_label(ModelSpec(endemic_terms=["trend"], epidemic=False)) == "endemic[trend] epidemic[none]"
        assert model_label(ModelSpec(epidemic_terms=["age"])) == "endemic[1] epidemic[age] f=constant"

    def test_single_candidate(self, unit_grid, homogeneous_history, endemic_spec):
        """Test that one endemic-only candidate comes back alone with stage 1."""
        ranking = model_search(homogeneous_history, unit_grid, [endemic_spec])
        assert len(ranking) == 1
        assert ranking[0].stage == 1
        assert ranking[0].aic == pytest.approx(202.0)

    def test_ranking_is_sorted_by_aic(self, unit_grid, homogeneous_history, endemic_spec):
        """Test that the ranking is ordered by AIC with failed fits last."""
        candidates = [endemic_spec, ModelSpec(interaction=InteractionSpec(eps=5.0, delta=0.1))]
        ranking = model_search(homogeneous_history, unit_grid, candidates, refit_gaussian=False)
        aics = [entry.aic for entry in ranking]
        assert aics == sorted(aics)
        rows = ranking_rows(ranking)
        assert [row["rank"] for row in rows] == [1, 2]

    def test_empty_candidate_list(self, unit_grid, homogeneous_history):
        """Test that a search needs candidates."""
        from Ansteckung.errors import AnsteckungError
        with pytest.raises(AnsteckungError):
            model_search(homogeneous_history, unit_grid, [])
