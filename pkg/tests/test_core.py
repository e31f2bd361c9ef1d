import json

import numpy as np
import pytest

from otmtr.core import (
    GroundMetric,
    MtwHyperparams,
    MultiTaskProblem,
    resolve_epsilon,
    resolve_gamma,
    standardize_problem,
    validate_problem,
)
from otmtr.errors import (
    DegenerateMassError,
    EmptyProblemError,
    NonFiniteError,
    ShapeMismatchError,
    ZeroMedianError,
)


def make_problem(shapes, rng=None):
    rng = rng or np.random.default_rng(0)
    designs = [rng.standard_normal(s) for s in shapes]
    targets = [rng.standard_normal(s[0]) for s in shapes]
    return MultiTaskProblem.from_arrays(designs, targets)


class TestValidateProblem:
    def test_well_formed(self):
        validate_problem(make_problem([(3, 5), (3, 5)]))

    def test_shape_mismatch(self):
        rng = np.random.default_rng(0)
        designs = [rng.standard_normal((3, 5)), rng.standard_normal((3, 6))]
        targets = [rng.standard_normal(3)] * 2
        prob = MultiTaskProblem.from_arrays(designs, targets)
        with pytest.raises(ShapeMismatchError):
            validate_problem(prob)

    def test_nan_design(self):
        prob = make_problem([(3, 5), (3, 5)])
        bad = prob.designs[0].copy()
        bad[1, 2] = np.nan
        prob2 = MultiTaskProblem.from_arrays([bad, prob.designs[1]],
                                             list(prob.targets))
        with pytest.raises(NonFiniteError):
            validate_problem(prob2)

    def test_target_length_mismatch(self):
        prob = make_problem([(4, 3)])
        prob2 = MultiTaskProblem.from_arrays(list(prob.designs),
                                             [np.ones(5)])
        with pytest.raises(ShapeMismatchError):
            validate_problem(prob2)

    def test_empty(self):
        with pytest.raises(EmptyProblemError):
            MultiTaskProblem.from_arrays([], [])


class TestResolveGamma:
    def test_auto_formula(self):
        params = MtwHyperparams(gamma="auto", tau=0.5)
        assert resolve_gamma(params, [4.0, 4.0]) == pytest.approx(2.0)

    def test_explicit_passthrough(self):
        params = MtwHyperparams(gamma=3.7)
        assert resolve_gamma(params, [1.0, 0.0]) == 3.7

    def test_partial_masses(self):
        # tau (mean sqrt)^2 with masses (1, 0, 0): 0.5 * (1/3)^2
        params = MtwHyperparams(gamma="auto", tau=0.5)
        value = resolve_gamma(params, [1.0, 0.0, 0.0])
        assert value == pytest.approx(0.5 / 9.0, rel=1e-12)

    def test_all_zero_masses(self):
        params = MtwHyperparams(gamma="auto")
        with pytest.raises(DegenerateMassError):
            resolve_gamma(params, [0.0, 0.0])

    @pytest.mark.parametrize("c", [0.5, 2.0, 13.0])
    def test_scale_covariance(self, c):
        params = MtwHyperparams(gamma="auto", tau=0.37)
        masses = np.array([1.0, 2.5, 0.2])
        base = resolve_gamma(params, masses)
        scaled = resolve_gamma(params, c ** 2 * masses)
        assert scaled == pytest.approx(c ** 2 * base, rel=1e-12)


class TestResolveEpsilon:
    def test_formula(self):
        metric = GroundMetric.dense(np.array([[0.0, 2.0, 2.0],
                                              [2.0, 0.0, 2.0],
                                              [2.0, 2.0, 0.0]]))
        assert metric.median_cost == 2.0
        assert resolve_epsilon(metric, 10) == pytest.approx(0.05)

    def test_identity_case(self):
        metric = GroundMetric.dense(np.array([[0.0, 1.0, 1.0],
                                              [1.0, 0.0, 1.0],
                                              [1.0, 1.0, 0.0]]))
        assert metric.median_cost == 1.0
        assert resolve_epsilon(metric, 1) == pytest.approx(1.0)

    def test_grid_median_matches_bruteforce(self):
        for shape in [(3, 4), (5, 5), (24, 24)]:
            metric = GroundMetric.grid2d(*shape)
            M = metric.materialize()
            assert metric.median_cost == pytest.approx(np.median(M),
                                                       rel=0, abs=0)
            p = shape[0] * shape[1]
            assert resolve_epsilon(metric, p) == pytest.approx(
                1.0 / (np.median(M) * p), rel=1e-15)

    def test_scaled_identity(self):
        # epsilon * s * p == 1 exactly for every valid metric
        rng = np.random.default_rng(4)
        for _ in range(5):
            A = np.abs(rng.standard_normal((6, 6)))
            M = A + A.T
            np.fill_diagonal(M, 0.0)
            metric = GroundMetric.dense(M)
            eps = resolve_epsilon(metric, 6)
            assert eps * metric.median_cost * 6 == pytest.approx(1.0,
                                                                 rel=1e-12)

    def test_zero_median(self):
        M = np.zeros((3, 3))
        metric = GroundMetric.dense(M)
        with pytest.raises(ZeroMedianError):
            resolve_epsilon(metric, 3)


class TestGroundMetric:
    def test_grid_materialize(self):
        metric = GroundMetric.grid2d(2, 3)
        M = metric.materialize()
        # feature 0 is pixel (0,0), feature 5 is pixel (1,2)
        assert M[0, 5] == 1.0 + 4.0
        assert np.allclose(M, M.T)
        assert np.all(np.diag(M) == 0)

    def test_normalized_median_one(self):
        metric = GroundMetric.grid2d(8, 8).normalized()
        assert metric.median_cost == pytest.approx(1.0, rel=1e-12)
        M = metric.materialize()
        assert np.median(M) == pytest.approx(1.0, rel=1e-12)

    def test_dense_rejects_negative(self):
        with pytest.raises(ValueError):
            GroundMetric.dense(np.array([[0.0, -1.0], [1.0, 0.0]]))

    def test_dense_rejects_nonzero_diagonal(self):
        with pytest.raises(ValueError):
            GroundMetric.dense(np.eye(3))


class TestHyperparams:
    def test_json_round_trip(self, tmp_path):
        params = MtwHyperparams(mu=2.0, lam=0.1, epsilon=0.05, gamma=1.5,
                                positive=True)
        d = params.to_dict()
        assert "lambda" in d and "lam" not in d
        again = MtwHyperparams.from_dict(json.loads(json.dumps(d)))
        assert again == params

    def test_defaults(self):
        params = MtwHyperparams()
        assert params.tau == 0.5
        assert params.max_outer == 2000
        assert params.tol_outer == 1e-5
        assert params.max_sinkhorn == 20
        assert params.tol_sinkhorn == 1e-4
        assert params.max_cd == 10000
        assert params.tol_cd == 1e-6

    @pytest.mark.parametrize("kwargs", [
        {"epsilon": 0.0}, {"tau": 1.0}, {"tau": 0.0}, {"gamma": -1.0},
        {"tol_outer": 0.0}, {"max_cd": 0}, {"mu": -0.1},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            MtwHyperparams(**kwargs).validate()


def test_standardize_problem():
    prob = make_problem([(6, 4), (6, 4)])
    std, scales = standardize_problem(prob)
    for t, X in enumerate(std.designs):
        assert np.allclose(np.linalg.norm(X, axis=0), 1.0)
        assert np.allclose(X * scales[:, t], prob.designs[t])
    # zero column keeps scale 1
    X0 = prob.designs[0].copy()
    X0[:, 1] = 0.0
    std2, scales2 = standardize_problem(
        MultiTaskProblem.from_arrays([X0], [prob.targets[0]]))
    assert scales2[1, 0] == 1.0
