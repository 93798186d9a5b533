import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from esvm.targets import (
    LabeledDataset,
    QuadraticModel,
    load_dataset_csv,
    make_gmm_posterior,
    make_logistic_posterior,
    make_toy_target,
    standard_gaussian,
    synthetic_logistic_dataset,
)
from conftest import all_subsets, central_difference, small_quadratic


def _logistic_model(seed=0, n=60, d=4, g=5.0):
    data = synthetic_logistic_dataset(n, d, np.random.default_rng(seed))
    return make_logistic_posterior(data, g), data


def _models():
    obs = np.random.default_rng(3).normal(size=25) + 1.0
    return [standard_gaussian(3), small_quadratic(), make_toy_target(),
            make_gmm_posterior(obs, 100.0), _logistic_model()[0]]


def test_standard_gaussian_minimum():
    assert standard_gaussian(3).potential(np.zeros(3)) == 0.0


def test_toy_potential_at_origin_closed_form():
    # (|x| - mu)^2 / 2 - log(2 exp(-mu^2 / (2 sigma^2))) with mu = sigma = 3
    expected = 9.0 / 2.0 - math.log(2.0 * math.exp(-9.0 / 18.0))
    assert make_toy_target().potential(np.zeros(2)) == pytest.approx(expected, abs=1e-12)


def test_nan_input_rejected():
    with pytest.raises(ValueError):
        standard_gaussian(2).potential(np.array([0.0, np.nan]))


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        standard_gaussian(2).full_gradient(np.zeros(3))


def test_quadratic_gradient_identity():
    np.testing.assert_array_equal(standard_gaussian(2).full_gradient(np.array([1.0, -2.0])), [1.0, -2.0])


@pytest.mark.parametrize("point", [(1.0, 1.0), (2.0, 1.0), (-0.3, 2.5)])
def test_toy_gradient_finite_differences(point):
    m = make_toy_target()
    theta = np.array(point)
    np.testing.assert_allclose(m.full_gradient(theta), central_difference(m.potential, theta), rtol=1e-5)


def test_toy_symmetric_in_first_coordinate(rng):
    m = make_toy_target()
    for x in rng.normal(scale=3, size=(20, 2)):
        assert m.potential(x) == pytest.approx(m.potential(x * [-1, 1]), abs=1e-12)


def test_toy_gradient_at_origin_is_finite_and_zero():
    np.testing.assert_array_equal(make_toy_target().full_gradient(np.zeros(2)), [0.0, 0.0])


def test_full_gradient_is_sum_of_components():
    m = small_quadratic(K=6, dim=3)
    theta = np.array([0.3, -1.0, 2.0])
    total = m.base_gradient(theta) + sum(m.component_gradients(theta, np.array([i]))[0] for i in range(6))
    np.testing.assert_allclose(m.full_gradient(theta), total, atol=1e-12)


def test_stochastic_full_batch_equals_full_gradient():
    m = small_quadratic()
    theta = np.array([0.5, -0.25])
    np.testing.assert_allclose(m.stochastic_gradient(theta, np.arange(4)), m.full_gradient(theta), atol=1e-12)


def test_stochastic_gradient_unbiased_by_enumeration():
    m = small_quadratic(K=4)
    theta = np.array([1.5, -0.7])
    mean = np.mean([m.stochastic_gradient(theta, s) for s in all_subsets(4, 2)], axis=0)
    np.testing.assert_allclose(mean, m.full_gradient(theta), atol=1e-12)


@pytest.mark.parametrize("batch", [[4], [], [1, 1], [-1]])
def test_bad_batches_rejected(batch):
    with pytest.raises(ValueError):
        small_quadratic(K=4).stochastic_gradient(np.zeros(2), np.array(batch, dtype=int))


def test_gmm_symmetric_and_prior():
    obs = np.random.default_rng(0).normal(size=100)
    m = make_gmm_posterior(obs, 100.0)
    for mu in (0.3, 1.7, 4.0):
        assert m.potential(np.array([mu])) == pytest.approx(m.potential(np.array([-mu])), abs=1e-12)
    # prior N(0, 100): base term mu^2 / 200
    assert m.base_potential(np.array([2.0])) == pytest.approx(4.0 / 200.0)
    assert m.n_components == 100 and m.dim == 1


def test_gmm_component_terms_match_mixture_density():
    obs = np.array([-1.2, 0.4, 2.5])
    m = make_gmm_posterior(obs, 100.0)
    mu = 0.7
    dens = 0.5 * np.exp(-(obs + mu) ** 2 / 2) + 0.5 * np.exp(-(obs - mu) ** 2 / 2)
    diffs = m.component_potentials(np.array([mu])) + np.log(dens)
    # equal up to a per-component constant that does not depend on mu
    dens0 = np.exp(-obs**2 / 2)
    np.testing.assert_allclose(diffs, (m.component_potentials(np.array([0.0])) + np.log(dens0)), atol=1e-12)


def test_gmm_component_gradients_finite_differences():
    obs = np.random.default_rng(1).normal(size=10)
    m = make_gmm_posterior(obs, 100.0)
    theta = np.array([0.7])
    for i in range(10):
        fd = central_difference(lambda t: m.component_potentials(t, np.array([i]))[0], theta)
        np.testing.assert_allclose(m.component_gradients(theta, np.array([i]))[0], fd, rtol=1e-5)


def test_gmm_empty_data_rejected():
    with pytest.raises(ValueError):
        make_gmm_posterior(np.array([]), 100.0)


def test_logistic_at_zero():
    m, data = _logistic_model()
    assert m.potential(np.zeros(data.dim)) == pytest.approx(data.size * math.log(2.0), abs=1e-12)
    np.testing.assert_allclose(m.component_potentials(np.zeros(data.dim)), math.log(2.0), atol=1e-15)


def test_logistic_gradient_finite_differences(rng):
    m, data = _logistic_model()
    theta = rng.normal(size=data.dim)
    np.testing.assert_allclose(m.full_gradient(theta), central_difference(m.potential, theta), rtol=1e-5)


def test_zellner_gram_is_identity():
    m, data = _logistic_model()
    np.testing.assert_allclose(m.features.T @ m.features, np.eye(data.dim), atol=1e-8)


def test_logistic_bad_inputs():
    data = synthetic_logistic_dataset(30, 3, np.random.default_rng(0))
    with pytest.raises(ValueError):
        make_logistic_posterior(data, 0.0)
    singular = LabeledDataset(np.column_stack([data.features[:, :2], data.features[:, 1]]), data.labels)
    with pytest.raises(np.linalg.LinAlgError, match="condition"):
        make_logistic_posterior(singular, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 1.0))
def test_logistic_convex_along_segments(seed, t):
    m, data = _logistic_model()
    r = np.random.default_rng(seed)
    a, b = r.normal(scale=5, size=(2, data.dim))
    mid = m.potential(t * a + (1 - t) * b)
    assert mid <= t * m.potential(a) + (1 - t) * m.potential(b) + 1e-10


@pytest.mark.parametrize("model", _models(), ids=lambda m: type(m).__name__)
def test_gradient_invariant_for_all_models(model):
    r = np.random.default_rng(7)
    for _ in range(20):
        theta = r.normal(scale=2.0, size=model.dim)
        g = model.full_gradient(theta)
        fd = central_difference(model.potential, theta)
        assert np.linalg.norm(g - fd) / (1 + np.linalg.norm(g)) <= 1e-5


def test_load_dataset_roundtrip(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("label,x1,x2\n1,0.5,1.0\n-1,2.0,3.0\n1,-1.0,0.0\n")
    data = load_dataset_csv(p)
    assert data.size == 3 and data.dim == 2
    np.testing.assert_array_equal(data.labels, [1, -1, 1])


def test_load_dataset_maps_zero_one_labels(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("0,1.0\n1,2.0\n0,3.0\n")
    np.testing.assert_array_equal(load_dataset_csv(p).labels, [-1, 1, -1])


def test_load_dataset_reports_line(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1,1.0,2.0\n-1,abc,2.0\n")
    with pytest.raises(ValueError, match="line 2"):
        load_dataset_csv(p)


def test_load_dataset_inconsistent_columns(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("1,1.0,2.0\n-1,2.0\n")
    with pytest.raises(ValueError, match="line 2"):
        load_dataset_csv(p)
