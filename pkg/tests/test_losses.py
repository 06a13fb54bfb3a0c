import math

import numpy as np
import pytest

from gossipaudit import (
    AgentDataSource,
    CustomLoss,
    LogisticLoss,
    ModelVec,
    QuadraticLoss,
    UnsupportedOracle,
    check_admissible,
    global_minimizer,
    heterogeneity,
    stochastic_gradient,
)
from gossipaudit.fixed import SCALE, vec_from_floats
from gossipaudit.rng import stream


def quad(means, sd=0.5):
    return QuadraticLoss(means=tuple(tuple(m) for m in means), noise_sd=sd)


def test_global_minimizer_two_agents():
    loss = quad([[0.0], [2.0]])
    assert global_minimizer(loss).to_floats() == (1.0,)


def test_global_minimizer_single_agent():
    loss = quad([[3.25]])
    assert global_minimizer(loss).to_floats() == (3.25,)


def test_global_minimizer_three_agents_2d():
    loss = quad([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    assert global_minimizer(loss).to_floats() == (1.0, 1.0)


def test_heterogeneity_examples():
    loss = quad([[0.0], [2.0]])
    assert heterogeneity(loss) == pytest.approx(1.0)
    same = quad([[0.7, -0.3]] * 4)
    assert heterogeneity(same) == pytest.approx(0.0, abs=1e-18)
    tri = quad([[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]])
    # gradients at (1,1): (1,1), (-2,1), (1,-2) -> (2 + 5 + 5)/3
    assert heterogeneity(tri) == pytest.approx(4.0)


def test_heterogeneity_at_given_point():
    loss = quad([[0.0], [2.0]])
    val = heterogeneity(loss, ModelVec.from_floats([0.0]))
    assert val == pytest.approx((0.0 + 4.0) / 2)


def test_check_admissible_witness_construction():
    loss = quad([[0.0], [123.0]])  # agent 1's distribution is irrelevant here
    res = check_admissible(ModelVec.from_floats([0.5]), [0], loss, delta=1.0, tol=1e-9)
    assert res.admissible
    assert len(res.witness) == 1
    assert res.witness[0].to_floats()[0] == pytest.approx(-0.5)
    assert res.statistic == pytest.approx(0.25)

    bad = check_admissible(ModelVec.from_floats([2.0]), [0], loss, delta=1.0, tol=1e-9)
    assert not bad.admissible
    assert bad.statistic == pytest.approx(4.0)


def test_check_admissible_full_set_at_minimizer():
    loss = quad([[0.0, 1.0], [2.0, -1.0], [1.0, 0.0]])
    xstar = global_minimizer(loss)
    delta = heterogeneity(loss)
    assert check_admissible(xstar, [0, 1, 2], loss, delta, tol=1e-6)
    # monotone in delta
    assert check_admissible(xstar, [0, 1, 2], loss, delta + 5.0, tol=1e-6)
    # gradients do not sum to zero away from the minimizer
    off = ModelVec.from_floats([9.0, 9.0])
    assert not check_admissible(off, [0, 1, 2], loss, delta, tol=1e-6)


def test_check_admissible_requires_members():
    loss = quad([[0.0]])
    with pytest.raises(ValueError):
        check_admissible(ModelVec.zeros(1), [], loss, 1.0, 0.0)


def _source(loss, agent, k, seed=0):
    return AgentDataSource(agent, loss, k, stream(seed, "data", agent))


def test_stochastic_gradient_single_sample():
    loss = quad([[0.0, 0.0]], sd=0.0)
    src = _source(loss, 0, 1)
    g = stochastic_gradient(src, vec_from_floats([1.0, 0.0]), 1)
    assert g == vec_from_floats([1.0, 0.0])


def test_stochastic_gradient_zero_at_sample_mean():
    loss = quad([[0.7, -0.2]], sd=0.0)  # every sample equals the mean
    src = _source(loss, 0, 4)
    x = vec_from_floats([0.7, -0.2])
    assert stochastic_gradient(src, x, 1) == (0, 0)


def test_stochastic_gradient_explicit_average():
    # x=0, samples {1, 3}: mean gradient = -2
    loss = CustomLoss(
        n_agents=1, dim=1, beta=1.0, mu=1.0,
        sample=lambda gen, agent, k: np.array([[1.0], [3.0]]),
        gradient=lambda x, batch: x - batch.mean(axis=0),
    )
    src = _source(loss, 0, 2)
    assert stochastic_gradient(src, (0,), 1) == ((-2) * SCALE,)


def test_round_order_enforced():
    loss = quad([[0.0]])
    src = _source(loss, 0, 2)
    src.batch(1)
    with pytest.raises(RuntimeError):
        src.batch(3)


def test_monte_carlo_oracle_consistency():
    loss = quad([[0.4, -1.1]], sd=0.5)
    n = 100_000
    gen = stream(3, "mc")
    batch = loss.sample_batch(gen, 0, n)
    x = np.array([1.0, 1.0])
    avg = loss.batch_gradient(x, batch)
    exact = loss.mean_gradient(0, x)
    tol = 4 * loss.sigma_g / math.sqrt(n)
    assert np.linalg.norm(avg - exact) < tol


def test_quadratic_expected_loss():
    loss = quad([[1.0, 0.0]], sd=0.5)
    # 0.5*(||x-mu||^2 + d sd^2)
    assert loss.expected_loss(0, np.array([0.0, 0.0])) == pytest.approx(0.5 * (1.0 + 2 * 0.25))


def test_custom_loss_oracle_errors():
    loss = CustomLoss(
        n_agents=2, dim=1, beta=1.0, mu=0.5,
        sample=lambda gen, agent, k: np.zeros((k, 1)),
        gradient=lambda x, batch: x,
    )
    with pytest.raises(UnsupportedOracle):
        global_minimizer(loss)
    with pytest.raises(UnsupportedOracle):
        heterogeneity(loss)


def test_logistic_minimizer_high_precision():
    datasets = (
        (((1.0, 0.0), 1), ((0.0, 1.0), -1)),
        (((1.0, 1.0), 1), ((-1.0, 0.5), -1)),
    )
    loss = LogisticLoss(datasets=datasets, ridge=0.2)
    x = loss.minimizer_floats()
    g = np.mean([loss.mean_gradient(v, x) for v in range(2)], axis=0)
    assert np.linalg.norm(g) < 1e-10
    assert loss.beta >= loss.mu > 0


def test_logistic_symmetric_dataset_minimizer_zero():
    datasets = ((((1.0,), 1), ((1.0,), -1)),)
    loss = LogisticLoss(datasets=datasets, ridge=0.3)
    assert np.linalg.norm(loss.minimizer_floats()) < 1e-10


def test_quadratic_validates_parameters():
    with pytest.raises(ValueError):
        QuadraticLoss(means=((0.0,),), noise_sd=-1.0)
    with pytest.raises(ValueError):
        QuadraticLoss(means=((0.0,),), noise_sd=0.1, beta=0.5, mu=1.0)
