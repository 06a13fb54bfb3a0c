from __future__ import annotations

import pytest

from gossipaudit import QuadraticLoss, StepSchedule, complete
from gossipaudit.harness import build_sources


@pytest.fixture
def small_quadratic():
    """4 agents on K4, heterogeneous means, d=2."""
    graph = complete(4)
    loss = QuadraticLoss(
        means=((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)),
        noise_sd=0.3,
    )
    return graph, loss


def make_run(graph, loss, seed, rounds=25, alpha0=0.9, eta0=0.15, batch=5, strategy=None):
    from gossipaudit import run_learning

    sched = StepSchedule(alpha0=alpha0, eta0=eta0, rounds=rounds)
    sched.validate(loss.beta, loss.mu, graph.max_degree())
    sources = build_sources(loss, graph, batch, seed)
    return run_learning(graph, sources, sched, strategy), sched
