"""Loss families, per-agent data sources, and the analytic oracles used to
judge runs: the population minimizer, the heterogeneity level, and the
admissibility of a consensus model.

The quadratic family (``f(x, D) = 0.5 * ||x - D||^2`` with Gaussian data per
agent) has closed-form oracles and is the workhorse for experiments.  The
logistic family gets its oracle from a deterministic Newton solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .fixed import ModelVec, vec_from_floats


class UnsupportedOracle(Exception):
    """The loss family cannot answer analytic oracle queries."""


@dataclass(frozen=True)
class QuadraticLoss:
    """Agent v draws D ~ Normal(means[v], noise_sd**2 * I)."""

    means: tuple[tuple[float, ...], ...]
    noise_sd: float
    beta: float = 1.0
    mu: float = 1.0

    kind = "quadratic"
    has_oracle = True

    def __post_init__(self):
        if self.beta < self.mu or self.mu <= 0:
            raise ValueError("need beta >= mu > 0")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        dims = {len(m) for m in self.means}
        if len(dims) != 1:
            raise ValueError("agent means must share one dimension")

    @property
    def n_agents(self) -> int:
        return len(self.means)

    @property
    def dim(self) -> int:
        return len(self.means[0])

    @property
    def sigma_g(self) -> float:
        # Var ||grad|| per sample: d * noise_sd^2
        return self.noise_sd * math.sqrt(self.dim)

    def sample_batch(self, gen: np.random.Generator, agent: int, k: int) -> np.ndarray:
        return gen.normal(self.means[agent], self.noise_sd, size=(k, self.dim))

    def batch_gradient(self, x: np.ndarray, batch: np.ndarray) -> np.ndarray:
        return x - batch.mean(axis=0)

    def mean_gradient(self, agent: int, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) - np.asarray(self.means[agent])

    def expected_loss(self, agent: int, x: np.ndarray) -> float:
        d = np.asarray(x, dtype=float) - np.asarray(self.means[agent])
        return 0.5 * (float(d @ d) + self.dim * self.noise_sd**2)

    def minimizer_floats(self) -> np.ndarray:
        return np.mean(np.asarray(self.means, dtype=float), axis=0)


@dataclass(frozen=True)
class LogisticLoss:
    """Regularized binary logistic regression on finite per-agent supports.

    ``datasets[v]`` is a tuple of (features, label) pairs with label in
    {-1, +1}; agent v samples uniformly from its support.  The ridge term
    supplies strong convexity.
    """

    datasets: tuple[tuple[tuple[tuple[float, ...], int], ...], ...]
    ridge: float = 0.1

    kind = "logistic"
    has_oracle = True

    def __post_init__(self):
        if self.ridge <= 0:
            raise ValueError("ridge must be positive for strong convexity")
        for ds in self.datasets:
            if not ds:
                raise ValueError("every agent needs a nonempty support")

    @property
    def n_agents(self) -> int:
        return len(self.datasets)

    @property
    def dim(self) -> int:
        return len(self.datasets[0][0][0])

    @property
    def mu(self) -> float:
        return self.ridge

    @property
    def beta(self) -> float:
        worst = max(
            sum(a * a for a in feat)
            for ds in self.datasets
            for feat, _ in ds
        )
        return self.ridge + 0.25 * worst

    @property
    def sigma_g(self) -> float:
        # crude but valid: per-sample gradients are bounded by max ||a||
        return max(
            math.sqrt(sum(a * a for a in feat))
            for ds in self.datasets
            for feat, _ in ds
        )

    def sample_batch(self, gen: np.random.Generator, agent: int, k: int) -> list:
        ds = self.datasets[agent]
        idx = gen.integers(0, len(ds), size=k)
        return [ds[int(i)] for i in idx]

    def batch_gradient(self, x: np.ndarray, batch: list) -> np.ndarray:
        return _mean_logistic(np.asarray(x, dtype=float), batch, self.ridge)

    def mean_gradient(self, agent: int, x: np.ndarray) -> np.ndarray:
        return _mean_logistic(np.asarray(x, dtype=float), list(self.datasets[agent]), self.ridge)

    def expected_loss(self, agent: int, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        ds = self.datasets[agent]
        tot = 0.0
        for feat, label in ds:
            a = np.asarray(feat, dtype=float)
            tot += math.log1p(math.exp(-label * float(a @ x)))
        return tot / len(ds) + 0.5 * self.ridge * float(x @ x)

    def minimizer_floats(self) -> np.ndarray:
        """Newton solve of the population objective to ||grad|| < 1e-12."""
        d = self.dim
        x = np.zeros(d)
        pairs = [
            (np.asarray(feat, dtype=float), label)
            for ds in self.datasets
            for feat, label in ds
        ]
        weights = [1.0 / (self.n_agents * len(ds)) for ds in self.datasets for _ in ds]
        for _ in range(100):
            g = self.ridge * x
            h = self.ridge * np.eye(d)
            for w, (a, label) in zip(weights, pairs):
                z = label * float(a @ x)
                s = 1.0 / (1.0 + math.exp(z))
                g += w * (-label * s) * a
                h += w * s * (1.0 - s) * np.outer(a, a)
            if math.sqrt(float(g @ g)) < 1e-12:
                break
            x = x - np.linalg.solve(h, g)
        return x


def _mean_logistic(x: np.ndarray, batch: list, ridge: float) -> np.ndarray:
    g = np.zeros_like(x)
    for feat, label in batch:
        a = np.asarray(feat, dtype=float)
        z = label * float(a @ x)
        g += (-label / (1.0 + math.exp(z))) * a
    return g / len(batch) + ridge * x


@dataclass(frozen=True)
class CustomLoss:
    """Oracle-less loss defined by callables; usable for learning runs but
    not for classification or admissibility checks."""

    n_agents: int
    dim: int
    beta: float
    mu: float
    sample: Callable[[np.random.Generator, int, int], object]
    gradient: Callable[[np.ndarray, object], np.ndarray]

    kind = "custom"
    has_oracle = False

    def sample_batch(self, gen, agent, k):
        return self.sample(gen, agent, k)

    def batch_gradient(self, x, batch):
        return self.gradient(x, batch)

    def mean_gradient(self, agent, x):
        raise UnsupportedOracle("custom loss has no analytic gradient oracle")

    def expected_loss(self, agent, x):
        raise UnsupportedOracle("custom loss has no analytic loss oracle")

    def minimizer_floats(self):
        raise UnsupportedOracle("custom loss has no analytic minimizer")


class AgentDataSource:
    """Round-ordered mini-batch stream for one agent.

    Draws are consumed strictly in round order from a dedicated
    counter-based stream, so a (seed, agent) pair reproduces the same
    batch for every round across runs.
    """

    def __init__(self, agent: int, loss, batch_size: int, gen: np.random.Generator):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.agent = agent
        self.loss = loss
        self.batch_size = batch_size
        self._gen = gen
        self._next_round = 1

    def batch(self, t: int):
        if t != self._next_round:
            raise RuntimeError(
                f"agent {self.agent}: batches must be drawn in round order "
                f"(expected t={self._next_round}, got t={t})"
            )
        self._next_round += 1
        return self.loss.sample_batch(self._gen, self.agent, self.batch_size)


def stochastic_gradient(source: AgentDataSource, x_raw: Sequence[int], t: int) -> tuple[int, ...]:
    """Mini-batch averaged gradient at ``x`` for round ``t``, rounded to fixed."""
    if t < 1:
        raise ValueError("rounds are 1-indexed")
    from .fixed import vec_to_floats

    batch = source.batch(t)
    g = source.loss.batch_gradient(np.asarray(vec_to_floats(x_raw)), batch)
    return vec_from_floats(float(v) for v in g)


# -- population oracles -----------------------------------------------------

def global_minimizer(loss) -> ModelVec:
    """Minimizer of the population average loss (analytic oracles only)."""
    if not loss.has_oracle:
        raise UnsupportedOracle(f"{loss.kind} loss has no minimizer oracle")
    return ModelVec.from_floats(float(v) for v in loss.minimizer_floats())


def heterogeneity(loss, xstar: ModelVec | None = None) -> float:
    """Mean squared norm of per-agent expected gradients at the minimizer."""
    if not loss.has_oracle:
        raise UnsupportedOracle(f"{loss.kind} loss has no gradient oracle")
    x = np.asarray(
        loss.minimizer_floats() if xstar is None else xstar.to_floats(), dtype=float
    )
    total = 0.0
    for v in range(loss.n_agents):
        g = loss.mean_gradient(v, x)
        total += float(g @ g)
    return total / loss.n_agents


@dataclass(frozen=True)
class AdmissibilityResult:
    admissible: bool
    statistic: float
    witness: tuple[ModelVec, ...]

    def __bool__(self) -> bool:
        return self.admissible


def check_admissible(
    xhat: ModelVec,
    members: Sequence[int],
    loss,
    delta: float,
    tol: float,
) -> AdmissibilityResult:
    """Decide whether ``xhat`` is an admissible consensus model for the
    agent subset ``members`` at heterogeneity budget ``delta``.

    Existence of companion gradients for the remaining agents is decided
    by the minimum-energy witness: splitting the negated gradient sum
    equally minimizes the witness norm mass subject to the zero-sum
    constraint, so the test is sound and complete.
    """
    members = sorted(set(members))
    if not members:
        raise ValueError("members must be nonempty")
    if not loss.has_oracle:
        raise UnsupportedOracle(f"{loss.kind} loss has no gradient oracle")
    n = loss.n_agents
    x = np.asarray(xhat.to_floats(), dtype=float)
    grads = [loss.mean_gradient(u, x) for u in members]
    gsum = np.sum(grads, axis=0)
    sq_mass = sum(float(g @ g) for g in grads)
    others = [v for v in range(n) if v not in set(members)]
    if not others:
        stat = sq_mass / n
        ok = math.sqrt(float(gsum @ gsum)) <= tol and stat <= delta + tol
        return AdmissibilityResult(ok, stat, ())
    w = -gsum / len(others)
    stat = (sq_mass + len(others) * float(w @ w)) / n
    ok = stat <= delta + tol
    witness = tuple(ModelVec.from_floats(float(v) for v in w) for _ in others)
    return AdmissibilityResult(ok, stat, witness)
