"""Learning phase: gossip mixing plus local SGD steps over fixed point.

Rounds are 1-indexed.  All models start at zero (round 0).  In round t an
agent v forms

    y_v = x_v + sum_u [round(eta_t * x_u) - round(eta_t * x_v)]

from the models received in round t-1, takes a mini-batch gradient g_v at
y_v, updates

    x_v = y_v - round(alpha_t * g_v)

and sends (x_v, g_v) to every neighbor.  Rounding is applied per node, so
mixing conserves the network sum exactly, and each honest agent's sent
history satisfies an exact integer recurrence that the validation phase can
re-check from transmitted values and the public schedule alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .fixed import (
    ModelVec,
    to_raw,
    vec_add,
    vec_check,
    vec_coeff,
    vec_sub,
    vec_zeros,
)
from .losses import AgentDataSource, stochastic_gradient
from .topology import Graph


class ScheduleError(ValueError):
    """Step sizes violate the constraints required for contraction/mixing."""


@dataclass(frozen=True)
class StepSchedule:
    """Decaying steps: alpha(t) = alpha0/(t+1), eta(t) = eta0/sqrt(t+1)."""

    alpha0: float
    eta0: float
    rounds: int

    def __post_init__(self):
        if self.rounds < 2:
            raise ScheduleError("need at least 2 rounds")
        if self.alpha0 <= 0 or self.eta0 <= 0:
            raise ScheduleError("step constants must be positive")
        object.__setattr__(
            self,
            "_alpha_raw",
            tuple(to_raw(self.alpha(t)) if t else 0 for t in range(self.rounds + 1)),
        )
        object.__setattr__(
            self,
            "_eta_raw",
            tuple(to_raw(self.eta(t)) if t else 0 for t in range(self.rounds + 1)),
        )

    def alpha(self, t: int) -> float:
        return self.alpha0 / (t + 1)

    def eta(self, t: int) -> float:
        return self.eta0 / math.sqrt(t + 1)

    def alpha_raw(self, t: int) -> int:
        return self._alpha_raw[t]

    def eta_raw(self, t: int) -> int:
        return self._eta_raw[t]

    def validate(self, beta: float, mu: float, max_degree: int) -> None:
        cap = min(1.0, mu / beta**2)
        if self.alpha(1) >= cap:
            raise ScheduleError(
                f"alpha(1)={self.alpha(1):.4g} must stay below min(1, mu/beta^2)={cap:.4g}"
            )
        if self.eta(1) * max_degree >= 1.0:
            raise ScheduleError(
                f"eta(1)*max_degree={self.eta(1) * max_degree:.4g} must stay below 1"
            )

    def contraction_factor(self, beta: float, mu: float) -> float:
        """Worst per-round decay of an injected perturbation:
        max_t sqrt(1 + alpha_t^2 beta^2 - alpha_t mu), which is < 1 whenever
        every alpha_t < mu/beta^2."""
        worst = 0.0
        for t in range(1, self.rounds + 1):
            a = self.alpha(t)
            val = 1.0 + a * a * beta * beta - a * mu
            if val >= 1.0:
                raise ScheduleError("no contraction: some alpha_t >= mu/beta^2")
            worst = max(worst, math.sqrt(val))
        return worst


class TranscriptViews(NamedTuple):
    """Flattened per-edge views, each of length dim * rounds.

    sent         x(1..T)                as transmitted
    prior        x(0..T-1)              one-round lag of the same stream
    prior_mixed  round(eta_t * x(t-1))  mixing contributions, t = 1..T
    steps        round(alpha_t * g(t))  descent contributions, t = 1..T
    """

    sent: tuple[int, ...]
    prior: tuple[int, ...]
    prior_mixed: tuple[int, ...]
    steps: tuple[int, ...]


class EdgeTranscript:
    """Full per-directed-edge message history (x and g, rounds 0..T)."""

    def __init__(self, graph: Graph, dim: int):
        self.graph = graph
        self.dim = dim
        zero = vec_zeros(dim)
        self.xs: dict[tuple[int, int], list[tuple[int, ...]]] = {}
        self.gs: dict[tuple[int, int], list[tuple[int, ...]]] = {}
        for e in graph.directed_edges():
            self.xs[e] = [zero]
            self.gs[e] = [zero]
        self.rounds_recorded = 0

    def record(self, u: int, v: int, x_raw: tuple[int, ...], g_raw: tuple[int, ...]) -> None:
        self.xs[(u, v)].append(x_raw)
        self.gs[(u, v)].append(g_raw)

    def views(self, u: int, v: int, schedule: StepSchedule) -> TranscriptViews:
        xs = self.xs[(u, v)]
        gs = self.gs[(u, v)]
        t_max = schedule.rounds
        sent: list[int] = []
        prior: list[int] = []
        prior_mixed: list[int] = []
        steps: list[int] = []
        for t in range(1, t_max + 1):
            sent.extend(xs[t])
            prior.extend(xs[t - 1])
            prior_mixed.extend(vec_coeff(schedule.eta_raw(t), xs[t - 1]))
            steps.extend(vec_coeff(schedule.alpha_raw(t), gs[t]))
        return TranscriptViews(tuple(sent), tuple(prior), tuple(prior_mixed), tuple(steps))

    def content_signature(self, u: int, v: int) -> tuple:
        """Cheap grouping key: edges fed the same tuple objects are equal."""
        return (
            tuple(map(id, self.xs[(u, v)])),
            tuple(map(id, self.gs[(u, v)])),
        )


def mix_step(x_v: ModelVec, neighbors: Sequence[ModelVec], eta_t: float) -> ModelVec:
    """One gossip mix: x_v plus the rounded eta-scaled neighbor differences."""
    eta_raw = to_raw(eta_t)
    z_own = vec_coeff(eta_raw, x_v.raw)
    acc = list(x_v.raw)
    for nb in neighbors:
        z = vec_coeff(eta_raw, nb.raw)
        for j in range(len(acc)):
            acc[j] += z[j] - z_own[j]
    return ModelVec(tuple(vec_check(acc)))


def sgd_step(y: ModelVec, g: ModelVec, alpha_t: float) -> ModelVec:
    """Descent update; the rounded product is exactly the recorded step."""
    step = vec_coeff(to_raw(alpha_t), g.raw)
    return ModelVec(tuple(vec_check(vec_sub(y.raw, step))))


@dataclass
class RoundContext:
    """What a Byzantine strategy may read while acting in round t: the full
    transcript so far, the schedule, and the graph (causal knowledge)."""

    graph: Graph
    schedule: StepSchedule
    transcript: EdgeTranscript
    t: int
    alpha_raw: int
    eta_raw: int


@dataclass
class LearningResult:
    graph: Graph
    schedule: StepSchedule
    dim: int
    transcript: EdgeTranscript
    trajectory: list[tuple[tuple[int, ...], ...]]
    grad_trajectory: list[tuple[tuple[int, ...], ...]] = field(default_factory=list)

    @property
    def final_models(self) -> tuple[tuple[int, ...], ...]:
        return self.trajectory[-1]


def run_learning(
    graph: Graph,
    sources: Sequence[AgentDataSource],
    schedule: StepSchedule,
    strategy=None,
    perturb: tuple[int, int, tuple[int, ...]] | None = None,
) -> LearningResult:
    """Execute rounds 1..T and record the full per-edge transcript.

    ``strategy`` (optional) supplies per-round Byzantine sends for its agent
    set; everyone else follows the honest update.  ``perturb`` is a
    (round, agent, raw_vector) injection added to that agent's model after
    its round update; it is used to measure perturbation decay and is not an
    attack.
    """
    n = graph.n
    if len(sources) != n:
        raise ValueError("need one data source per node")
    dim = sources[0].loss.dim
    t_max = schedule.rounds
    byz = strategy.byzantine if strategy is not None else frozenset()

    zero = vec_zeros(dim)
    state: list[tuple[int, ...]] = [zero] * n
    transcript = EdgeTranscript(graph, dim)
    trajectory = [tuple(state)]
    grad_trajectory: list[tuple[tuple[int, ...], ...]] = []
    nbrs = graph.neighbors
    xs = transcript.xs

    for t in range(1, t_max + 1):
        a_raw = schedule.alpha_raw(t)
        e_raw = schedule.eta_raw(t)
        ctx = RoundContext(graph, schedule, transcript, t, a_raw, e_raw)

        z_own = [vec_coeff(e_raw, state[v]) for v in range(n)]
        z_cache = {id(state[v]): z_own[v] for v in range(n)}

        new_state: list[tuple[int, ...]] = [zero] * n
        grads: list[tuple[int, ...]] = [zero] * n
        sends: list[dict | None] = [None] * n

        for v in range(n):
            deg = len(nbrs[v])
            zv = z_own[v]
            tot = [0] * dim
            for u in nbrs[v]:
                xin = xs[(u, v)][t - 1]
                zu = z_cache.get(id(xin))
                if zu is None:
                    zu = vec_coeff(e_raw, xin)
                    z_cache[id(xin)] = zu
                for j in range(dim):
                    tot[j] += zu[j]
            y = tuple(
                s + tj - deg * zj for s, tj, zj in zip(state[v], tot, zv)
            )
            g = stochastic_gradient(sources[v], y, t)
            x_clean = vec_sub(y, vec_coeff(a_raw, g))
            grads[v] = g
            if v in byz:
                internal, out = strategy.learning_sends(ctx, v, y, g, x_clean)
                new_state[v] = internal
                sends[v] = out
            else:
                new_state[v] = x_clean

        if perturb is not None and perturb[0] == t:
            _, agent, z_vec = perturb
            new_state[agent] = vec_add(new_state[agent], z_vec)

        for v in range(n):
            out = sends[v]
            if out is None:
                x_s, g_s = new_state[v], grads[v]
                vec_check(x_s)
                vec_check(g_s)
                for u in nbrs[v]:
                    transcript.record(v, u, x_s, g_s)
            else:
                for u in nbrs[v]:
                    x_s, g_s = out[u]
                    vec_check(x_s)
                    vec_check(g_s)
                    transcript.record(v, u, x_s, g_s)

        state = new_state
        trajectory.append(tuple(state))
        grad_trajectory.append(tuple(grads))
        transcript.rounds_recorded = t

    return LearningResult(graph, schedule, dim, transcript, trajectory, grad_trajectory)


def perturbation_divergence(
    graph: Graph,
    make_sources,
    schedule: StepSchedule,
    tau: int,
    agent: int,
    z_raw: tuple[int, ...],
) -> list[float]:
    """Frobenius distance per round between a run and its copy with ``z_raw``
    injected into ``agent`` at round ``tau`` (same data in both runs).

    ``make_sources`` must build a fresh, identically seeded source list on
    each call.  Entry i of the result is the distance after round tau + i.
    """
    base = run_learning(graph, make_sources(), schedule)
    bumped = run_learning(graph, make_sources(), schedule, perturb=(tau, agent, z_raw))
    out = []
    for t in range(tau, schedule.rounds + 1):
        sq = 0
        for xa, xb in zip(base.trajectory[t], bumped.trajectory[t]):
            for ra, rb in zip(xa, xb):
                d = ra - rb
                sq += d * d
        out.append(math.sqrt(sq) / float(1 << 32))
    return out
