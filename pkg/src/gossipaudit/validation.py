"""Validation phase: bound checks, fingerprint-based transcript audits,
global gradient checks, and the alarm agreement flood.

An agent's alarm state starts clear and can only be raised; the first check
that fires is recorded as the cause.  Honest runs pass every check exactly:
the learning update is an integer identity, the fingerprints are linear, so
the audited relation holds for every key.  A transcript that violates the
identity escapes detection only through a fingerprint collision, whose
probability per key is (length - 1) / p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .fixed import SCALE, ModelVec, to_raw, vec_from_floats
from .hashing import MERSENNE61, draw_key, hash_views
from .learning import LearningResult
from .losses import check_admissible
from .rng import stream
from .topology import Graph


class Cause(str, Enum):
    NONE = "none"
    BOUND = "bound_violation"
    BROADCAST = "broadcast_conflict"
    HASH = "hash_inconsistency"
    CONSISTENCY = "consistency_check"
    OPTIMALITY = "optimality_check"
    HETEROGENEITY = "heterogeneity_check"
    AGREEMENT = "agreement_propagation"


@dataclass
class ValidationState:
    """Per-agent alarm flag with the provenance of the first firing check."""

    ok: bool = True
    cause: Cause = Cause.NONE

    def invalidate(self, cause: Cause) -> None:
        # one-way: once raised, later checks never clear or relabel it
        if self.ok:
            self.ok = False
            self.cause = cause

    def __str__(self) -> str:
        return "TOP" if self.ok else f"BOT({self.cause.value})"


class InvalidParameter(ValueError):
    pass


class CalibrationFailed(Exception):
    pass


# -- validated broadcast -----------------------------------------------------

class _Conflict:
    """Marker a flagged agent forwards instead of a message.  Forwarding the
    conflict itself is what lets an alarm outrun a poisoned value: without
    it, an agent whose only honest path to the source runs through a relay
    that adopted a forged value first would keep that forgery with a clear
    flag."""

    __slots__ = ()

    def __repr__(self):
        return "CONFLICT"


CONFLICT = _Conflict()


def receive_update(msg, flagged, incoming):
    """One agent's per-round rule: adopt the first non-null message; raise
    the flag on any conflicting non-null message or forwarded conflict
    marker.  Flagged agents hold (and therefore forward) the marker."""
    for m in incoming:
        if m is None:
            continue
        if m is CONFLICT or (msg is not None and msg is not CONFLICT and m != msg):
            flagged = True
        elif msg is None:
            msg = m
    if flagged:
        msg = CONFLICT
    return msg, flagged


def validated_broadcast(graph: Graph, source: int, message, relay=None,
                        byzantine=frozenset()):
    """Flood ``message`` from ``source`` for min(|V|, |E|) rounds.

    Returns (received, flagged) lists.  ``relay(v, r, target, held)`` lets
    Byzantine relays substitute what they forward.  With no Byzantine relay
    the flood provably delivers the message intact everywhere, so that case
    short-circuits.
    """
    n = graph.n
    if not 0 <= source < n:
        raise ValueError("source out of range")
    if relay is None or not byzantine:
        return [message] * n, [False] * n

    rounds = min(n, graph.num_edges)
    msgs = [None] * n
    msgs[source] = message
    flagged = [False] * n
    for r in range(1, rounds + 1):
        held = list(msgs)
        for v in range(n):
            incoming = []
            for u in graph.neighbors[v]:
                if u in byzantine:
                    incoming.append(relay(u, r, v, held[u]))
                else:
                    incoming.append(held[u])
            msgs[v], flagged[v] = receive_update(msgs[v], flagged[v], incoming)
    return msgs, flagged


# -- bounds -------------------------------------------------------------------

@dataclass(frozen=True)
class BoundSchedule:
    """Per-round norm envelopes for transmitted models (B) and gradients (C);
    index 0 is unused."""

    model_bound: tuple[float, ...]
    grad_bound: tuple[float, ...]

    @property
    def rounds(self) -> int:
        return len(self.model_bound) - 1


def calibrate_bounds(honest_results: Sequence[LearningResult], margin: float = 2.0,
                     floor: float = 2.0**-20) -> BoundSchedule:
    """Envelope of honest runs: margin times the per-round max norm observed
    over runs and agents, floored to absorb quantization at zero."""
    t_max = honest_results[0].schedule.rounds
    b = [0.0] * (t_max + 1)
    c = [0.0] * (t_max + 1)
    for res in honest_results:
        for t in range(1, t_max + 1):
            for x in res.trajectory[t]:
                b[t] = max(b[t], _raw_norm(x))
            for g in res.grad_trajectory[t - 1]:
                c[t] = max(c[t], _raw_norm(g))
    return BoundSchedule(
        tuple(max(margin * v, floor) for v in b),
        tuple(max(margin * v, floor) for v in c),
    )


def _raw_norm(raw: Sequence[int]) -> float:
    return math.sqrt(sum(r * r for r in raw)) / SCALE


# -- local validation ----------------------------------------------------------

def _edge_hash_table(result: LearningResult, keys: Sequence[int], p: int = MERSENNE61):
    """Fingerprint quadruples for every directed edge under every key.

    Edges that carried identical message objects share one computation;
    distinct contents always hash independently, so grouping cannot mask a
    difference.
    """
    tr = result.transcript
    groups: dict[tuple, list[tuple[int, int]]] = {}
    for e in result.graph.directed_edges():
        groups.setdefault(tr.content_signature(*e), []).append(e)
    table: dict[tuple[int, int], tuple] = {}
    for members in groups.values():
        views = tr.views(*members[0], result.schedule)
        quads = tuple(hash_views(k, views, p) for k in keys)
        for e in members:
            table[e] = quads
    return table


def _hash_violates(graph: Graph, table, keys, p: int = MERSENNE61) -> bool:
    """Audit every node's fingerprints: equal across its out-edges per view,
    and the linear update identity under every key.

    For node v with representative fingerprints h (one per view) and
    neighbors u, the identity is

        h_sent = h_prior + sum_u (h_prior_mixed[u] - h_prior_mixed[v]) - h_steps

    in the field, which follows from the integer recurrence plus linearity.
    """
    n = graph.n
    n_keys = len(keys)
    reps: list[list[tuple]] = [[None] * n_keys for _ in range(n)]
    for v in range(n):
        nbrs = graph.neighbors[v]
        first = table[(v, nbrs[0])]
        for u in nbrs[1:]:
            if table[(v, u)] != first:
                return True
        for w in range(n_keys):
            reps[v][w] = first[w]
    for v in range(n):
        nbrs = graph.neighbors[v]
        for w in range(n_keys):
            h_sent, h_prior, h_pm, h_steps = reps[v][w]
            rhs = h_prior - len(nbrs) * h_pm - h_steps
            for u in nbrs:
                rhs += reps[u][w][2]
            if h_sent != rhs % p:
                return True
    return False


def local_validate(result: LearningResult, bounds: BoundSchedule, seed: int,
                   strategy=None) -> list[ValidationState]:
    """Bound checks plus the fingerprint audit of all transcripts.

    Each agent draws a private key, fingerprints its incoming transcripts,
    and the quadruples, keys, and cross-key fingerprints are flooded to
    everyone with the validated broadcast.  Every agent then audits every
    node and raises its own alarm on any discrepancy.
    """
    graph = result.graph
    n = graph.n
    schedule = result.schedule
    states = [ValidationState() for _ in range(n)]

    # received-message norms against the calibrated envelopes
    tr = result.transcript
    for (u, v) in graph.directed_edges():
        xs = tr.xs[(u, v)]
        gs = tr.gs[(u, v)]
        for t in range(1, schedule.rounds + 1):
            if _raw_norm(xs[t]) > bounds.model_bound[t] or _raw_norm(gs[t]) > bounds.grad_bound[t]:
                states[v].invalidate(Cause.BOUND)
                break

    keys = [draw_key(stream(seed, "validation_key", v)) for v in range(n)]
    table = _edge_hash_table(result, keys)

    tampered = strategy is not None and strategy.tampers_broadcast
    if not tampered:
        # floods deliver everything intact; all agents audit the same data
        if _hash_violates(graph, table, keys):
            for st in states:
                st.invalidate(Cause.HASH)
        return states

    # Byzantine relays may corrupt floods: track per-agent received copies.
    byz = strategy.byzantine
    received: list[dict] = [dict() for _ in range(n)]

    def flood(origin, label, payload):
        msgs, flags = validated_broadcast(graph, origin, payload,
                                          relay=strategy.relay, byzantine=byz)
        for a in range(n):
            if flags[a]:
                states[a].invalidate(Cause.BROADCAST)
            received[a][label] = msgs[a]

    for v in range(n):
        quad_own = tuple(table[(u, v)][v] for u in graph.neighbors[v])
        flood(v, ("hashes", v, v), quad_own)
    for v in range(n):
        flood(v, ("key", v), keys[v])
    for v in range(n):
        for w in range(n):
            if w == v:
                continue
            quad_cross = tuple(table[(u, v)][w] for u in graph.neighbors[v])
            flood(v, ("hashes", v, w), quad_cross)

    for a in range(n):
        if a in byz:
            continue
        try:
            tbl = {}
            for v in range(n):
                for j, u in enumerate(graph.neighbors[v]):
                    quads = []
                    for w in range(n):
                        msg = received[a][("hashes", v, w)]
                        quad = msg[j]
                        if not (isinstance(quad, tuple) and len(quad) == 4
                                and all(isinstance(h, int) for h in quad)):
                            raise _Malformed()
                        quads.append(quad)
                    tbl[(u, v)] = tuple(quads)
            if _hash_violates(graph, tbl, keys):
                states[a].invalidate(Cause.HASH)
        except (_Malformed, TypeError, IndexError, KeyError):
            states[a].invalidate(Cause.BROADCAST)
    return states


class _Malformed(Exception):
    pass


# -- gradient estimation and global checks -------------------------------------

def discount_weights(gamma: float, t_max: int) -> np.ndarray:
    """Normalized geometric weights over gradient rounds 1..T-1, most recent
    heaviest; gamma = 0 puts all weight on round T-1."""
    if not 0.0 <= gamma < 1.0:
        raise InvalidParameter("gamma must lie in [0, 1)")
    if t_max < 2:
        raise InvalidParameter("need at least 2 rounds")
    i = np.arange(1, t_max)
    if gamma == 0.0:
        w = np.zeros(t_max - 1)
        w[-1] = 1.0
        return w
    w = gamma ** (t_max - 1 - i)
    return w * (1.0 - gamma) / (1.0 - gamma ** (t_max - 1))


def estimate_final_gradients(result: LearningResult, gamma: float):
    """Discounted per-edge estimates of each sender's final gradient and its
    norm, as the receiver computes them from its stored transcript.  Both are
    snapped to fixed point so receivers of identical transcripts agree
    bit-exactly.
    """
    schedule = result.schedule
    t_max = schedule.rounds
    w = discount_weights(gamma, t_max)
    tr = result.transcript
    groups: dict[tuple, list[tuple[int, int]]] = {}
    for e in result.graph.directed_edges():
        groups.setdefault(tuple(map(id, tr.gs[e])), []).append(e)
    estimates = {}
    for members in groups.values():
        gs = tr.gs[members[0]]
        arr = np.array(gs[1:t_max], dtype=float) / SCALE  # rounds 1..T-1
        ghat = w @ arr
        lhat = float(w @ np.sqrt((arr * arr).sum(axis=1)))
        entry = (vec_from_floats(float(x) for x in ghat), to_raw(lhat))
        for e in members:
            estimates[e] = entry
    return estimates


def node_estimates(graph: Graph, estimates):
    """Representative (gradient, norm) per node: the lowest-id receiver's
    copy, plus whether all receivers agreed exactly."""
    reps = {}
    consistent = True
    for u in range(graph.n):
        nbrs = graph.neighbors[u]
        first = estimates[(u, nbrs[0])]
        for v in nbrs[1:]:
            if estimates[(u, v)] != first:
                consistent = False
        reps[u] = first
    return reps, consistent


def optimality_statistic(graph: Graph, reps) -> float:
    acc = np.zeros(len(reps[0][0]))
    for u in range(graph.n):
        acc += np.asarray(reps[u][0], dtype=float) / SCALE
    acc /= graph.n
    return float(np.sqrt(acc @ acc))


def heterogeneity_statistic(graph: Graph, reps) -> float:
    return sum((reps[u][1] / SCALE) ** 2 for u in range(graph.n)) / graph.n


@dataclass
class GlobalReport:
    optimality: float
    heterogeneity: float
    node_gradients: dict


def global_validate(result: LearningResult, estimates, delta: float, epsilon: float,
                    states: list[ValidationState], strategy=None) -> GlobalReport:
    """Consistency, optimality and heterogeneity checks on the broadcast
    gradient estimates; every agent evaluates all three and raises its own
    alarm on failure."""
    graph = result.graph
    n = graph.n
    tampered = strategy is not None and strategy.tampers_broadcast

    if tampered:
        byz = strategy.byzantine
        received = [dict() for _ in range(n)]
        for v in range(n):
            payload = tuple(estimates[(u, v)] for u in graph.neighbors[v])
            msgs, flags = validated_broadcast(graph, v, payload,
                                              relay=strategy.relay, byzantine=byz)
            for a in range(n):
                if flags[a]:
                    states[a].invalidate(Cause.BROADCAST)
                received[a][v] = msgs[a]
        report = None
        for a in range(n):
            if a in byz:
                continue
            try:
                est_a = {}
                for v in range(n):
                    payload = received[a][v]
                    for j, u in enumerate(graph.neighbors[v]):
                        est_a[(u, v)] = payload[j]
                rep_a = _apply_global_checks(graph, est_a, delta, epsilon, states[a])
            except (TypeError, ValueError, IndexError, KeyError):
                states[a].invalidate(Cause.BROADCAST)
                continue
            if report is None:
                report = rep_a
        return report if report is not None else GlobalReport(float("nan"), float("nan"), {})

    shared = ValidationState()
    report = _apply_global_checks(graph, estimates, delta, epsilon, shared)
    if not shared.ok:
        for st in states:
            st.invalidate(shared.cause)
    return report


def _apply_global_checks(graph, estimates, delta, epsilon, state: ValidationState):
    reps, consistent = node_estimates(graph, estimates)
    if not consistent:
        state.invalidate(Cause.CONSISTENCY)
    opt = optimality_statistic(graph, reps)
    het = heterogeneity_statistic(graph, reps)
    if opt > epsilon:
        state.invalidate(Cause.OPTIMALITY)
    if het > delta + epsilon:
        state.invalidate(Cause.HETEROGENEITY)
    return GlobalReport(opt, het, reps)


# -- agreement ------------------------------------------------------------------

def state_agreement(graph: Graph, states: list[ValidationState],
                    strategy=None) -> list[ValidationState]:
    """|E| synchronous rounds of monotone alarm flooding: an agent raises its
    alarm when any neighbor reported one the round before."""
    n = graph.n
    byz = strategy.byzantine if strategy is not None else frozenset()
    r_total = graph.num_edges
    alarmed = [not st.ok for st in states]
    for r in range(1, r_total + 1):
        reports = [dict() for _ in range(n)]  # receiver -> {sender: bool}
        for v in range(n):
            if v in byz and strategy is not None:
                told = strategy.agreement_report(v, r, r_total, graph.neighbors[v])
                for u in graph.neighbors[v]:
                    reports[u][v] = bool(told.get(u, False))
            else:
                for u in graph.neighbors[v]:
                    reports[u][v] = alarmed[v]
        nxt = list(alarmed)
        for v in range(n):
            if not nxt[v] and any(reports[v].values()):
                nxt[v] = True
                states[v].invalidate(Cause.AGREEMENT)
        alarmed = nxt
    return states


# -- composition ------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationParams:
    gamma: float
    epsilon: float
    delta: float
    bounds: BoundSchedule


@dataclass
class ValidationReport:
    states: list[ValidationState]
    models: tuple
    optimality: float
    heterogeneity: float

    def accepted(self, v: int) -> bool:
        return self.states[v].ok


def validate_model(result: LearningResult, params: ValidationParams, seed: int,
                   strategy=None) -> ValidationReport:
    """Local audit, global checks, then agreement; agents whose alarm stays
    clear output their own round-T model."""
    states = local_validate(result, params.bounds, seed, strategy)
    estimates = estimate_final_gradients(result, params.gamma)
    greport = global_validate(result, estimates, params.delta, params.epsilon,
                              states, strategy)
    states = state_agreement(result.graph, states, strategy)
    return ValidationReport(states, result.final_models, greport.optimality,
                            greport.heterogeneity)


# -- calibration -------------------------------------------------------------------

def calibrate_gamma_max(honest_results: Sequence[LearningResult], delta: float,
                        epsilon: float, resolution: int = 64) -> float:
    """Largest discount on the 1/resolution grid for which every honest run
    passes the heterogeneity check."""
    grid = [k / resolution for k in range(resolution - 1, -1, -1)]
    for gamma in grid:
        ok = True
        for res in honest_results:
            estimates = estimate_final_gradients(res, gamma)
            reps, _ = node_estimates(res.graph, estimates)
            if heterogeneity_statistic(res.graph, reps) > delta + epsilon:
                ok = False
                break
        if ok:
            return gamma
    raise CalibrationFailed("even gamma = 0 trips the heterogeneity check")


def calibrate_epsilon(honest_results: Sequence[LearningResult], gamma: float,
                      delta: float, margin: float = 1.5, floor: float = 1e-6) -> float:
    """Slack covering honest-run statistics: margin times the worst observed
    optimality norm and heterogeneity overshoot."""
    worst = 0.0
    for res in honest_results:
        estimates = estimate_final_gradients(res, gamma)
        reps, _ = node_estimates(res.graph, estimates)
        opt = optimality_statistic(res.graph, reps)
        het = heterogeneity_statistic(res.graph, reps)
        worst = max(worst, opt, het - delta)
    return max(margin * worst, floor)


# -- outcome classification ---------------------------------------------------------

class Outcome(str, Enum):
    A = "A"
    B = "B"
    C = "C"
    FAIL = "FAIL"


def classify_outcome(byzantine, states: Sequence[ValidationState], final_models,
                     loss, delta: float, epsilon: float) -> Outcome:
    """Classify a finished run against the protocol's success outcomes:
    (A) no adversary, everyone clear, models at the population minimizer;
    (B) adversary present, the clear agents share an admissible consensus;
    (C) adversary present and every honest agent raised the alarm.
    """
    byz = frozenset(byzantine)
    n = loss.n_agents
    honest = [v for v in range(n) if v not in byz]
    top = [v for v in honest if states[v].ok]

    def msq(models, center):
        acc = 0.0
        for m in models:
            d = np.asarray(m, dtype=float) / SCALE - center
            acc += float(d @ d)
        return acc / len(models)

    if not byz:
        if len(top) == n:
            xstar = loss.minimizer_floats()
            if msq([final_models[v] for v in range(n)], xstar) < epsilon:
                return Outcome.A
        return Outcome.FAIL
    if not top:
        return Outcome.C
    xbar = np.mean([np.asarray(final_models[v], dtype=float) / SCALE for v in top], axis=0)
    adm = check_admissible(ModelVec.from_floats(float(x) for x in xbar), top, loss,
                           delta, epsilon)
    if adm.admissible and msq([final_models[v] for v in top], xbar) < epsilon:
        return Outcome.B
    return Outcome.FAIL
