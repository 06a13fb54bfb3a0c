"""Experiment harness: declarative JSON configs in, reproducible records out.

A config names the topology, loss population, schedule, validation knobs
(each either explicit or marked for calibration), an attack, and a seed.
``resolve`` performs the calibrations once and returns a fully concrete,
self-describing bundle; ``execute`` runs one (resolved, seed) cell and is a
pure function of its inputs, so records and emitted files reproduce
byte-exactly.  Wall-clock time is reported on the console only and never
serialized.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import hashlib
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adversary import AttackSpec, Strategy, build_strategy
from .fixed import SCALE, vec_coeff, vec_sub, vec_zeros
from .learning import (
    EdgeTranscript,
    LearningResult,
    RoundContext,
    StepSchedule,
    run_learning,
)
from .losses import (
    AgentDataSource,
    LogisticLoss,
    QuadraticLoss,
    UnsupportedOracle,
    heterogeneity,
    stochastic_gradient,
)
from .rng import stream
from .topology import Graph, check_source_component, make_graph
from .validation import (
    BoundSchedule,
    Outcome,
    ValidationParams,
    calibrate_bounds,
    calibrate_epsilon,
    calibrate_gamma_max,
    classify_outcome,
    validate_model,
)

WORKERS_ENV = "GOSSIPAUDIT_WORKERS"


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


_REQUIRED = object()


def _need(cfg: dict, path: str, key: str, types, default=_REQUIRED):
    if key not in cfg:
        if default is _REQUIRED:
            raise ConfigError(f"{path}.{key}", "required field missing")
        return default
    val = cfg[key]
    if types is not None and not isinstance(val, types):
        raise ConfigError(f"{path}.{key}", f"expected {types}, got {type(val).__name__}")
    return val


def load_config(source) -> dict:
    """Parse and validate a config document (path, JSON text, or dict)."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text() if Path(str(source)).exists() else str(source)
        cfg = json.loads(text)
    else:
        cfg = copy.deepcopy(source)
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    graph = _need(cfg, "<root>", "graph", dict)
    kind = _need(graph, "graph", "kind", str)
    if kind not in ("two_clique_bridge", "ring", "complete", "erdos_renyi"):
        raise ConfigError("graph.kind", f"unknown graph kind {kind!r}")
    if kind in ("ring", "complete", "erdos_renyi"):
        n = _need(graph, "graph", "n", int)
        if n < 2:
            raise ConfigError("graph.n", "need at least 2 nodes")
    if kind == "erdos_renyi":
        p = _need(graph, "graph", "p", (int, float))
        if not 0 <= p <= 1:
            raise ConfigError("graph.p", "must lie in [0, 1]")

    loss = _need(cfg, "<root>", "loss", dict)
    lkind = _need(loss, "loss", "kind", str)
    if lkind == "quadratic":
        sd = _need(loss, "loss", "sigma_d", (int, float))
        if sd < 0:
            raise ConfigError("loss.sigma_d", "must be nonnegative")
        if ("means" in loss) == ("clique_means" in loss):
            raise ConfigError("loss", "give exactly one of 'means' or 'clique_means'")
        if "clique_means" in loss:
            cm = loss["clique_means"]
            if kind != "two_clique_bridge" or len(cm) != 2:
                raise ConfigError("loss.clique_means",
                                  "two clique means require the two_clique_bridge graph")
    elif lkind == "logistic":
        _need(loss, "loss", "datasets", list)
        ridge = _need(loss, "loss", "ridge", (int, float), 0.1)
        if ridge <= 0:
            raise ConfigError("loss.ridge", "must be positive")
    else:
        raise ConfigError("loss.kind", f"unknown loss kind {lkind!r}")

    k = _need(cfg, "<root>", "batch_size", int)
    if k < 1:
        raise ConfigError("batch_size", "must be >= 1")
    t = _need(cfg, "<root>", "rounds", int)
    if t < 2:
        raise ConfigError("rounds", "need at least 2 rounds")

    for name in ("gamma", "epsilon", "classification_epsilon"):
        val = cfg.get(name, "calibrate")
        if isinstance(val, str):
            if val != "calibrate":
                raise ConfigError(name, "must be a number or 'calibrate'")
        elif not isinstance(val, (int, float)):
            raise ConfigError(name, "must be a number or 'calibrate'")
    delta = cfg.get("delta", "oracle")
    if isinstance(delta, str):
        if delta != "oracle":
            raise ConfigError("delta", "must be a number or 'oracle'")
    elif delta < 0:
        raise ConfigError("delta", "must be nonnegative")
    bounds = cfg.get("bounds", "calibrate")
    if isinstance(bounds, str):
        if bounds != "calibrate":
            raise ConfigError("bounds", "must be 'calibrate' or {model:[], grad:[]}")
    elif not (isinstance(bounds, dict) and "model" in bounds and "grad" in bounds):
        raise ConfigError("bounds", "must be 'calibrate' or {model:[], grad:[]}")

    attack = cfg.get("attack", {"kind": "none"})
    akind = _need(attack, "attack", "kind", str)
    if akind not in AttackSpec.KINDS:
        raise ConfigError("attack.kind", f"unknown attack kind {akind!r}")
    if akind != "none":
        byz = _need(attack, "attack", "byzantine", list)
        if not byz:
            raise ConfigError("attack.byzantine", "must be nonempty")
    if akind == "gaussian" and _need(attack, "attack", "sigma", (int, float)) < 0:
        raise ConfigError("attack.sigma", "must be nonnegative")
    if akind == "benign":
        _need(attack, "attack", "means", dict)

    seed = _need(cfg, "<root>", "seed", int)
    if seed < 0:
        raise ConfigError("seed", "must be nonnegative")
    baseline = cfg.get("baseline", "none")
    if baseline not in ("none", "coordinate_median"):
        raise ConfigError("baseline", "must be 'none' or 'coordinate_median'")


def _build_loss(cfg: dict, graph: Graph):
    loss = cfg["loss"]
    if loss["kind"] == "quadratic":
        if "clique_means" in loss:
            a, b = loss["clique_means"]
            means = tuple(tuple(float(x) for x in (a if v < 10 else b))
                          for v in range(graph.n))
        else:
            means = tuple(tuple(float(x) for x in m) for m in loss["means"])
            if len(means) != graph.n:
                raise ConfigError("loss.means", f"need {graph.n} agent means")
        return QuadraticLoss(means=means, noise_sd=float(loss["sigma_d"]),
                             beta=float(loss.get("beta", 1.0)),
                             mu=float(loss.get("mu", 1.0)))
    datasets = tuple(
        tuple((tuple(float(x) for x in feat), int(lab)) for feat, lab in ds)
        for ds in loss["datasets"]
    )
    if len(datasets) != graph.n:
        raise ConfigError("loss.datasets", f"need {graph.n} agent datasets")
    return LogisticLoss(datasets=datasets, ridge=float(loss.get("ridge", 0.1)))


def _build_attack(cfg: dict) -> AttackSpec:
    attack = cfg.get("attack", {"kind": "none"})
    kind = attack["kind"]
    if kind == "none":
        return AttackSpec()
    subst = None
    if kind == "benign":
        subst = {int(kk): tuple(float(x) for x in vv) for kk, vv in attack["means"].items()}
    return AttackSpec(
        kind=kind,
        byzantine=tuple(int(b) for b in attack["byzantine"]),
        sigma=float(attack.get("sigma", 0.0)),
        substituted_means=subst,
        rounds=tuple(int(r) for r in attack.get("rounds", [])),
        magnitude_raw=int(attack.get("magnitude_raw", 1)),
        target=attack.get("target", "x"),
        alarm_round=attack.get("alarm_round"),
        alarm_targets=tuple(int(a) for a in attack.get("alarm_targets", [])),
        enforce_budget=bool(attack.get("enforce_budget", True)),
    )


def build_sources(loss, graph: Graph, batch_size: int, seed: int,
                  substituted: dict | None = None) -> list[AgentDataSource]:
    sources = []
    for v in range(graph.n):
        agent_loss = loss
        if substituted and v in substituted:
            agent_loss = dataclasses.replace(loss, means=tuple(
                substituted[v] if u == v else loss.means[u] for u in range(graph.n)
            ))
        sources.append(AgentDataSource(v, agent_loss, batch_size, stream(seed, "data", v)))
    return sources


@dataclass
class Resolved:
    """A fully concrete run description; everything calibrated and recorded."""

    graph: Graph
    loss: object
    schedule: StepSchedule
    batch_size: int
    gamma: float
    epsilon: float
    delta: float
    bounds: BoundSchedule
    attack: AttackSpec
    baseline: str
    graph_seed: int
    classification_epsilon: float = 0.0  # tolerance for outcome classification
    allow_assumption_violation: bool = False
    effective_loss: object = None  # population with benign substitutions applied

    def to_dict(self) -> dict:
        d = {
            "graph": {"n": self.graph.n, "edges": [list(e) for e in self.graph.edges]},
            "loss": _loss_dict(self.loss),
            "schedule": {"alpha0": self.schedule.alpha0, "eta0": self.schedule.eta0,
                         "rounds": self.schedule.rounds},
            "batch_size": self.batch_size,
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "classification_epsilon": self.classification_epsilon,
            "delta": self.delta,
            "bounds": {"model": list(self.bounds.model_bound),
                       "grad": list(self.bounds.grad_bound)},
            "attack": _attack_dict(self.attack),
            "baseline": self.baseline,
            "graph_seed": self.graph_seed,
        }
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def validation_params(self) -> ValidationParams:
        return ValidationParams(self.gamma, self.epsilon, self.delta, self.bounds)


def _loss_dict(loss) -> dict:
    if loss.kind == "quadratic":
        return {"kind": "quadratic", "means": [list(m) for m in loss.means],
                "sigma_d": loss.noise_sd, "beta": loss.beta, "mu": loss.mu}
    if loss.kind == "logistic":
        return {"kind": "logistic", "ridge": loss.ridge,
                "datasets": [[[list(f), l] for f, l in ds] for ds in loss.datasets]}
    return {"kind": loss.kind}


def _attack_dict(spec: AttackSpec) -> dict:
    d = {"kind": spec.kind}
    if spec.kind == "none":
        return d
    d["byzantine"] = list(spec.byzantine)
    if spec.kind == "gaussian":
        d["sigma"] = spec.sigma
    if spec.kind == "benign":
        d["means"] = {str(k): list(v) for k, v in spec.substituted_means.items()}
    if spec.kind == "equivocate":
        d["rounds"] = list(spec.rounds)
        d["magnitude_raw"] = spec.magnitude_raw
        d["target"] = spec.target
    if spec.kind == "late_alarm":
        d["alarm_round"] = spec.alarm_round
        d["alarm_targets"] = list(spec.alarm_targets)
    return d


def honest_calibration_runs(resolved: Resolved, n_runs: int) -> list[LearningResult]:
    """Honest simulations on the same topology with dedicated seeds, used to
    fit bounds and validation slacks; evaluation seeds stay disjoint."""
    out = []
    for i in range(n_runs):
        seed = stream(resolved.graph_seed, "calibration", i).integers(0, 2**62)
        sources = build_sources(resolved.loss, resolved.graph, resolved.batch_size, int(seed))
        out.append(run_learning(resolved.graph, sources, resolved.schedule))
    return out


def resolve(cfg: dict) -> Resolved:
    """Make every knob concrete: build the topology and population, default
    the schedule, and run the requested calibrations."""
    validate_config(cfg)
    seed = cfg["seed"]
    graph_seed = cfg.get("graph_seed", seed)
    graph = make_graph(cfg["graph"], stream(graph_seed, "graph"))
    loss = _build_loss(cfg, graph)
    attack = _build_attack(cfg)

    for b in attack.byzantine:
        if not 0 <= b < graph.n:
            raise ConfigError("attack.byzantine", f"agent {b} out of range")
    if attack.byzantine and not cfg.get("allow_assumption_violation", False):
        if not check_source_component(graph, attack.byzantine):
            raise ConfigError(
                "attack.byzantine",
                "honest subgraph becomes disconnected; set "
                "allow_assumption_violation to study this regime",
            )

    alpha0 = cfg.get("alpha0") or min(1.0, loss.mu / loss.beta**2)
    eta0 = cfg.get("eta0") or 1.0 / (graph.max_degree() + 1)
    schedule = StepSchedule(alpha0=float(alpha0), eta0=float(eta0), rounds=cfg["rounds"])
    schedule.validate(loss.beta, loss.mu, graph.max_degree())

    delta = cfg.get("delta", "oracle")
    if delta == "oracle":
        delta = heterogeneity(loss)

    effective_loss = loss
    if attack.kind == "benign":
        effective_loss = dataclasses.replace(loss, means=tuple(
            attack.substituted_means.get(v, loss.means[v]) for v in range(graph.n)
        ))
        budget = heterogeneity(effective_loss)
        if budget > delta + 1e-12 and attack.enforce_budget:
            raise ConfigError("attack.means",
                              f"substituted population heterogeneity {budget:.4g} "
                              f"exceeds the declared budget {delta:.4g}")

    resolved = Resolved(
        graph=graph, loss=loss, schedule=schedule, batch_size=cfg["batch_size"],
        gamma=0.0, epsilon=0.0, delta=float(delta),
        bounds=BoundSchedule((0.0,), (0.0,)), attack=attack,
        baseline=cfg.get("baseline", "none"), graph_seed=graph_seed,
        allow_assumption_violation=bool(cfg.get("allow_assumption_violation", False)),
        effective_loss=effective_loss,
    )

    cal = cfg.get("calibration", {})
    n_runs = int(cal.get("runs", 5))
    bound_margin = float(cal.get("bound_margin", 2.0))
    eps_margin = float(cal.get("epsilon_margin", 1.5))

    needs_runs = (cfg.get("bounds", "calibrate") == "calibrate"
                  or cfg.get("gamma", "calibrate") == "calibrate"
                  or cfg.get("epsilon", "calibrate") == "calibrate")
    runs = honest_calibration_runs(resolved, n_runs) if needs_runs else []

    bounds_cfg = cfg.get("bounds", "calibrate")
    if bounds_cfg == "calibrate":
        bounds = calibrate_bounds(runs, margin=bound_margin)
    else:
        bounds = BoundSchedule(tuple(float(x) for x in bounds_cfg["model"]),
                               tuple(float(x) for x in bounds_cfg["grad"]))
        if bounds.rounds != schedule.rounds:
            raise ConfigError("bounds", "bound arrays must cover rounds 1..T")

    gamma_bar = schedule.contraction_factor(loss.beta, loss.mu)
    eps_cfg = cfg.get("epsilon", "calibrate")
    gamma_cfg = cfg.get("gamma", "calibrate")
    if eps_cfg == "calibrate":
        # fit the slack with all weight on the last gradient: maximal
        # estimator noise, no early-round mass.  The discount ceiling below
        # then lands where early rounds start tripping the threshold, which
        # keeps every gamma <= gamma_max false-alarm free by construction.
        epsilon = calibrate_epsilon(runs, 0.0, resolved.delta, margin=eps_margin)
    else:
        epsilon = float(eps_cfg)
    if gamma_cfg == "calibrate":
        # the heterogeneity-based ceiling, additionally clamped where the
        # optimality statistic of honest runs would trip the same slack
        gamma = min(calibrate_gamma_max(runs, resolved.delta, epsilon),
                    _max_gamma_optimality(runs, epsilon), gamma_bar)
    else:
        gamma = float(gamma_cfg)

    cls_cfg = cfg.get("classification_epsilon", None)
    if cls_cfg is None:
        classification_epsilon = epsilon
    elif cls_cfg == "calibrate":
        # honest runs must classify as successful: cover their final-error
        # envelope with the same margin policy
        if not runs:
            runs = honest_calibration_runs(resolved, n_runs)
        classification_epsilon = _calibrate_classification_epsilon(
            runs, loss, margin=eps_margin)
    else:
        classification_epsilon = float(cls_cfg)

    return dataclasses.replace(resolved, gamma=gamma, epsilon=epsilon, bounds=bounds,
                               classification_epsilon=classification_epsilon)


def _max_gamma_optimality(runs, epsilon: float, resolution: int = 64) -> float:
    from .validation import (
        estimate_final_gradients,
        node_estimates,
        optimality_statistic,
    )

    for k in range(resolution - 1, -1, -1):
        gamma = k / resolution
        ok = True
        for res in runs:
            reps, _ = node_estimates(res.graph, estimate_final_gradients(res, gamma))
            if optimality_statistic(res.graph, reps) > epsilon:
                ok = False
                break
        if ok:
            return gamma
    return 0.0


def _calibrate_classification_epsilon(runs, loss, margin: float) -> float:
    xstar = loss.minimizer_floats()
    worst = 0.0
    for res in runs:
        arr = np.array(res.final_models, dtype=float) / SCALE
        worst = max(worst, float(((arr - xstar) ** 2).sum(axis=1).mean()))
    return max(margin * worst, 1e-6)


# -- execution ---------------------------------------------------------------------

@dataclass
class RunRecord:
    config: dict
    config_hash: str
    seed: int
    outcome: str | None
    rounds: list[dict]
    final: dict
    wall_clock: float = 0.0  # console diagnostics only; never serialized

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "outcome": self.outcome,
            "rounds": self.rounds,
            "final": self.final,
        }


def _round_metrics(result: LearningResult, xstar) -> list[dict]:
    rows = []
    t_max = result.schedule.rounds
    for t in range(1, t_max + 1):
        arr = np.array(result.trajectory[t], dtype=float) / SCALE
        garr = np.array(result.grad_trajectory[t - 1], dtype=float) / SCALE
        center = arr.mean(axis=0)
        disp = float(((arr - center) ** 2).sum())
        gnorms = np.sqrt((garr * garr).sum(axis=1))
        row = {
            "t": t,
            "dispersion": disp,
            "grad_norm_mean": float(gnorms.mean()),
            "grad_norm_max": float(gnorms.max()),
        }
        if xstar is not None:
            row["mse_to_opt"] = float(((arr - xstar) ** 2).sum(axis=1).mean())
        rows.append(row)
    return rows


def execute(resolved: Resolved, seed: int) -> RunRecord:
    """Run one (config, seed) cell: learning, validation, classification."""
    t0 = time.perf_counter()
    strategy = build_strategy(resolved.attack, seed)
    if resolved.attack.kind == "equivocate" and not resolved.attack.rounds:
        pick = int(stream(seed, "equivocation_round").integers(1, resolved.schedule.rounds + 1))
        strategy.rounds = frozenset([pick])

    substituted = strategy.substituted_sources()
    sources = build_sources(resolved.loss, resolved.graph, resolved.batch_size, seed,
                            substituted)

    if resolved.baseline == "coordinate_median":
        return _execute_median(resolved, seed, strategy, sources, t0)

    result = run_learning(resolved.graph, sources, resolved.schedule, strategy)
    report = validate_model(result, resolved.validation_params(), seed, strategy)

    try:
        xstar = resolved.loss.minimizer_floats()
    except UnsupportedOracle:
        xstar = None

    outcome = None
    if xstar is not None:
        outcome = classify_outcome(resolved.attack.byzantine, report.states,
                                   report.models, resolved.loss, resolved.delta,
                                   resolved.classification_epsilon).value

    final = {
        "flags": [st.ok for st in report.states],
        "causes": [st.cause.value for st in report.states],
        "optimality_statistic": report.optimality,
        "heterogeneity_statistic": report.heterogeneity,
        "models": [[r / SCALE for r in m] for m in report.models],
        "delta": resolved.delta,
        "epsilon": resolved.epsilon,
        "classification_epsilon": resolved.classification_epsilon,
        "gamma": resolved.gamma,
    }
    if xstar is not None:
        final["x_star"] = [float(x) for x in xstar]
        arr = np.array(result.final_models, dtype=float) / SCALE
        final["final_mse"] = float(((arr - xstar) ** 2).sum(axis=1).mean())
    if resolved.attack.kind == "benign":
        final["x_star_effective"] = [float(x) for x in
                                     resolved.effective_loss.minimizer_floats()]

    record = RunRecord(
        config=resolved.to_dict(),
        config_hash=resolved.config_hash(),
        seed=seed,
        outcome=outcome,
        rounds=_round_metrics(result, xstar),
        final=final,
        wall_clock=time.perf_counter() - t0,
    )
    return record


def run_experiment(cfg: dict | Resolved, seed: int | None = None) -> RunRecord:
    if isinstance(cfg, Resolved):
        if seed is None:
            raise ValueError("seed required when executing a resolved bundle")
        return execute(cfg, seed)
    cfg = load_config(cfg)
    resolved = resolve(cfg)
    return execute(resolved, cfg["seed"] if seed is None else seed)


# -- coordinate-median baseline ------------------------------------------------------

def _median_raw(vals: list[int]) -> int:
    s = sorted(vals)
    m = len(s)
    if m & 1:
        return s[m // 2]
    a, b = s[m // 2 - 1], s[m // 2]
    q, r = divmod(a + b, 2)
    return q + (1 if r and (q & 1) else 0)


def run_median_learning(graph: Graph, sources, schedule: StepSchedule,
                        strategy: Strategy | None = None) -> LearningResult:
    """Baseline aggregator: each round an agent replaces gossip mixing with
    the coordinate-wise median over its own and all received models, then
    takes the usual descent step.  No transcripts, no validation."""
    n = graph.n
    dim = sources[0].loss.dim
    byz = strategy.byzantine if strategy is not None else frozenset()
    zero = vec_zeros(dim)
    state = [zero] * n
    last_recv = {e: zero for e in graph.directed_edges()}
    trajectory = [tuple(state)]
    grads_hist = []
    for t in range(1, schedule.rounds + 1):
        a_raw = schedule.alpha_raw(t)
        ctx = RoundContext(graph, schedule, None, t, a_raw, schedule.eta_raw(t))
        new_state = [zero] * n
        grads = [zero] * n
        sends: list[dict | None] = [None] * n
        for v in range(n):
            cols = [state[v]] + [last_recv[(u, v)] for u in graph.neighbors[v]]
            y = tuple(_median_raw([c[j] for c in cols]) for j in range(dim))
            g = stochastic_gradient(sources[v], y, t)
            x_new = vec_sub(y, vec_coeff(a_raw, g))
            grads[v] = g
            if v in byz:
                internal, out = strategy.learning_sends(ctx, v, y, g, x_new)
                new_state[v] = internal
                sends[v] = out
            else:
                new_state[v] = x_new
        for v in range(n):
            out = sends[v]
            for u in graph.neighbors[v]:
                last_recv[(v, u)] = out[u][0] if out is not None else new_state[v]
        state = new_state
        trajectory.append(tuple(state))
        grads_hist.append(tuple(grads))
    return LearningResult(graph, schedule, dim, EdgeTranscript(graph, dim),
                          trajectory, grads_hist)


def _execute_median(resolved: Resolved, seed: int, strategy, sources, t0) -> RunRecord:
    result = run_median_learning(resolved.graph, sources, resolved.schedule, strategy)
    try:
        xstar = resolved.loss.minimizer_floats()
    except UnsupportedOracle:
        xstar = None
    final = {"flags": None, "causes": None,
             "models": [[r / SCALE for r in m] for m in result.final_models]}
    if xstar is not None:
        final["x_star"] = [float(x) for x in xstar]
        arr = np.array(result.final_models, dtype=float) / SCALE
        final["final_mse"] = float(((arr - xstar) ** 2).sum(axis=1).mean())
    return RunRecord(
        config=resolved.to_dict(),
        config_hash=resolved.config_hash(),
        seed=seed,
        outcome=None,
        rounds=_round_metrics(result, xstar),
        final=final,
        wall_clock=time.perf_counter() - t0,
    )


def coordinate_median_baseline(cfg: dict, seed: int | None = None) -> RunRecord:
    cfg = load_config(cfg)
    cfg["baseline"] = "coordinate_median"
    # the baseline skips validation, so don't pay for calibration
    if cfg.get("gamma", "calibrate") == "calibrate":
        cfg["gamma"] = 0.0
    if cfg.get("epsilon", "calibrate") == "calibrate":
        cfg["epsilon"] = 1.0
    if cfg.get("bounds", "calibrate") == "calibrate":
        cfg["bounds"] = _trivial_bounds(cfg["rounds"])
    resolved = resolve(cfg)
    return execute(resolved, cfg["seed"] if seed is None else seed)


def _trivial_bounds(rounds: int) -> dict:
    big = [1e18] * (rounds + 1)
    return {"model": big, "grad": big}


# -- sweeps ------------------------------------------------------------------------

def set_config_path(cfg: dict, path: str, value) -> None:
    parts = path.split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(path, "field path does not resolve")
        node = node[p]
    if not isinstance(node, dict):
        raise ConfigError(path, "field path does not resolve")
    node[parts[-1]] = value


def run_sweep(cfg: dict, vary: str, values, seeds) -> tuple[list[RunRecord], list[dict], list[dict]]:
    """Cartesian product of values x seeds; returns all records plus summary
    rows with detection rates and final errors per value."""
    cfg = load_config(cfg)
    records = []
    cells = []
    for value in values:
        cfg_i = copy.deepcopy(cfg)
        set_config_path(cfg_i, vary, value)
        validate_config(cfg_i)
        resolved = resolve(cfg_i)
        for seed in seeds:
            cells.append((value, resolved, int(seed)))

    workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers > 1 and len(cells) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]

    summary = []
    by_value: dict = {}
    for (value, _, seed), rec in zip(cells, results):
        records.append(rec)
        row = {
            "vary": vary,
            "value": value,
            "seed": seed,
            "outcome": rec.outcome,
            "final_mse": rec.final.get("final_mse"),
            "detected": rec.outcome == Outcome.C.value,
        }
        summary.append(row)
        by_value.setdefault(value, []).append(row)
    aggregates = []
    for value in values:
        rows = by_value.get(value, [])
        if not rows:
            continue
        det = sum(r["detected"] for r in rows) / len(rows)
        errs = [r["final_mse"] for r in rows if r["final_mse"] is not None]
        aggregates.append({
            "vary": vary,
            "value": value,
            "runs": len(rows),
            "detection_rate": det,
            "mean_final_mse": sum(errs) / len(errs) if errs else None,
        })
    return records, summary, aggregates


def _sweep_cell(cell) -> RunRecord:
    _, resolved, seed = cell
    return execute(resolved, seed)


# -- emission ----------------------------------------------------------------------

def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def emit_metrics(record: RunRecord, out_dir, figures: bool = True) -> list[Path]:
    """Write the delimited outputs (JSON record, per-round JSONL, CSV) and,
    unless disabled, the convergence figure next to them."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    record_path = out / "record.json"
    _dump_json(record.to_dict(), record_path)
    written.append(record_path)

    jsonl_path = out / "rounds.jsonl"
    with jsonl_path.open("w") as fh:
        for row in record.rounds:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
        fh.write(json.dumps({"t": "final", **_jsonable(record.final)}, sort_keys=True) + "\n")
    written.append(jsonl_path)

    csv_path = out / "summary.csv"
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["config_hash", "seed", "outcome", "rounds", "final_mse",
                    "delta", "epsilon", "gamma", "n_alarmed"])
        flags = record.final.get("flags")
        w.writerow([
            record.config_hash, record.seed,
            record.outcome if record.outcome is not None else "",
            len(record.rounds),
            record.final.get("final_mse", ""),
            record.final.get("delta", ""),
            record.final.get("epsilon", ""),
            record.final.get("gamma", ""),
            "" if flags is None else sum(1 for f in flags if not f),
        ])
    written.append(csv_path)

    curve_path = out / "convergence.csv"
    with curve_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        cols = ["t", "mse_to_opt", "dispersion", "grad_norm_mean", "grad_norm_max"]
        w.writerow(cols)
        for row in record.rounds:
            w.writerow([row.get(c, "") for c in cols])
    written.append(curve_path)

    if figures:
        from .report import render_convergence

        fig_path = out / "convergence.png"
        render_convergence(record, fig_path)
        written.append(fig_path)
    return written


def _jsonable(obj):
    return json.loads(json.dumps(obj))


def emit_sweep(records, summary, aggregates, out_dir, figures: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    rows_path = out / "sweep_runs.csv"
    with rows_path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["vary", "value", "seed", "outcome",
                                           "final_mse", "detected"])
        w.writeheader()
        for row in summary:
            w.writerow(row)
    written.append(rows_path)
    agg_path = out / "sweep_summary.csv"
    with agg_path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["vary", "value", "runs", "detection_rate",
                                           "mean_final_mse"])
        w.writeheader()
        for row in aggregates:
            w.writerow(row)
    written.append(agg_path)
    if figures and aggregates:
        from .report import render_sweep

        fig_path = out / "sweep_detection.png"
        render_sweep(aggregates, fig_path)
        written.append(fig_path)
    return written
