"""Pluggable Byzantine strategies.

A strategy owns a set of Byzantine agent ids and three hooks: per-round
learning sends (may differ per neighbor), broadcast relaying during the
validation phase, and state reports during the final agreement flood.
Strategies get read access to the transcript so far and the full
configuration (causal global knowledge), never to future honest randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .fixed import FRAC_BITS, SCALE, mul_round, vec_add, vec_from_floats, vec_sub
from .rng import stream


@dataclass(frozen=True)
class AttackSpec:
    """Declarative attack description; fully expressible in a run config."""

    kind: str = "none"
    byzantine: tuple[int, ...] = ()
    sigma: float = 0.0
    substituted_means: dict | None = None
    rounds: tuple[int, ...] = ()
    magnitude_raw: int = 1
    target: str = "x"
    alarm_round: int | None = None
    alarm_targets: tuple[int, ...] = ()
    enforce_budget: bool = True

    KINDS = ("none", "gaussian", "benign", "equivocate", "broadcast_tamper", "late_alarm")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.kind != "none" and not self.byzantine:
            raise ValueError(f"attack {self.kind!r} needs a nonempty byzantine set")
        if self.kind == "none" and self.byzantine:
            raise ValueError("byzantine agents listed but kind is 'none'")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


class Strategy:
    """Honest behavior for every hook; attacks override what they need."""

    tampers_broadcast = False
    tampers_agreement = False

    def __init__(self, byzantine=()):
        self.byzantine = frozenset(byzantine)

    def learning_sends(self, ctx, v, y_raw, g_raw, x_clean):
        """Return (internal model, {neighbor: (x, g)}) for Byzantine agent v."""
        sends = {u: (x_clean, g_raw) for u in ctx.graph.neighbors[v]}
        return x_clean, sends

    def relay(self, v, r, target, held):
        """Message Byzantine relay v forwards to ``target`` in flood round r."""
        return held

    def agreement_report(self, v, r, r_total, neighbors):
        """Map neighbor -> reported-alarm for Byzantine v in agreement round r.
        Missing neighbors are reported the clear state."""
        return {}

    def substituted_sources(self):
        """Per-agent data substitutions, if the attack works through data."""
        return {}


class HonestStrategy(Strategy):
    def __init__(self):
        super().__init__(())


def solve_step_preimage(coeff_raw: int, target_raw: int) -> int:
    """Smallest raw g with ``mul_round(coeff_raw, g) == target_raw``.

    Exists for every target because the map has slope < 1 and unit steps.
    """
    if coeff_raw <= 0:
        raise ValueError("coefficient must be positive")
    span = SCALE // coeff_raw + 2
    n0 = (target_raw << FRAC_BITS) // coeff_raw
    lo, hi = n0 - 2 * span, n0 + 2 * span
    while lo < hi:
        mid = (lo + hi) // 2
        if mul_round(coeff_raw, mid) >= target_raw:
            hi = mid
        else:
            lo = mid + 1
    if mul_round(coeff_raw, lo) != target_raw:
        raise ArithmeticError("no preimage found; coefficient out of range")
    return lo


class GaussianNoiseStrategy(Strategy):
    """Adds fresh N(0, sigma^2) noise to the model before sending.

    The same noisy model goes to every neighbor, and the transmitted
    gradient is re-solved so the sent trajectory still satisfies the exact
    update recurrence: local transcript checks pass by construction and
    detection is left to the global checks.
    """

    def __init__(self, byzantine, sigma: float, seed: int):
        super().__init__(byzantine)
        self.sigma = sigma
        self._streams = {v: stream(seed, "gaussian_attack", v) for v in self.byzantine}

    def learning_sends(self, ctx, v, y_raw, g_raw, x_clean):
        if self.sigma == 0.0:
            return super().learning_sends(ctx, v, y_raw, g_raw, x_clean)
        dim = len(x_clean)
        noise = vec_from_floats(self._streams[v].normal(0.0, self.sigma, size=dim))
        x_noisy = vec_add(x_clean, noise)
        step_needed = vec_sub(y_raw, x_noisy)
        g_sent = []
        for j in range(dim):
            if mul_round(ctx.alpha_raw, g_raw[j]) == step_needed[j]:
                g_sent.append(g_raw[j])
            else:
                g_sent.append(solve_step_preimage(ctx.alpha_raw, step_needed[j]))
        g_sent = tuple(g_sent)
        sends = {u: (x_noisy, g_sent) for u in ctx.graph.neighbors[v]}
        return x_noisy, sends


class EquivocateStrategy(Strategy):
    """Sends a perturbed copy to the lowest-id neighbor in chosen rounds."""

    def __init__(self, byzantine, rounds, magnitude_raw: int = 1, target: str = "x"):
        super().__init__(byzantine)
        if magnitude_raw <= 0:
            raise ValueError("magnitude must be positive")
        if target not in ("x", "g"):
            raise ValueError("target must be 'x' or 'g'")
        self.rounds = frozenset(rounds)
        self.magnitude_raw = magnitude_raw
        self.target = target

    def learning_sends(self, ctx, v, y_raw, g_raw, x_clean):
        internal, sends = super().learning_sends(ctx, v, y_raw, g_raw, x_clean)
        if ctx.t in self.rounds:
            victim = min(ctx.graph.neighbors[v])
            if self.target == "x":
                x_tam = (x_clean[0] + self.magnitude_raw,) + x_clean[1:]
                sends[victim] = (x_tam, g_raw)
            else:
                g_tam = (g_raw[0] + self.magnitude_raw,) + g_raw[1:]
                sends[victim] = (x_clean, g_tam)
        return internal, sends


class BenignStrategy(Strategy):
    """Runs the protocol verbatim but samples Byzantine agents' data from
    substituted distributions.  Indistinguishable from an honest network
    whose population really looks like that."""

    def __init__(self, byzantine, substituted_means):
        super().__init__(byzantine)
        self.substituted_means = {
            int(v): tuple(float(x) for x in m) for v, m in substituted_means.items()
        }
        if set(self.substituted_means) != set(self.byzantine):
            raise ValueError("benign attack needs one substituted mean per byzantine agent")

    def substituted_sources(self):
        return dict(self.substituted_means)


def _alter(value):
    if value is None:
        return None
    if isinstance(value, int):
        return value + 1
    if isinstance(value, tuple) and value:
        return (_alter(value[0]),) + value[1:]
    if isinstance(value, str):
        return value + "~"
    return ("tampered", value)


class BroadcastTamperStrategy(Strategy):
    """Relays altered copies of validated-broadcast payloads."""

    tampers_broadcast = True

    def __init__(self, byzantine, transform=None):
        super().__init__(byzantine)
        self.transform = transform if transform is not None else _alter

    def relay(self, v, r, target, held):
        return self.transform(held)


class LateAlarmStrategy(Strategy):
    """Reports an alarm only in a chosen agreement round, to a chosen
    neighbor subset, engineering a split of clear/alarmed honest agents."""

    tampers_agreement = True

    def __init__(self, byzantine, alarm_round=None, targets=()):
        super().__init__(byzantine)
        self.alarm_round = alarm_round
        self.targets = tuple(targets)

    def agreement_report(self, v, r, r_total, neighbors):
        fire = self.alarm_round if self.alarm_round is not None else r_total
        if r != fire:
            return {}
        targets = self.targets if self.targets else tuple(neighbors)
        return {t: True for t in targets}


def build_strategy(spec: AttackSpec, seed: int) -> Strategy:
    if spec.kind == "none":
        return HonestStrategy()
    if spec.kind == "gaussian":
        return GaussianNoiseStrategy(spec.byzantine, spec.sigma, seed)
    if spec.kind == "benign":
        return BenignStrategy(spec.byzantine, spec.substituted_means or {})
    if spec.kind == "equivocate":
        return EquivocateStrategy(spec.byzantine, spec.rounds, spec.magnitude_raw, spec.target)
    if spec.kind == "broadcast_tamper":
        return BroadcastTamperStrategy(spec.byzantine)
    if spec.kind == "late_alarm":
        return LateAlarmStrategy(spec.byzantine, spec.alarm_round, spec.alarm_targets)
    raise ValueError(f"unknown attack kind {spec.kind!r}")


def calibrate_sigma_strong(schedule, gamma: float, delta: float, epsilon: float,
                           n_agents: int, dim: int) -> float:
    """Smallest noise level whose expected squared-gradient mass injected
    into the heterogeneity statistic exceeds delta + epsilon.

    The sent-gradient noise at round i is the model noise divided by
    alpha_i, so the discounted average amplifies late rounds; the estimate
    uses the mean norm of a d-dimensional Gaussian.
    """
    t_max = schedule.rounds
    if t_max < 2:
        raise ValueError("need at least 2 rounds")
    mean_chi = math.sqrt(2.0) * math.gamma((dim + 1) / 2) / math.gamma(dim / 2)
    if gamma == 0.0:
        s_w = 1.0 / schedule.alpha(t_max - 1)
    else:
        norm = (1.0 - gamma) / (1.0 - gamma ** (t_max - 1))
        s_w = sum(
            norm * gamma ** (t_max - 1 - i) / schedule.alpha(i)
            for i in range(1, t_max)
        )
    return math.sqrt(n_agents * (delta + epsilon)) / (mean_chi * s_w)
