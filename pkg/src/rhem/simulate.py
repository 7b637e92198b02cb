"""Synthetic hyperevent streams.

:func:`simulate` draws events one at a time: the next hyperedge is chosen
from a candidate set with probability proportional to
``exp(theta . s(h; t))``, statistics taken against the running history.
Only the order of events is modelled, so times are simply ``1..N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .hyperstore import Event, History, Hyperedge
from .sampling import enumerate_full
from .statistics import CovariateTable, HyperedgeBatch, StatisticSpec, eval_batch

CANDIDATE_POLICIES = ("full", "conditional_size", "repeated_plus_innovation")
MAX_ENUMERATED = 1 << 16


class SimulationError(RuntimeError):
    pass


@dataclass
class OutcomeModel:
    """Normal linear outcome ``y = intercept + coef . s(h) + noise``."""

    intercept: float
    coefficients: Sequence[float]
    noise_sd: float = 1.0
    specs: Sequence[StatisticSpec] | None = None


@dataclass
class SimConfig:
    node_count: int
    event_count: int
    specs: Sequence[StatisticSpec]
    theta: Sequence[float]
    candidate_policy: str = "full"
    sizes: Sequence[int] | None = None
    epsilon: float = 0.1
    outcome_model: OutcomeModel | None = None
    covariates: CovariateTable | None = None
    seed: int = 0

    def __post_init__(self):
        self.candidate_policy = self.candidate_policy.replace("-", "_")
        if len(self.theta) != len(self.specs):
            raise ValueError("theta and specs differ in length")
        if self.candidate_policy not in CANDIDATE_POLICIES:
            raise ValueError(f"unknown candidate policy {self.candidate_policy!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.candidate_policy == "full" and self.node_count > 20:
            raise ValueError("the full candidate policy is limited to 20 nodes")
        if self.candidate_policy != "full" and not self.sizes:
            raise ValueError(f"{self.candidate_policy} needs a list of event sizes")


def softmax_choice(rng: np.random.Generator, scores: np.ndarray) -> int:
    if not np.all(np.isfinite(scores)):
        raise SimulationError("non-finite linear predictor; standardize the statistics or "
                              "shrink theta")
    w = np.exp(scores - scores.max())
    return int(rng.choice(len(w), p=w / w.sum()))


def _k_subsets(n: int, k: int) -> list[Hyperedge]:
    if math.comb(n, k) > MAX_ENUMERATED:
        raise SimulationError(f"C({n},{k}) candidates exceed the enumeration limit")
    return [Hyperedge(c) for c in combinations(range(n), k)]


def simulate(config: SimConfig) -> list[Event]:
    """Generate ``config.event_count`` events from the hyperevent model."""
    rng = np.random.default_rng(config.seed)
    n = config.node_count
    specs = list(config.specs)
    theta = np.asarray(config.theta, dtype=float)
    om = config.outcome_model
    hist = History(directed=False, labels=[str(v) for v in range(n)],
                   outcomes=om is not None)
    full = HyperedgeBatch(enumerate_full(range(n))) if config.candidate_policy == "full" else None
    by_size = {}
    for step in range(1, config.event_count + 1):
        t = float(step)
        if full is not None:
            cands = full
        elif config.candidate_policy == "conditional_size":
            k = int(rng.choice(config.sizes))
            if k not in by_size:
                by_size[k] = HyperedgeBatch(_k_subsets(n, k))
            cands = by_size[k]
        else:
            cands = hist.distinct_hyperedges(t)
            if not cands or rng.random() < config.epsilon:
                k = int(rng.choice(config.sizes))
                cands = None
                h = Hyperedge(tuple(sorted(rng.choice(n, size=k, replace=False).tolist())))
        if cands is not None:
            scores = eval_batch(specs, hist, cands, t, config.covariates) @ theta
            h = cands[softmax_choice(rng, scores)]
        y = None
        if om is not None:
            ospecs = list(om.specs) if om.specs is not None else specs
            s = eval_batch(ospecs, hist, [h], t, config.covariates)[0]
            y = float(om.intercept + s @ np.asarray(om.coefficients, dtype=float)
                      + om.noise_sd * rng.standard_normal())
        hist.push_event(Event(h, t, outcome=y))
    return hist.events


def make_meeting_like(seed: int = 0, n_events: int = 886, n_nodes: int = 23) -> list[Event]:
    """Meeting diary stand-in: many one-on-one meetings, many near-complete meetings.

    Participants join the roster gradually.  Each meeting is either a
    one-on-one with a participant picked by past one-on-one frequency, a
    full meeting of everyone present minus a few absentees, or a meeting of
    one of a handful of recurring committees.
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_nodes).tolist()
    entered = order[:3]
    waiting = order[3:]
    committees = []
    for _ in range(8):
        k = int(rng.integers(2, 9))
        committees.append(sorted(rng.choice(n_nodes, size=k, replace=False).tolist()))
    singles = np.zeros(n_nodes)
    events = []
    for step in range(1, n_events + 1):
        if waiting and rng.random() < 0.12:
            entered.append(waiting.pop(0))
        u = rng.random()
        members = None
        if u < 0.56:
            pool = np.asarray(entered)
            w = 1.0 + singles[pool]
            v = int(rng.choice(pool, p=w / w.sum()))
            singles[v] += 1
            members = [v]
        elif u < 0.86:
            members = [v for v in entered if rng.random() > 0.04]
        else:
            c = committees[int(rng.integers(len(committees)))]
            members = [v for v in c if v in entered]
        if not members:
            members = [int(rng.choice(entered))]
        events.append(Event(Hyperedge(tuple(sorted(members))), float(step)))
    return events


def make_coauthor_like(n_nodes: int = 100_000, n_events: int = 100_000,
                       mean_size: float = 8.0, repeat_prob: float = 0.12,
                       events_per_time: int = 1000, max_size: int = 100,
                       seed: int = 0) -> list[Event]:
    """Large co-authorship stand-in with repeated teams and citation-like outcomes.

    Team sizes are ``1 + Poisson(mean_size - 1)`` capped at ``max_size``;
    authors are drawn with a heavy-tailed productivity weight.  With
    probability ``repeat_prob`` an earlier team publishes again.  Times are
    coarse (``events_per_time`` papers share a time stamp).
    """
    rng = np.random.default_rng(seed)
    weight = rng.pareto(2.0, size=n_nodes) + 1.0
    cdf = np.cumsum(weight)
    cdf /= cdf[-1]
    quality = rng.standard_normal(n_nodes)
    teams: list[tuple[int, ...]] = []
    events = []
    for i in range(n_events):
        if teams and rng.random() < repeat_prob:
            h = teams[int(rng.integers(len(teams)))]
        else:
            k = min(max_size, 1 + int(rng.poisson(mean_size - 1.0)), n_nodes)
            members: set[int] = set()
            while len(members) < k:
                draw = np.searchsorted(cdf, rng.random(2 * (k - len(members))), side="right")
                for v in draw.tolist():
                    if len(members) < k:
                        members.add(min(v, n_nodes - 1))
            h = tuple(sorted(members))
            teams.append(h)
        y = float(quality[list(h)].mean() * 5.0 + rng.standard_normal() * 10.0)
        events.append(Event(Hyperedge(h), float(i // events_per_time), outcome=y))
    return events


def size_histogram(events: Sequence[Event]) -> dict[int, int]:
    out: dict[int, int] = {}
    for e in events:
        k = len(e.hyperedge.sources)
        out[k] = out.get(k, 0) + 1
    return dict(sorted(out.items()))
