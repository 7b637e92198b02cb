"""Risk sets and case-control sampling.

Each observed event (the case) is paired with ``m`` non-event hyperedges
(controls) drawn from its risk set.  Random streams are derived from
``(seed, replication_index, event_ordinal)`` so every stratum can be built
independently and in any order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np

from .hyperstore import Event, History, Hyperedge
from .statistics import CovariateTable, HyperedgeBatch, StatisticSpec, eval_batch

log = logging.getLogger(__name__)

KINDS = ("full", "unconstrained", "conditional_size", "repeated")
POOLS = ("active", "roster")
SPLITS = ("all", "first", "repeated")

# below this many candidates the samplers enumerate instead of rejecting
ENUMERATION_LIMIT = 4096


class RiskSetExhausted(ValueError):
    """Not enough distinct candidates to draw the requested controls."""

    def __init__(self, msg: str, shortfall: int = 0):
        super().__init__(msg)
        self.shortfall = shortfall


@dataclass(frozen=True)
class RiskSetPolicy:
    kind: str = "conditional_size"
    m: int = 1
    node_pool: str = "active"
    split: str = "all"
    max_full: int = 2 ** 20

    def __post_init__(self):
        kind = self.kind.replace("-", "_")
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ValueError(f"unknown risk set kind {self.kind!r}")
        if self.node_pool not in POOLS:
            raise ValueError(f"unknown node pool {self.node_pool!r}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if kind != "full" and self.m < 1:
            raise ValueError("sampled risk sets need m >= 1 controls")
        if kind == "repeated" and self.split != "repeated":
            raise ValueError("the repeated risk set is only defined for split='repeated'")
        if self.split == "repeated" and kind != "repeated":
            raise ValueError("split='repeated' requires the repeated risk set")

    @property
    def tag(self) -> str:
        m = "all" if self.kind == "full" else str(self.m)
        return f"{self.kind}(m={m},pool={self.node_pool},split={self.split})"


@dataclass
class Stratum:
    event_ordinal: int
    case: Hyperedge
    controls: list[Hyperedge]
    time: float
    statistics: np.ndarray | None = None
    underfilled: bool = False

    @property
    def rows(self) -> list[Hyperedge]:
        return [self.case] + self.controls


@dataclass
class StrataSet:
    """Strata of one sweep plus the bookkeeping of what was left out."""

    strata: list[Stratum]
    specs: list[StatisticSpec]
    policy: RiskSetPolicy
    replication_index: int = 0
    dropped: int = 0
    underfilled: int = 0
    skipped: int = 0
    messages: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.strata)

    def __iter__(self):
        return iter(self.strata)

    def __getitem__(self, i):
        return self.strata[i]

    @property
    def n_events(self) -> int:
        return len(self.strata)

    @property
    def n_observations(self) -> int:
        return sum(1 + len(s.controls) for s in self.strata)


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def stratum_rng(seed: int, replication_index: int, event_ordinal: int) -> np.random.Generator:
    """Independent stream for one stratum, identical in serial and parallel runs."""
    return np.random.default_rng([int(seed), int(replication_index), int(event_ordinal)])


def _choose(rng, items: list, m: int) -> list:
    # sorted indices keep candidate order, so drawing every candidate
    # reproduces the full risk set row for row
    idx = np.sort(rng.choice(len(items), size=m, replace=False))
    return [items[i] for i in idx.tolist()]


def _as_pool(pool) -> np.ndarray:
    # integer arrays are taken as given (distinct ids in a fixed order);
    # anything else is put in sorted order
    if isinstance(pool, np.ndarray):
        return pool
    return np.array(sorted(pool), dtype=np.int64)


def _enumerate(total: int, m: int) -> bool:
    # rejection needs about total / (total - m) draws per control, so
    # enumerate small candidate sets that are to be mostly used up
    return total <= ENUMERATION_LIMIT and 2 * m > total


def _case_in(case, k, arr: np.ndarray) -> bool:
    if case is None or case.size != k:
        return False
    return bool(np.isin(np.asarray(case.members), arr).all())


def _nonempty_subsets(pool: Sequence[int]) -> list[tuple[int, ...]]:
    n = len(pool)
    return [tuple(pool[j] for j in range(n) if mask >> j & 1) for mask in range(1, 1 << n)]


def enumerate_full(pool: Sequence[int], directed: bool = False) -> list[Hyperedge]:
    """All non-empty hyperedges over ``pool`` (directed: all pairs of non-empty sets)."""
    pool = sorted(pool)
    subsets = _nonempty_subsets(pool)
    if not directed:
        return [Hyperedge(s) for s in subsets]
    return [Hyperedge(a, b) for a in subsets for b in subsets]


def _reject_draws(draw: Callable, m: int, case, accept, what: str) -> list[Hyperedge]:
    seen = set()
    out = []
    attempts = 0
    while len(out) < m:
        if attempts >= 100 * m:
            raise RiskSetExhausted(
                f"{what}: only {len(out)} of {m} distinct controls after {attempts} draws",
                m - len(out))
        attempts += 1
        h = draw()
        if h is None or h == case or h in seen or (accept is not None and not accept(h)):
            continue
        seen.add(h)
        out.append(h)
    return out


def _from_candidates(cands: list[Hyperedge], m: int, rng, case, accept,
                     what: str) -> list[Hyperedge]:
    cands = [h for h in cands if h != case and (accept is None or accept(h))]
    if m > len(cands):
        raise RiskSetExhausted(
            f"{what}: {m} controls requested but only {len(cands)} candidates",
            m - len(cands))
    return _choose(rng, cands, m)


def sample_unconstrained(pool: Sequence[int], m: int, rng=None, case: Hyperedge | None = None,
                         directed: bool = False,
                         accept: Callable[[Hyperedge], bool] | None = None) -> list[Hyperedge]:
    """Draw ``m`` distinct non-empty hyperedges uniformly over all subsets of ``pool``.

    Each node is included independently with probability 1/2 and empty,
    duplicate or case draws are rejected, which is uniform sampling
    without replacement.  Small candidate sets that are mostly used up
    are enumerated instead.
    """
    rng = _rng(rng)
    arr = _as_pool(pool)
    n = len(arr)
    if n < 1:
        raise RiskSetExhausted("unconstrained: empty node pool", m)
    if m == 0:
        return []
    n_sets = (1 << n) - 1 if n < 64 else math.inf
    total = n_sets * n_sets if directed else n_sets
    if _enumerate(total, m):
        return _from_candidates(enumerate_full(arr.tolist(), directed), m, rng, case, accept,
                                "unconstrained")

    def subset():
        mask = rng.random(n) < 0.5
        return tuple(sorted(arr[mask].tolist()))

    def draw():
        a = subset()
        if not a:
            return None
        if not directed:
            return Hyperedge(a)
        b = subset()
        return Hyperedge(a, b) if b else None

    return _reject_draws(draw, m, case, accept, "unconstrained")


def sample_conditional_size(pool: Sequence[int], k, m: int, rng=None,
                            case: Hyperedge | None = None,
                            accept: Callable[[Hyperedge], bool] | None = None
                            ) -> list[Hyperedge]:
    """Draw ``m`` distinct uniform hyperedges of size ``k`` from ``pool``.

    ``pool`` holds node ids; an integer array is used in its given order,
    any other collection is sorted first.

    ``k`` is an int for undirected hyperedges or a ``(|a|, |b|)`` pair, in
    which case sources and targets are independent uniform subsets of the
    (one-mode) pool.
    """
    rng = _rng(rng)
    arr = _as_pool(pool)
    n = len(arr)
    directed = isinstance(k, tuple)
    total = math.comb(n, k[0]) * math.comb(n, k[1]) if directed else math.comb(n, k)
    # only when every candidate is requested does the case's presence matter
    have = total - (1 if m >= total and _case_in(case, k, arr) else 0)
    if m > have:
        raise RiskSetExhausted(
            f"conditional size: {m} controls requested but only {have} hyperedges of size "
            f"{k} besides the case (shortfall {m - have})", m - have)
    if m == 0:
        return []
    if _enumerate(total, m):
        pool = sorted(arr.tolist())
        if directed:
            cands = [Hyperedge(a, b) for a in combinations(pool, k[0])
                     for b in combinations(pool, k[1])]
        else:
            cands = [Hyperedge(c) for c in combinations(pool, k)]
        return _from_candidates(cands, m, rng, case, accept, "conditional size")

    def pick(size):
        return tuple(sorted(arr[rng.choice(n, size=size, replace=False)].tolist()))

    if directed:
        def draw():
            return Hyperedge(pick(k[0]), pick(k[1]))
    else:
        def draw():
            return Hyperedge(pick(k))
    return _reject_draws(draw, m, case, accept, "conditional size")


def sample_repeated(history: History, t: float, m: int, rng=None,
                    case: Hyperedge | None = None) -> tuple[list[Hyperedge], bool]:
    """Draw ``m`` distinct hyperedges that experienced an event strictly before ``t``.

    Returns ``(controls, underfilled)``; when fewer than ``m`` hyperedges are
    eligible all of them are returned and ``underfilled`` is True.
    """
    rng = _rng(rng)
    n = history.num_distinct(t)
    pos = history.first_use_index(case) if case is not None else None
    if pos is not None and pos >= n:
        pos = None
    n_elig = n - (pos is not None)
    if n_elig <= m:
        out = [history.distinct_at(i) for i in range(n) if i != pos]
        return out, n_elig < m
    if m == 1:
        idx = [int(rng.integers(n_elig))]
    else:
        idx = rng.choice(n_elig, size=m, replace=False).tolist()
    if pos is not None:
        idx = [i + 1 if i >= pos else i for i in idx]
    return [history.distinct_at(i) for i in idx], False


# strata -------------------------------------------------------------------

class RiskSetTooLarge(ValueError):
    pass


class _Builder:
    def __init__(self, history, policy, specs, replication_index, seed, covariates):
        self.history = history
        self.policy = policy
        self.specs = specs
        self.rep = replication_index
        self.seed = seed
        self.covariates = covariates
        self._full_cache = {}
        # nodes in order of first participation; the active pool at t is a prefix
        if policy.node_pool == "roster":
            self._nodes = np.arange(history.num_nodes, dtype=np.int64)
        else:
            self._nodes = np.asarray(history.active_nodes(), dtype=np.int64)

    def pool(self, t: float) -> np.ndarray:
        if self.policy.node_pool == "roster":
            return self._nodes
        return self._nodes[:self.history.num_active(t, inclusive=True)]

    def full(self, pool) -> list[Hyperedge]:
        pool = sorted(int(v) for v in pool)
        directed = self.history.directed
        n_sets = (1 << len(pool)) - 1 if len(pool) < 64 else math.inf
        size = n_sets * n_sets if directed else n_sets
        if size > self.policy.max_full:
            raise RiskSetTooLarge(
                f"full risk set over {len(pool)} nodes has {size} hyperedges, "
                f"above the bound {self.policy.max_full}")
        key = tuple(pool)
        cands = self._full_cache.get(key)
        if cands is None:
            cands = HyperedgeBatch(enumerate_full(pool, directed))
            self._full_cache = {key: cands}
        return cands

    def build(self, i: int):
        """Returns (stratum or None, status) with status in ok/skipped/dropped."""
        hist = self.history
        pol = self.policy
        e = hist.events[i]
        h, t = e.hyperedge, e.time
        if pol.split != "all":
            repeated = hist.activity(h, t) > 0
            if repeated != (pol.split == "repeated"):
                return None, "skipped", None
        accept = None
        if pol.split == "first":
            def accept(g):
                return hist.activity(g, t) == 0
        rng = stratum_rng(self.seed, self.rep, i)
        underfilled = False
        try:
            if pol.kind == "repeated":
                controls, underfilled = sample_repeated(hist, t, pol.m, rng, h)
            elif pol.kind == "full":
                cands = self.full(self.pool(t))
                ci = cands.index.get(h)
                hs = cands.hs
                if accept is None:
                    keep = [j for j in range(len(hs)) if j != ci]
                else:
                    keep = [j for j, g in enumerate(hs) if j != ci and accept(g)]
                if ci is not None and keep:
                    x = eval_batch(self.specs, hist, cands, t, self.covariates)
                    s = Stratum(i, h, [hs[j] for j in keep], t)
                    s.statistics = x[[ci] + keep]
                    return s, "ok", None
                controls = [hs[j] for j in keep]
            elif pol.kind == "unconstrained":
                controls = sample_unconstrained(self.pool(t), pol.m, rng, h,
                                                hist.directed, accept)
            else:
                controls = sample_conditional_size(self.pool(t), h.size, pol.m, rng, h,
                                                   accept)
        except RiskSetExhausted as exc:
            return None, "dropped", f"event {i}: {exc}"
        if not controls:
            return None, "dropped", f"event {i}: no controls available"
        s = Stratum(i, h, controls, t, underfilled=underfilled)
        s.statistics = eval_batch(self.specs, hist, s.rows, t, self.covariates)
        return s, "ok", None


def build_strata(events: History | Iterable[Event], policy: RiskSetPolicy,
                 specs: Sequence[StatisticSpec], replication_index: int = 0, seed: int = 0,
                 covariates: CovariateTable | None = None, n_jobs: int = 1) -> StrataSet:
    """One stratum per (eligible) event: the case plus sampled controls, scored.

    Statistics of every row are computed against the events strictly before
    the case's time, so simultaneous events share the same snapshot.
    Events outside the policy's split are skipped; events whose risk set
    cannot supply a control are dropped and counted.
    """
    history = events if isinstance(events, History) else History.from_events(events)
    specs = list(specs)
    b = _Builder(history, policy, specs, replication_index, seed, covariates)
    n = len(history)
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(b.build, range(n), chunksize=64))
    else:
        results = [b.build(i) for i in range(n)]
    out = StrataSet([], specs, policy, replication_index)
    for s, status, msg in results:
        if status == "ok":
            out.strata.append(s)
            out.underfilled += s.underfilled
        elif status == "skipped":
            out.skipped += 1
        else:
            out.dropped += 1
            out.messages.append(msg)
    if out.dropped:
        log.info("dropped %d stratum/strata without controls", out.dropped)
    if out.underfilled:
        log.info("%d stratum/strata have fewer than %d controls", out.underfilled, policy.m)
    return out
