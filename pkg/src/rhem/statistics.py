"""Hyperedge statistics evaluated against a :class:`~rhem.hyperstore.History`.

Every statistic is a function ``s(h; t)`` of a hyperedge and the events
strictly before ``t``.  Sub-hyperedge averages are not computed by
enumerating sub-hyperedges: a past event that overlaps ``h`` in ``k``
nodes contributes to exactly ``C(k, p)`` of the ``p``-subsets, so the
mean and sum come straight from the intersection profile.
"""

from __future__ import annotations

import csv
import math
import re
import warnings
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from collections.abc import Sequence

import numpy as np

from .hyperstore import History, Hyperedge

AGGREGATORS = ("mean", "min", "max", "sum", "sd")


class StatisticError(ValueError):
    pass


# kind -> (short grammar name, number of order parameters, variant)
# variant: "u" undirected only, "d" directed only, "*" both
_KINDS = {
    "size": ("size", 0, "u"),
    "size_squared": ("size2", 0, "u"),
    "num_sources": ("nsources", 0, "d"),
    "num_targets": ("ntargets", 0, "d"),
    "repetition": ("repetition", 0, "*"),
    "sub_repetition": ("subrep", 1, "u"),
    "sub_repetition_directed": ("subrep", 2, "d"),
    "shared_prior_events": ("spe", None, "*"),
    "reciprocation": ("reciprocation", 0, "d"),
    "sub_reciprocation": ("subrecip", 2, "d"),
    "switch_reciprocation": ("switch", 1, "d"),
    "closure": ("closure", 3, "u"),
    "transitive_closure": ("transitive", 3, "d"),
    "cyclic_closure": ("cyclic", 3, "d"),
    "shared_receivers": ("sharedrecv", 3, "d"),
    "shared_senders": ("sharedsend", 3, "d"),
    "covariate_aggregate": ("covagg", 0, "*"),
    "prior_hyperedge_success": ("prior_success", 0, "*"),
    "prior_sub_hyperedge_success": ("prior_subsuccess", None, "*"),
}

_ALIASES = {
    "size": "size", "size2": "size_squared", "size_squared": "size_squared",
    "nsources": "num_sources", "num_sources": "num_sources",
    "ntargets": "num_targets", "num_targets": "num_targets",
    "rep": "repetition", "repetition": "repetition",
    "subrep": "sub_repetition", "sub_repetition": "sub_repetition",
    "sub_repetition_directed": "sub_repetition_directed",
    "spe": "shared_prior_events", "shared_prior_events": "shared_prior_events",
    "recip": "reciprocation", "reciprocation": "reciprocation",
    "subrecip": "sub_reciprocation", "sub_reciprocation": "sub_reciprocation",
    "switch": "switch_reciprocation", "switch_reciprocation": "switch_reciprocation",
    "closure": "closure",
    "transitive": "transitive_closure", "transitive_closure": "transitive_closure",
    "cyclic": "cyclic_closure", "cyclic_closure": "cyclic_closure",
    "sharedrecv": "shared_receivers", "shared_receivers": "shared_receivers",
    "sharedsend": "shared_senders", "shared_senders": "shared_senders",
    "covagg": "covariate_aggregate", "covariate_aggregate": "covariate_aggregate",
    "prior_success": "prior_hyperedge_success",
    "prior_hyperedge_success": "prior_hyperedge_success",
    "prior_subsuccess": "prior_sub_hyperedge_success",
    "prior_sub_hyperedge_success": "prior_sub_hyperedge_success",
}

_AGGREGATING = {"sub_repetition", "sub_repetition_directed", "sub_reciprocation",
                "covariate_aggregate"}
_DIRECTED_CLOSURES = {"transitive_closure", "cyclic_closure", "shared_receivers",
                      "shared_senders"}


@dataclass(frozen=True)
class StatisticSpec:
    """One hyperedge statistic.

    ``orders`` holds the order parameters (p, q, l, ...) of the kind;
    ``universe`` selects the node count used in closure normalizers
    ("roster" for all known nodes, "active" for nodes seen up to ``t``).
    """

    kind: str
    orders: tuple[int, ...] = ()
    aggregator: str = "mean"
    attribute: str | None = None
    universe: str = "roster"
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise StatisticError(f"unknown statistic kind {self.kind!r}")
        object.__setattr__(self, "orders", tuple(int(x) for x in self.orders))
        _, n_orders, _ = _KINDS[self.kind]
        k = self.kind
        if k == "shared_prior_events" or k == "prior_sub_hyperedge_success":
            if len(self.orders) not in (1, 2):
                raise StatisticError(f"{k} takes one (undirected) or two (directed) orders")
        elif len(self.orders) != n_orders:
            raise StatisticError(f"{k} takes {n_orders} order parameter(s)")
        if any(o < 0 for o in self.orders):
            raise StatisticError("order parameters must be non-negative")
        if k in ("sub_repetition_directed", "sub_reciprocation") and sum(self.orders) < 1:
            raise StatisticError(f"{k} requires p + q >= 1")
        if (k == "closure" or k in _DIRECTED_CLOSURES) and min(self.orders) < 1:
            raise StatisticError("closure orders must be positive")
        if k == "switch_reciprocation" and self.orders[0] < 1:
            raise StatisticError("switch order must be positive")
        if self.aggregator not in AGGREGATORS:
            raise StatisticError(f"unknown aggregator {self.aggregator!r}")
        if self.aggregator != "mean" and k not in _AGGREGATING:
            raise StatisticError(f"{k} does not take an aggregator")
        if k == "covariate_aggregate" and not self.attribute:
            raise StatisticError("covariate_aggregate needs an attribute name")
        if self.universe not in ("roster", "active"):
            raise StatisticError("universe must be 'roster' or 'active'")

    @property
    def variant(self) -> str:
        v = _KINDS[self.kind][2]
        if self.kind in ("shared_prior_events", "prior_sub_hyperedge_success"):
            return "u" if len(self.orders) == 1 else "d"
        return v

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        base = _KINDS[self.kind][0]
        if self.universe == "active":
            base += ".active"
        args = list(map(str, self.orders))
        if self.attribute:
            args = [self.attribute] + args
        s = f"{base}({','.join(args)})" if args else base
        if self.aggregator != "mean":
            s += f":{self.aggregator}"
        return s

    def __str__(self):
        return self.label


_SPEC_RE = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*(?:\(([^)]*)\))?\s*(?::\s*(\w+))?\s*$")


def parse_spec(text: str) -> StatisticSpec:
    """Parse ``name(order...)[:aggregator]``, e.g. ``subrep(2):sd`` or ``covagg(age)``."""
    m = _SPEC_RE.match(text)
    if not m:
        raise StatisticError(f"cannot parse statistic {text!r}")
    name, args, agg = m.group(1).lower(), m.group(2), m.group(3) or "mean"
    universe = "roster"
    if name.endswith(".active"):
        name, universe = name[: -len(".active")], "active"
    kind = _ALIASES.get(name)
    if kind is None:
        raise StatisticError(f"unknown statistic {name!r}")
    parts = [a.strip() for a in args.split(",")] if args and args.strip() else []
    attribute = None
    if kind == "covariate_aggregate":
        if len(parts) != 1:
            raise StatisticError("covagg takes exactly one attribute name")
        attribute, parts = parts[0], []
    if kind == "sub_repetition" and len(parts) == 2:
        kind = "sub_repetition_directed"
    try:
        orders = tuple(int(a) for a in parts)
    except ValueError:
        raise StatisticError(f"order parameters must be integers in {text!r}") from None
    return StatisticSpec(kind, orders, agg.lower(), attribute, universe)


class CovariateTable:
    """Exogenous real-valued node attributes, indexed by node id."""

    def __init__(self, values: dict[str, np.ndarray] | None = None):
        self.values = {k: np.asarray(v, dtype=float) for k, v in (values or {}).items()}

    @classmethod
    def from_csv(cls, path, history: History) -> "CovariateTable":
        """Read ``label,attr1,attr2,...`` rows; labels are registered in ``history``."""
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            names = [h.strip() for h in header[1:]]
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header) or any(not c.strip() for c in row):
                    raise ValueError(f"{path}:{lineno}: missing covariate value")
                rows.append((history.add_node(row[0].strip()),
                             [float(c) for c in row[1:]]))
        cols = {n: np.full(history.num_nodes, np.nan) for n in names}
        for v, vals in rows:
            for n, x in zip(names, vals):
                cols[n][v] = x
        return cls(cols)

    def get(self, attribute: str, nodes: Sequence[int]) -> np.ndarray:
        if attribute not in self.values:
            raise StatisticError(f"unknown covariate {attribute!r}")
        col = self.values[attribute]
        idx = np.asarray(nodes, dtype=int)
        if idx.size and idx.max() >= col.size:
            raise StatisticError(f"covariate {attribute!r} missing for node {int(idx.max())}")
        out = col[idx]
        if np.isnan(out).any():
            bad = int(idx[np.isnan(out)][0])
            raise StatisticError(f"covariate {attribute!r} missing for node {bad}")
        return out


def binom(n: int, k: int) -> float:
    if k < 0 or n < 0 or k > n:
        return 0.0
    try:
        return float(math.comb(n, k))
    except OverflowError:
        raise StatisticError(f"binomial C({n},{k}) overflows a float") from None


def _aggregate(counts: Counter, total: int, agg: str) -> float:
    """Aggregate values over ``total`` items, of which only ``counts`` are non-zero."""
    if total <= 0:
        return 0.0
    s = math.fsum(counts.values())
    if agg == "sum":
        return s
    if agg == "mean":
        return s / total
    nz = len(counts)
    if agg == "max":
        return float(max(counts.values())) if nz else 0.0
    if agg == "min":
        return float(min(counts.values())) if nz == total else 0.0
    mu = s / total
    ss = math.fsum((c - mu) ** 2 for c in counts.values()) + (total - nz) * mu * mu
    return math.sqrt(ss / total)


def _aggregate_values(x: np.ndarray, agg: str) -> float:
    if x.size == 0:
        return 0.0
    return float({"mean": np.mean, "sum": np.sum, "min": np.min, "max": np.max,
                  "sd": np.std}[agg](x))


class _Context:
    """Per-(hyperedge, time) cache shared by all statistics of one batch row."""

    __slots__ = ("history", "h", "t", "cutoff", "covariates", "universe_n", "_profile",
                 "_rev", "_vcache")

    def __init__(self, history: History, h: Hyperedge, t: float, covariates=None):
        self.history = history
        self.h = h
        self.t = t
        self.cutoff = history.cutoff(t)
        self.covariates = covariates
        self._profile = None
        self._rev = None
        self._vcache = {}
        self.universe_n = 0

    @property
    def profile(self):
        if self._profile is None:
            self._profile = self.history.intersection_profile(self.h, self.t)
        return self._profile

    @property
    def reverse(self) -> "_Context":
        if self._rev is None:
            self._rev = _Context(self.history, self.h.reversed(), self.t, self.covariates)
        return self._rev

    def universe(self, spec: StatisticSpec) -> int:
        if spec.universe == "active":
            return self.history.num_active(self.t)
        return self.history.num_nodes


def _check_variant(spec: StatisticSpec, h: Hyperedge) -> None:
    v = spec.variant
    if (v == "u" and h.is_directed) or (v == "d" and not h.is_directed):
        raise StatisticError(
            f"statistic/variant mismatch: {spec.label} is not defined for "
            f"{'directed' if h.is_directed else 'undirected'} hyperedges")


def _subrep_undirected(ctx: _Context, p: int, agg: str) -> float:
    members = ctx.h.sources
    n = len(members)
    if p > n:
        return 0.0
    if p == 0:
        return float(ctx.cutoff)
    if agg in ("mean", "sum"):
        s = math.fsum(math.comb(k, p) for _, k, _ in ctx.profile)
        return s if agg == "sum" else s / binom(n, p)
    hs = set(members)
    counts = Counter()
    events = ctx.history.events
    for k, ov, _ in ctx.profile:
        if ov >= p:
            inter = sorted(hs.intersection(events[k].hyperedge.sources))
            counts.update(combinations(inter, p))
    return _aggregate(counts, math.comb(n, p), agg)


def _subrep_directed(ctx: _Context, p: int, q: int, agg: str) -> float:
    a, b = ctx.h.sources, ctx.h.targets
    if p > len(a) or q > len(b):
        return 0.0
    total = math.comb(len(a), p) * math.comb(len(b), q)
    if agg in ("mean", "sum"):
        s = math.fsum(math.comb(ka, p) * math.comb(kb, q) for _, (ka, kb), _ in ctx.profile)
        return s if agg == "sum" else s / float(total)
    sa, sb = set(a), set(b)
    counts = Counter()
    events = ctx.history.events
    for k, (ka, kb), _ in ctx.profile:
        if ka >= p and kb >= q:
            he = events[k].hyperedge
            ia = sorted(sa.intersection(he.sources))
            ib = sorted(sb.intersection(he.targets))
            for x in combinations(ia, p):
                for y in combinations(ib, q):
                    counts[(x, y)] += 1
    return _aggregate(counts, total, agg)


def _shared_prior_events(ctx: _Context, orders) -> float:
    if ctx.h.is_directed:
        p, q = orders
        if p == 0 and q == 0:
            return float(ctx.cutoff)
        return float(sum(1 for _, (ka, kb), _ in ctx.profile if ka >= p and kb >= q))
    (p,) = orders
    if p == 0:
        return float(ctx.cutoff)
    return float(sum(1 for _, k, _ in ctx.profile if k >= p))


def _switch(ctx: _Context, l: int) -> float:
    h = ctx.h
    if h.is_loop:
        raise StatisticError("loopless required: switch reciprocation on a loop")
    a, b = h.sources, h.targets
    if l > len(a) or l > len(b):
        return 0.0
    sa, sb = set(a), set(b)
    s = 0
    for a2 in combinations(a, l):
        for b2 in combinations(b, l):
            na = tuple(sorted((sa - set(a2)) | set(b2)))
            nb = tuple(sorted((sb - set(b2)) | set(a2)))
            s += ctx.history.degree(Hyperedge(na, nb), ctx.t)
    return s / (binom(len(a), l) * binom(len(b), l))


def _prior_sub_success(ctx: _Context, orders) -> float:
    hist = ctx.history
    hist._require_outcomes()
    if ctx.h.is_directed:
        p, q = orders
        if p > len(ctx.h.sources) or q > len(ctx.h.targets):
            return 0.0
        if p == 0 and q == 0:
            num, den = math.fsum(hist.outcomes[:ctx.cutoff]), ctx.cutoff
        else:
            w = [(math.comb(ka, p) * math.comb(kb, q), y) for _, (ka, kb), y in ctx.profile]
            num, den = math.fsum(c * y for c, y in w), sum(c for c, _ in w)
    else:
        (p,) = orders
        if p > len(ctx.h.sources):
            return 0.0
        if p == 0:
            num, den = math.fsum(hist.outcomes[:ctx.cutoff]), ctx.cutoff
        else:
            w = [(math.comb(k, p), y) for _, k, y in ctx.profile]
            num, den = math.fsum(c * y for c, y in w), sum(c for c, _ in w)
    return num / den if den else 0.0


def _prior_success(ctx: _Context) -> float:
    act = ctx.history.activity(ctx.h, ctx.t)
    if act == 0:
        ctx.history._require_outcomes()
        return 0.0
    return ctx.history.hyperedge_performance(ctx.h, ctx.t) / act


# closures -----------------------------------------------------------------

def _vprime_counts(ctx: _Context, fixed: tuple[int, ...], role: str, l: int) -> Counter:
    """Count l-subsets V' over past events having ``fixed`` on side ``role``.

    For role "u" (undirected) V' ranges over the event's members; for "src"
    it ranges over the event's targets and for "tgt" over its sources, so
    that ``counts[V']`` equals h.deg(fixed + V') with the matching direction.
    """
    key = (fixed, role, l)
    c = ctx._vcache.get(key)
    if c is not None:
        return c
    hist = ctx.history
    if role == "u":
        probe = Hyperedge(fixed)
    elif role == "src":
        probe = Hyperedge(fixed, ())
    else:
        probe = Hyperedge((), fixed)
    c = Counter()
    fixed_set = set(fixed)
    for k in hist.superset_events(probe, ctx.t):
        he = hist.events[k].hyperedge
        if role == "u":
            pool = [v for v in he.sources if v not in fixed_set]
        elif role == "src":
            pool = he.targets
        else:
            pool = he.sources
        if l == 1:
            c.update((v,) for v in pool)
        else:
            c.update(combinations(pool, l))
    ctx._vcache[key] = c
    return c


def _sum_min(c1: Counter, c2: Counter, exclude: set) -> int:
    if len(c2) < len(c1):
        c1, c2 = c2, c1
    s = 0
    for key, x in c1.items():
        y = c2.get(key)
        if y and exclude.isdisjoint(key):
            s += min(x, y)
    return s


def _closure_undirected(ctx: _Context, p: int, q: int, l: int) -> float:
    members = ctx.h.sources
    n = len(members)
    norm = binom(n, p) * binom(n - p, q) * binom(ctx.universe_n - (p + q), l)
    if norm == 0 or ctx.cutoff == 0:
        return 0.0
    s = 0
    for h1 in combinations(members, p):
        c1 = _vprime_counts(ctx, h1, "u", l)
        if not c1:
            continue
        rest = [v for v in members if v not in h1]
        for h2 in combinations(rest, q):
            c2 = _vprime_counts(ctx, h2, "u", l)
            if c2:
                s += _sum_min(c1, c2, set(h1) | set(h2))
    return s / norm


# (role of a', role of b') in the two h.deg terms; "src" means the fixed set
# sends to V', "tgt" means it receives from V'
_DIRECTED_ROLES = {
    "transitive_closure": ("src", "tgt"),
    "cyclic_closure": ("tgt", "src"),
    "shared_receivers": ("src", "src"),
    "shared_senders": ("tgt", "tgt"),
}


def _closure_directed(ctx: _Context, kind: str, p: int, q: int, l: int) -> float:
    h = ctx.h
    if h.is_loop:
        raise StatisticError(f"loopless required: {kind} on a loop")
    a, b = h.sources, h.targets
    norm = binom(len(a), p) * binom(len(b), q) * binom(ctx.universe_n - (p + q), l)
    if norm == 0 or ctx.cutoff == 0:
        return 0.0
    ra, rb = _DIRECTED_ROLES[kind]
    s = 0
    for a2 in combinations(a, p):
        c1 = _vprime_counts(ctx, a2, ra, l)
        if not c1:
            continue
        for b2 in combinations(b, q):
            c2 = _vprime_counts(ctx, b2, rb, l)
            if c2:
                s += _sum_min(c1, c2, set(a2) | set(b2))
    return s / norm


def _warn_closure_cost(spec: StatisticSpec) -> None:
    if spec.orders[2] > 1:
        warnings.warn(f"{spec.label}: closure with l > 1 enumerates l-subsets of every "
                      "co-participating event and can be slow", RuntimeWarning, stacklevel=3)


# dispatch -----------------------------------------------------------------

def _eval(spec: StatisticSpec, ctx: _Context) -> float:
    h = ctx.h
    _check_variant(spec, h)
    k = spec.kind
    o = spec.orders
    if k == "size":
        return float(len(h.sources))
    if k == "size_squared":
        return float(len(h.sources)) ** 2
    if k == "num_sources":
        return float(len(h.sources))
    if k == "num_targets":
        return float(len(h.targets))
    if k == "repetition":
        return float(ctx.history.activity(h, ctx.t))
    if k == "sub_repetition":
        return _subrep_undirected(ctx, o[0], spec.aggregator)
    if k == "sub_repetition_directed":
        return _subrep_directed(ctx, o[0], o[1], spec.aggregator)
    if k == "shared_prior_events":
        return _shared_prior_events(ctx, o)
    if k == "reciprocation":
        return float(ctx.history.activity(h.reversed(), ctx.t))
    if k == "sub_reciprocation":
        return _subrep_directed(ctx.reverse, o[0], o[1], spec.aggregator)
    if k == "switch_reciprocation":
        return _switch(ctx, o[0])
    if k == "closure":
        ctx.universe_n = ctx.universe(spec)
        return _closure_undirected(ctx, *o)
    if k in _DIRECTED_CLOSURES:
        ctx.universe_n = ctx.universe(spec)
        return _closure_directed(ctx, k, *o)
    if k == "covariate_aggregate":
        if ctx.covariates is None:
            raise StatisticError(f"{spec.label} needs a covariate table")
        return _aggregate_values(ctx.covariates.get(spec.attribute, h.members),
                                 spec.aggregator)
    if k == "prior_hyperedge_success":
        return _prior_success(ctx)
    if k == "prior_sub_hyperedge_success":
        return _prior_sub_success(ctx, o)
    raise StatisticError(f"unhandled statistic kind {k!r}")  # pragma: no cover


def eval(spec: StatisticSpec, history: History, h: Hyperedge, t: float,
         covariates: CovariateTable | None = None) -> float:
    """Value of ``spec`` for hyperedge ``h`` given the events strictly before ``t``."""
    if spec.kind == "closure" or spec.kind in _DIRECTED_CLOSURES:
        _warn_closure_cost(spec)
    return _eval(spec, _Context(history, h, t, covariates))


# batch evaluation ---------------------------------------------------------

_VECTOR_MIN_ROWS = 32


class HyperedgeBatch(Sequence):
    """A fixed list of hyperedges with its flattened member layout precomputed.

    Passing the same batch to :func:`eval_batch` repeatedly (e.g. a full risk
    set scored at every event time) avoids rebuilding the layout each call.
    """

    def __init__(self, hs: Sequence[Hyperedge]):
        self.hs = list(hs)
        self.directed = any(h.is_directed for h in self.hs)
        self.index = {h: i for i, h in enumerate(self.hs)}
        self._layout = None

    def __len__(self):
        return len(self.hs)

    def __getitem__(self, i):
        return self.hs[i]

    def layout(self) -> dict:
        if self._layout is None:
            hs = self.hs
            sizes = np.fromiter((len(h.sources) for h in hs), dtype=int, count=len(hs))
            flat = np.fromiter((v for h in hs for v in h.sources), dtype=int,
                               count=int(sizes.sum()))
            offsets = np.concatenate(([0], np.cumsum(sizes)[:-1]))
            self._layout = {"sizes": sizes, "flat": flat, "offsets": offsets,
                            "uniq": np.unique(flat, return_inverse=True)}
        return self._layout


def _vector_column(spec: StatisticSpec, history: History, hs: Sequence[Hyperedge],
                   t: float, cache: dict, covariates) -> np.ndarray | None:
    """Vectorized column for cheap undirected statistics, or None if not covered."""
    k = spec.kind
    if k == "size":
        return cache["sizes"].astype(float)
    if k == "size_squared":
        return cache["sizes"].astype(float) ** 2
    if k == "repetition":
        return np.array([history.activity(h, t) for h in hs], dtype=float)
    if k == "sub_repetition" and spec.orders[0] == 1 and spec.aggregator in ("mean", "sum"):
        if "node_deg" not in cache:
            uniq, inv = cache["uniq"]
            c = history.cutoff(t)
            src = history._src
            deg = np.array([bisect_left(src[v], c) if v < len(src) else 0
                            for v in uniq.tolist()], dtype=float)
            cache["node_deg"] = np.add.reduceat(deg[inv], cache["offsets"])
        s = cache["node_deg"]
        return s if spec.aggregator == "sum" else s / cache["sizes"]
    if k == "covariate_aggregate" and spec.aggregator in ("mean", "sum"):
        if covariates is None:
            raise StatisticError(f"{spec.label} needs a covariate table")
        vals = covariates.get(spec.attribute, cache["flat"])
        s = np.add.reduceat(vals, cache["offsets"])
        return s if spec.aggregator == "sum" else s / cache["sizes"]
    return None


def eval_batch(specs: Sequence[StatisticSpec], history: History, hs: Sequence[Hyperedge],
               t: float, covariates: CovariateTable | None = None) -> np.ndarray:
    """Matrix of statistic values, one row per hyperedge and one column per spec.

    The intersection profile of each hyperedge is computed once and shared
    by all specs; large undirected batches use vectorized columns for size,
    repetition and first-order sub-repetition.
    """
    specs = list(specs)
    out = np.empty((len(hs), len(specs)), dtype=float)
    if not hs:
        return out
    for spec in specs:
        if spec.kind == "closure" or spec.kind in _DIRECTED_CLOSURES:
            _warn_closure_cost(spec)
    done = [False] * len(specs)
    if len(hs) >= _VECTOR_MIN_ROWS:
        batch = hs if isinstance(hs, HyperedgeBatch) else HyperedgeBatch(hs)
    if len(hs) >= _VECTOR_MIN_ROWS and not batch.directed:
        cache = dict(batch.layout())
        for j, spec in enumerate(specs):
            if spec.variant == "d":
                continue
            col = _vector_column(spec, history, hs, t, cache, covariates)
            if col is not None:
                out[:, j] = col
                done[j] = True
    rest = [j for j in range(len(specs)) if not done[j]]
    if rest:
        for i, h in enumerate(hs):
            ctx = _Context(history, h, t, covariates)
            for j in rest:
                try:
                    out[i, j] = _eval(specs[j], ctx)
                except StatisticError as exc:
                    raise StatisticError(f"row {i}, column {j} ({specs[j].label}): {exc}") \
                        from exc
    return out
