"""Hyperevent data model and the incremental index over past events.

A :class:`History` is an append-only log of :class:`Event` objects plus
per-node inverted indexes (sorted event ordinals).  Every query takes a
time ``t`` and only looks at events with ``t_e < t``, so a single fully
ingested history can answer questions about any earlier point in time.
"""

from __future__ import annotations

import csv
import logging
import math
from bisect import bisect_left, bisect_right
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

DEFAULT_MAX_SIZE = 100


class OrderError(ValueError):
    """Raised when an event is pushed out of time order."""

    def __init__(self, ordinal: int, time: float, last_time: float):
        super().__init__(
            f"event {ordinal} at time {time} precedes the last pushed time {last_time}"
        )
        self.ordinal = ordinal


class OutcomesUnavailable(ValueError):
    def __init__(self):
        super().__init__("outcomes not available")


@dataclass(frozen=True, slots=True)
class Hyperedge:
    """Undirected node set (``targets is None``) or directed (sources, targets) pair.

    The fields hold sorted, duplicate-free tuples of node ids; use
    :meth:`undirected` / :meth:`directed` to build one from arbitrary input.
    """

    sources: tuple[int, ...]
    targets: tuple[int, ...] | None = None

    @classmethod
    def undirected(cls, nodes: Iterable[int]) -> "Hyperedge":
        members = tuple(sorted(set(int(v) for v in nodes)))
        if not members:
            raise ValueError("undirected hyperedge needs at least one member")
        return cls(members)

    @classmethod
    def directed(cls, sources: Iterable[int], targets: Iterable[int]) -> "Hyperedge":
        a = tuple(sorted(set(int(v) for v in sources)))
        b = tuple(sorted(set(int(v) for v in targets)))
        if not a or not b:
            raise ValueError("directed hyperedge needs at least one source and one target")
        return cls(a, b)

    @property
    def is_directed(self) -> bool:
        return self.targets is not None

    @property
    def members(self) -> tuple[int, ...]:
        if self.targets is None:
            return self.sources
        return tuple(sorted(set(self.sources) | set(self.targets)))

    @property
    def size(self):
        if self.targets is None:
            return len(self.sources)
        return (len(self.sources), len(self.targets))

    @property
    def is_loop(self) -> bool:
        return self.targets is not None and not set(self.sources).isdisjoint(self.targets)

    def reversed(self) -> "Hyperedge":
        if self.targets is None:
            raise ValueError("only directed hyperedges can be reversed")
        return Hyperedge(self.targets, self.sources)

    def issubset(self, other: "Hyperedge") -> bool:
        if self.targets is None:
            return set(self.sources).issubset(other.sources)
        return set(self.sources).issubset(other.sources) and set(self.targets).issubset(
            other.targets
        )


@dataclass(frozen=True, slots=True)
class Event:
    hyperedge: Hyperedge
    time: float
    event_type: str | None = None
    weight: float | None = None
    outcome: float | None = None


def _intersect_sorted(a: Sequence[int], b: Sequence[int], b_len: int) -> list[int]:
    # a is short, b is searched with a moving lower bound
    out = []
    lo = 0
    for x in a:
        lo = bisect_left(b, x, lo, b_len)
        if lo == b_len:
            break
        if b[lo] == x:
            out.append(x)
            lo += 1
    return out


class History:
    """Network of past events with inverted node indexes.

    Parameters
    ----------
    directed : bool
        Whether events live on directed hyperedges.
    labels : iterable of str, optional
        Node roster.  Node ids are the positions in this list; nodes first
        seen in pushed events are appended automatically.
    outcomes : bool, optional
        Whether events carry relational outcomes.  ``None`` means it is
        decided by the first pushed event.
    """

    def __init__(self, directed: bool = False, labels: Iterable[str] | None = None,
                 outcomes: bool | None = None):
        self.directed = directed
        self.labels: list[str] = []
        self._ids: dict[str, int] = {}
        self.has_outcomes = outcomes
        self.events: list[Event] = []
        self.times: list[float] = []
        self.outcomes: list[float] = []
        # undirected: membership lists live in _src
        self._src: list[list[int]] = []
        self._tgt: list[list[int]] = []
        self._edge_ordinals: dict[Hyperedge, list[int]] = {}
        self._edge_cum_outcome: dict[Hyperedge, list[float]] = {}
        self._distinct: list[Hyperedge] = []
        self._distinct_pos: dict[Hyperedge, int] = {}
        self._distinct_first_time: list[float] = []
        self._node_first_time: list[float] = []
        self._nodes_by_first: list[int] = []
        self._first_times_sorted: list[float] = []
        self.truncated = 0
        for label in labels or ():
            self.add_node(label)

    # roster ---------------------------------------------------------------

    def add_node(self, label: str) -> int:
        label = str(label)
        if label in self._ids:
            return self._ids[label]
        v = len(self.labels)
        self.labels.append(label)
        self._ids[label] = v
        self._src.append([])
        self._tgt.append([])
        self._node_first_time.append(math.inf)
        return v

    def node_id(self, label: str) -> int:
        return self._ids[str(label)]

    @property
    def num_nodes(self) -> int:
        return len(self.labels)

    def _ensure_node(self, v: int) -> None:
        while v >= len(self.labels):
            self.add_node(str(len(self.labels)))

    def hyperedge_from_labels(self, members=None, sources=None, targets=None,
                              max_size: int | None = DEFAULT_MAX_SIZE) -> Hyperedge:
        """Build a hyperedge from labels, truncating to the first ``max_size`` listed."""
        if self.directed:
            a = list(dict.fromkeys(sources))
            b = list(dict.fromkeys(targets))
            if max_size is not None and (len(a) > max_size or len(b) > max_size):
                self.truncated += 1
                a, b = a[:max_size], b[:max_size]
            return Hyperedge.directed([self.add_node(x) for x in a],
                                      [self.add_node(x) for x in b])
        m = list(dict.fromkeys(members))
        if max_size is not None and len(m) > max_size:
            self.truncated += 1
            m = m[:max_size]
        return Hyperedge.undirected(self.add_node(x) for x in m)

    # ingestion ------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.events)

    @property
    def cursor_time(self) -> float:
        return self.times[-1] if self.times else -math.inf

    def push_event(self, e: Event) -> None:
        h = e.hyperedge
        if h.is_directed != self.directed:
            raise ValueError("event variant does not match the history")
        if not math.isfinite(e.time):
            raise ValueError("event time must be finite")
        k = len(self.events)
        if self.times and e.time < self.times[-1]:
            raise OrderError(k, e.time, self.times[-1])
        if self.has_outcomes is None:
            self.has_outcomes = e.outcome is not None
        if self.has_outcomes and e.outcome is None:
            raise ValueError(f"event {k} lacks an outcome")
        if not self.has_outcomes and e.outcome is not None:
            raise ValueError(f"event {k} has an outcome but the history declares none")

        self.events.append(e)
        self.times.append(e.time)
        y = float(e.outcome) if e.outcome is not None else 0.0
        self.outcomes.append(y)
        for v in h.sources:
            self._ensure_node(v)
            self._src[v].append(k)
            self._touch(v, e.time)
        for v in h.targets or ():
            self._ensure_node(v)
            self._tgt[v].append(k)
            self._touch(v, e.time)
        ords = self._edge_ordinals.get(h)
        if ords is None:
            self._edge_ordinals[h] = [k]
            self._edge_cum_outcome[h] = [y]
            self._distinct_pos[h] = len(self._distinct)
            self._distinct.append(h)
            self._distinct_first_time.append(e.time)
        else:
            ords.append(k)
            cum = self._edge_cum_outcome[h]
            cum.append(cum[-1] + y)

    def _touch(self, v: int, time: float) -> None:
        if self._node_first_time[v] == math.inf:
            self._node_first_time[v] = time
            self._nodes_by_first.append(v)
            self._first_times_sorted.append(time)

    def extend(self, events: Iterable[Event]) -> None:
        for e in events:
            self.push_event(e)

    @classmethod
    def from_events(cls, events: Iterable[Event], directed: bool | None = None,
                    labels: Iterable[str] | None = None) -> "History":
        events = list(events)
        if directed is None:
            directed = bool(events) and events[0].hyperedge.is_directed
        hist = cls(directed=directed, labels=labels)
        hist.extend(events)
        return hist

    # queries --------------------------------------------------------------

    def cutoff(self, t: float) -> int:
        """Number of events strictly before ``t``."""
        return bisect_left(self.times, t)

    def _lists(self, h: Hyperedge) -> list[list[int]]:
        n = len(self._src)
        if h.targets is None:
            return [self._src[v] if v < n else [] for v in h.sources]
        return ([self._src[v] if v < n else [] for v in h.sources]
                + [self._tgt[v] if v < n else [] for v in h.targets])

    def superset_events(self, h: Hyperedge, t: float = math.inf) -> list[int]:
        """Ordinals of past events whose hyperedge contains ``h``.

        Sorted per-node lists are intersected smallest first.
        """
        c = self.cutoff(t)
        lists = self._lists(h)
        if not lists:
            return list(range(c))
        sized = sorted(((bisect_left(lst, c), lst) for lst in lists), key=lambda p: p[0])
        n0, base = sized[0]
        out = base[:n0]
        for n, other in sized[1:]:
            if not out:
                break
            out = _intersect_sorted(out, other, n)
        return out

    def activity(self, h: Hyperedge, t: float = math.inf) -> int:
        ords = self._edge_ordinals.get(h)
        if ords is None:
            return 0
        return bisect_left(ords, self.cutoff(t))

    def degree(self, h: Hyperedge, t: float = math.inf) -> int:
        return len(self.superset_events(h, t))

    def node_degree(self, v: int, t: float = math.inf, role: str = "source") -> int:
        lst = self._tgt[v] if role == "target" else self._src[v]
        return bisect_left(lst, self.cutoff(t))

    def intersection_profile(self, h: Hyperedge, t: float = math.inf) -> list[tuple]:
        """Past events sharing at least one node with ``h``.

        Returns ``(ordinal, overlap, outcome)`` tuples sorted by ordinal, where
        overlap is ``|h & h_e|`` or, for directed hyperedges, the pair of
        source-side and target-side overlaps.
        """
        c = self.cutoff(t)
        if h.targets is None:
            counts = Counter()
            for v in h.sources:
                lst = self._src[v] if v < len(self._src) else []
                counts.update(lst[:bisect_left(lst, c)])
            return [(k, counts[k], self.outcomes[k]) for k in sorted(counts)]
        src, tgt = Counter(), Counter()
        for v in h.sources:
            lst = self._src[v] if v < len(self._src) else []
            src.update(lst[:bisect_left(lst, c)])
        for v in h.targets:
            lst = self._tgt[v] if v < len(self._tgt) else []
            tgt.update(lst[:bisect_left(lst, c)])
        keys = sorted(set(src) | set(tgt))
        return [(k, (src[k], tgt[k]), self.outcomes[k]) for k in keys]

    def _require_outcomes(self) -> None:
        if not self.has_outcomes:
            raise OutcomesUnavailable()

    def hyperedge_performance(self, h: Hyperedge, t: float = math.inf) -> float:
        self._require_outcomes()
        ords = self._edge_ordinals.get(h)
        if ords is None:
            return 0.0
        i = bisect_left(ords, self.cutoff(t))
        return self._edge_cum_outcome[h][i - 1] if i else 0.0

    def sub_hyperedge_performance(self, h: Hyperedge, t: float = math.inf) -> float:
        self._require_outcomes()
        return math.fsum(self.outcomes[k] for k in self.superset_events(h, t))

    def distinct_hyperedges(self, t: float = math.inf) -> list[Hyperedge]:
        """Distinct hyperedges with at least one event before ``t``, in order of first use."""
        return self._distinct[:bisect_left(self._distinct_first_time, t)]

    def num_distinct(self, t: float = math.inf) -> int:
        return bisect_left(self._distinct_first_time, t)

    def distinct_at(self, i: int) -> Hyperedge:
        return self._distinct[i]

    def first_use_index(self, h: Hyperedge) -> int | None:
        """Position of ``h`` in the first-use order, or None if never seen."""
        return self._distinct_pos.get(h)

    def active_nodes(self, t: float = math.inf, inclusive: bool = True) -> list[int]:
        """Nodes participating in some event at (or, if not inclusive, strictly) before t."""
        bis = bisect_right if inclusive else bisect_left
        return self._nodes_by_first[:bis(self._first_times_sorted, t)]

    def num_active(self, t: float = math.inf, inclusive: bool = True) -> int:
        bis = bisect_right if inclusive else bisect_left
        return bis(self._first_times_sorted, t)


# flat-file interface ------------------------------------------------------

def _opt_float(s: str | None) -> float | None:
    if s is None:
        return None
    s = s.strip()
    return float(s) if s else None


def read_events(path, directed: bool = False, max_size: int | None = DEFAULT_MAX_SIZE,
                labels: Iterable[str] | None = None) -> History:
    """Load a delimiter-separated event log into a :class:`History`.

    Undirected logs have the header ``time,members,weight,outcome`` and
    directed logs ``time,sources,targets,weight,outcome``; member lists are
    ``;``-separated labels and empty fields mean absent.  An optional
    ``type`` column is carried through as the event type.
    """
    hist = History(directed=directed, labels=labels)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = ["time", "sources", "targets"] if directed else ["time", "members"]
        missing = [c for c in need if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                time = float(row["time"])
                if directed:
                    h = hist.hyperedge_from_labels(
                        sources=[x for x in row["sources"].split(";") if x],
                        targets=[x for x in row["targets"].split(";") if x],
                        max_size=max_size)
                else:
                    h = hist.hyperedge_from_labels(
                        members=[x for x in row["members"].split(";") if x],
                        max_size=max_size)
                etype = (row.get("type") or "").strip() or None
                hist.push_event(Event(h, time, etype, _opt_float(row.get("weight")),
                                      _opt_float(row.get("outcome"))))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    if hist.truncated:
        log.warning("%d event(s) truncated to %s participants", hist.truncated, max_size)
    return hist


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def write_events(path, events: Sequence[Event], labels: Sequence[str] | None = None,
                 directed: bool | None = None) -> None:
    """Write events in the flat event-log format read by :func:`read_events`."""
    if directed is None:
        directed = bool(events) and events[0].hyperedge.is_directed

    def name(v):
        return labels[v] if labels is not None else str(v)

    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time", "sources", "targets", "weight", "outcome"] if directed
                   else ["time", "members", "weight", "outcome"])
        for e in events:
            h = e.hyperedge
            if directed:
                row = [repr(float(e.time)), ";".join(map(name, h.sources)),
                       ";".join(map(name, h.targets))]
            else:
                row = [repr(float(e.time)), ";".join(map(name, h.sources))]
            w.writerow(row + [_fmt(e.weight), _fmt(e.outcome)])
