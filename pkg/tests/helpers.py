"""Fixtures shared by several test modules."""

from __future__ import annotations

import numpy as np

from rhem.hyperstore import Event, History, Hyperedge

GROUP_LABELS = [f"{x}{i}" for i in (1, 2, 3) for x in "ABC"]


def three_groups() -> History:
    """Three triads with different collaboration histories.

    Group 1: every member wrote two single-author papers.  Group 2: the
    three pairs co-authored one paper each.  Group 3: one joint paper plus
    one single-author paper per member.  Events at times 1..13.
    """
    hist = History(labels=GROUP_LABELS)
    g = {lab: hist.node_id(lab) for lab in GROUP_LABELS}
    papers = [["A1"], ["A1"], ["B1"], ["B1"], ["C1"], ["C1"],
              ["A2", "B2"], ["A2", "C2"], ["B2", "C2"],
              ["A3", "B3", "C3"], ["A3"], ["B3"], ["C3"]]
    for t, authors in enumerate(papers, start=1):
        hist.push_event(Event(Hyperedge.undirected(g[a] for a in authors), float(t)))
    return hist


def triad(hist: History, i: int) -> Hyperedge:
    return Hyperedge.undirected(hist.node_id(f"{x}{i}") for x in "ABC")


def _subset(rng, n, lo=1, hi=None):
    hi = n if hi is None else min(hi, n)
    k = int(rng.integers(lo, hi + 1))
    return tuple(sorted(rng.choice(n, size=k, replace=False).tolist()))


def random_instance(rng: np.random.Generator, directed: bool | None = None,
                    max_nodes: int = 8, max_events: int = 25):
    """Random small history plus a focal hyperedge and query time.

    Returns ``(history, oracle_events, h, t, n)`` where ``oracle_events`` are
    ``(A, B, time, outcome)`` tuples for the brute-force reference.  Event
    times are small integers, so ties are common.  Directed focal
    hyperedges are loopless; past directed events may contain loops.
    """
    if directed is None:
        directed = bool(rng.integers(2))
    n = int(rng.integers(3, max_nodes + 1))
    n_ev = int(rng.integers(0, max_events + 1))
    times = np.sort(rng.integers(1, 11, size=n_ev)).astype(float)
    hist = History(directed=directed, labels=[str(v) for v in range(n)], outcomes=True)
    oracle = []
    for tm in times:
        y = float(np.round(rng.normal(), 3))
        if directed:
            a, b = _subset(rng, n, hi=4), _subset(rng, n, hi=4)
            hist.push_event(Event(Hyperedge.directed(a, b), tm, outcome=y))
            oracle.append((frozenset(a), frozenset(b), tm, y))
        else:
            a = _subset(rng, n, hi=5)
            hist.push_event(Event(Hyperedge.undirected(a), tm, outcome=y))
            oracle.append((frozenset(a), None, tm, y))
    t = float(rng.integers(1, 12))
    if directed:
        perm = rng.permutation(n).tolist()
        ka = int(rng.integers(1, min(3, n - 1) + 1))
        kb = int(rng.integers(1, min(3, n - ka) + 1))
        h = Hyperedge.directed(perm[:ka], perm[ka:ka + kb])
    else:
        h = Hyperedge.undirected(_subset(rng, n, hi=5))
    return hist, oracle, h, t, n
