import math
from itertools import combinations

import numpy as np
import pytest

import oracle
from helpers import random_instance, three_groups, triad
from rhem.hyperstore import (Event, History, Hyperedge, OrderError, OutcomesUnavailable,
                             read_events, write_events)


def ids(hist, *labels):
    return Hyperedge.undirected(hist.node_id(x) for x in labels)


class TestHyperedge:
    def test_canonical_form(self):
        assert Hyperedge.undirected([3, 1, 3]) == Hyperedge.undirected([1, 3])
        assert Hyperedge.undirected([3, 1]).sources == (1, 3)
        assert Hyperedge.directed([2, 1], [0]).size == (2, 1)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            Hyperedge.undirected([])
        with pytest.raises(ValueError):
            Hyperedge.directed([1], [])

    def test_loops_and_reversal(self):
        h = Hyperedge.directed([0, 1], [1, 2])
        assert h.is_loop
        assert h.reversed() == Hyperedge.directed([1, 2], [0, 1])
        assert not Hyperedge.directed([0], [1]).is_loop

    def test_subset(self):
        assert Hyperedge.undirected([1]).issubset(Hyperedge.undirected([0, 1]))
        assert Hyperedge.directed([0], [2]).issubset(Hyperedge.directed([0, 1], [2, 3]))
        assert not Hyperedge.directed([2], [0]).issubset(Hyperedge.directed([0, 1], [2, 3]))


class TestPush:
    def test_order_contract(self):
        hist = History()
        for t in (1.0, 1.0, 2.0):
            hist.push_event(Event(Hyperedge.undirected([0]), t))
        with pytest.raises(OrderError) as exc:
            hist.push_event(Event(Hyperedge.undirected([0]), 1.5))
        assert exc.value.ordinal == 3
        assert len(hist) == 3

    def test_single_event(self):
        hist = History()
        hist.push_event(Event(Hyperedge.undirected([0, 1]), 0.0))
        assert len(hist) == 1 and hist.num_nodes == 2

    def test_non_finite_time_rejected(self):
        with pytest.raises(ValueError):
            History().push_event(Event(Hyperedge.undirected([0]), math.nan))

    def test_outcome_consistency(self):
        hist = History(outcomes=True)
        with pytest.raises(ValueError):
            hist.push_event(Event(Hyperedge.undirected([0]), 1.0))
        plain = History(outcomes=False)
        with pytest.raises(ValueError):
            plain.push_event(Event(Hyperedge.undirected([0]), 1.0, outcome=2.0))

    def test_variant_consistency(self):
        with pytest.raises(ValueError):
            History(directed=True).push_event(Event(Hyperedge.undirected([0]), 1.0))


class TestQueries:
    def test_activity(self, groups):
        assert groups.activity(triad(groups, 3)) == 1
        assert groups.activity(triad(groups, 2)) == 0
        assert History().activity(Hyperedge.undirected([0])) == 0

    def test_degree(self, groups):
        assert groups.degree(ids(groups, "A2", "B2")) == 1
        assert groups.degree(ids(groups, "A1")) == 2
        assert groups.degree(ids(groups, "A1", "B1")) == 0

    def test_intersection_profile(self, groups):
        prof = groups.intersection_profile(triad(groups, 2))
        assert [k for _, k, _ in prof] == [2, 2, 2]
        assert History().intersection_profile(Hyperedge.undirected([0])) == []
        assert groups.intersection_profile(Hyperedge.undirected([99])) == []

    def test_strictly_before(self, groups):
        assert groups.degree(ids(groups, "A1"), 2.0) == 1
        assert groups.degree(ids(groups, "A1"), 1.0) == 0

    def test_simultaneity_invariance(self):
        evs = [([0, 1], 1.0), ([1, 2], 1.0), ([0, 1], 1.0), ([0], 2.0), ([2], 2.0)]
        a = History.from_events(Event(Hyperedge.undirected(m), t) for m, t in evs)
        b = History.from_events(Event(Hyperedge.undirected(m), t)
                                for m, t in [evs[2], evs[0], evs[1], evs[4], evs[3]])
        for t in (1.0, 1.5, 2.0, 3.0):
            for h in ([0], [1], [0, 1], [1, 2], [2]):
                e = Hyperedge.undirected(h)
                assert a.degree(e, t) == b.degree(e, t)
                assert a.activity(e, t) == b.activity(e, t)

    def test_directed_degree_is_componentwise(self):
        hist = History(directed=True)
        hist.push_event(Event(Hyperedge.directed([0, 1], [2, 3]), 1.0))
        assert hist.degree(Hyperedge.directed([0], [3])) == 1
        assert hist.degree(Hyperedge.directed([2], [0])) == 0
        prof = hist.intersection_profile(Hyperedge.directed([1, 4], [0]))
        assert [(k, ov) for k, ov, _ in prof] == [(0, (1, 0))]


class TestPerformance:
    def make(self):
        hist = History(outcomes=True)
        for m, t, y in [([0, 1], 1.0, 2.0), ([0, 1], 2.0, -1.0), ([0, 1, 2], 3.0, 3.0)]:
            hist.push_event(Event(Hyperedge.undirected(m), t, outcome=y))
        return hist

    def test_sums(self):
        hist = self.make()
        assert hist.hyperedge_performance(Hyperedge.undirected([0, 1])) == 1.0
        assert hist.sub_hyperedge_performance(Hyperedge.undirected([0, 1])) == 4.0
        assert hist.hyperedge_performance(Hyperedge.undirected([1, 2])) == 0.0
        assert hist.sub_hyperedge_performance(Hyperedge.undirected([1, 2])) == 3.0

    def test_outcomes_required(self, groups):
        with pytest.raises(OutcomesUnavailable, match="outcomes not available"):
            groups.hyperedge_performance(triad(groups, 1))


class TestAgainstScan:
    """Index queries equal direct scans of the raw event list."""

    @pytest.mark.parametrize("seed", range(30))
    def test_random(self, seed):
        rng = np.random.default_rng(500 + seed)
        hist, events, _, _, n = random_instance(rng, max_nodes=6, max_events=20)
        for t in (1.0, 4.5, 7.0, math.inf):
            for _ in range(10):
                k = int(rng.integers(1, n + 1))
                A = sorted(rng.choice(n, size=k, replace=False).tolist())
                if hist.directed:
                    B = sorted(rng.choice(n, size=int(rng.integers(1, n + 1)),
                                          replace=False).tolist())
                    h = Hyperedge.directed(A, B)
                else:
                    B = None
                    h = Hyperedge.undirected(A)
                assert hist.degree(h, t) == oracle.degree(events, t, A, B)
                assert hist.activity(h, t) == oracle.activity(events, t, A, B)
                assert hist.activity(h, t) <= hist.degree(h, t)
                perf = sum(y for a, b, te, y in events
                           if te < t and set(A) <= a and (B is None or set(B) <= b))
                assert hist.sub_hyperedge_performance(h, t) == pytest.approx(perf)
                if B is None:
                    for p in range(1, len(A) + 1):
                        lhs = sum(hist.degree(Hyperedge.undirected(s), t)
                                  for s in combinations(A, p))
                        rhs = sum(math.comb(len(a & set(A)), p)
                                  for a, _, te, _ in events if te < t)
                        assert lhs == rhs
                    sup = Hyperedge.undirected(A + [v for v in range(n) if v not in A][:1])
                    assert hist.degree(sup, t) <= hist.degree(h, t)

    def test_node_degree(self, groups):
        for lab in groups.labels:
            v = groups.node_id(lab)
            assert groups.node_degree(v) == groups.degree(Hyperedge.undirected([v]))


class TestDistinctAndActive:
    def test_distinct(self, groups):
        assert groups.num_distinct() == 10
        assert groups.num_distinct(2.0) == 1
        assert groups.first_use_index(triad(groups, 3)) == 6
        assert groups.first_use_index(triad(groups, 1)) is None

    def test_active_nodes(self, groups):
        assert groups.num_active(1.0) == 1
        assert groups.num_active(1.0, inclusive=False) == 0
        assert groups.num_active() == 9


class TestFiles:
    def test_roundtrip_undirected(self, tmp_path, groups):
        p = tmp_path / "ev.csv"
        write_events(p, groups.events, groups.labels)
        back = read_events(p)
        assert [e.hyperedge.members for e in back.events] == \
            [tuple(back.node_id(groups.labels[v]) for v in e.hyperedge.members)
             for e in groups.events]
        assert back.activity(ids(back, "A3", "B3", "C3")) == 1

    def test_directed_file(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,sources,targets,weight,outcome\n1,alice,bob;carol,,12.5\n"
                     "2,bob,alice,0.5,-1\n")
        hist = read_events(p, directed=True)
        assert hist.events[0].outcome == 12.5 and hist.events[1].weight == 0.5
        bob, alice = hist.node_id("bob"), hist.node_id("alice")
        assert hist.activity(Hyperedge.directed([bob], [alice])) == 1

    def test_truncation(self, tmp_path):
        p = tmp_path / "big.csv"
        p.write_text("time,members,weight,outcome\n1," + ";".join(f"n{i}" for i in range(8))
                     + ",,\n")
        hist = read_events(p, max_size=5)
        assert hist.truncated == 1
        assert hist.events[0].hyperedge.size == 5
        assert [hist.labels[v] for v in hist.events[0].hyperedge.members] == \
            ["n0", "n1", "n2", "n3", "n4"]

    def test_out_of_order_file(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("time,members,weight,outcome\n2,a,,\n1,b,,\n")
        with pytest.raises(ValueError, match=":3"):
            read_events(p)

    def test_partial_outcomes_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("time,members,weight,outcome\n1,a,,3\n2,b,,\n")
        with pytest.raises(ValueError, match="lacks an outcome"):
            read_events(p)

    def test_missing_column(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("time,who\n1,a\n")
        with pytest.raises(ValueError, match="members"):
            read_events(p)
