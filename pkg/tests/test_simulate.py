import math
from collections import Counter
from itertools import combinations

import numpy as np
import pytest
from scipy import stats

from rhem.hyperstore import History, Hyperedge
from rhem.simulate import (OutcomeModel, SimConfig, SimulationError, make_coauthor_like,
                           make_meeting_like, simulate, size_histogram, softmax_choice)
from rhem.statistics import parse_spec


class TestSelection:
    def test_zero_theta_uniform(self):
        cfg = SimConfig(6, 10_000, [parse_spec("size")], [0.0], "conditional_size",
                        sizes=[2], seed=1)
        counts = Counter(e.hyperedge for e in simulate(cfg))
        obs = [counts[Hyperedge.undirected(c)] for c in combinations(range(6), 2)]
        assert stats.chisquare(obs).pvalue > 0.01

    def test_repetition_odds(self):
        """Two singleton candidates, one used once before: odds e^3 to 1."""
        spec = [parse_spec("repetition")]
        same = 0
        n = 3000
        for seed in range(n):
            ev = simulate(SimConfig(2, 2, spec, [3.0], "conditional_size", sizes=[1], seed=seed))
            same += ev[0].hyperedge == ev[1].hyperedge
        odds = same / (n - same)
        assert odds == pytest.approx(math.exp(3.0), rel=0.10)

    def test_softmax_frequencies(self):
        rng = np.random.default_rng(2)
        scores = np.array([0.5, -1.0, 1.2])
        p = np.exp(scores) / np.exp(scores).sum()
        n = 20_000
        freq = np.bincount([softmax_choice(rng, scores) for _ in range(n)], minlength=3) / n
        assert np.all(np.abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / n))

    def test_overflow(self):
        with pytest.raises(SimulationError, match="standardize"):
            softmax_choice(np.random.default_rng(0), np.array([np.inf, 0.0]))
        cfg = SimConfig(4, 5, [parse_spec("size")], [1e308 * 10], "full")
        with pytest.raises(SimulationError):
            simulate(cfg)


class TestConfig:
    def test_validation(self):
        spec = [parse_spec("size")]
        with pytest.raises(ValueError):
            SimConfig(5, 10, spec, [1.0, 2.0])
        with pytest.raises(ValueError):
            SimConfig(21, 10, spec, [1.0], "full")
        with pytest.raises(ValueError):
            SimConfig(5, 10, spec, [1.0], "conditional_size", sizes=[2], epsilon=1.5)
        with pytest.raises(ValueError):
            SimConfig(5, 10, spec, [1.0], "conditional_size")
        with pytest.raises(ValueError):
            SimConfig(5, 10, spec, [1.0], "bogus")


class TestStreams:
    def test_ingestible_and_ordinal_times(self):
        cfg = SimConfig(8, 200, [parse_spec("subrep(1)"), parse_spec("repetition")], [0.5, 1.0],
                        "repeated_plus_innovation", sizes=[1, 2, 3], epsilon=0.3, seed=3)
        ev = simulate(cfg)
        assert [e.time for e in ev] == [float(t) for t in range(1, 201)]
        hist = History.from_events(ev)
        assert len(hist) == 200 and hist.num_distinct() < 200

    def test_repeated_plus_innovation_only_repeats_at_zero_epsilon(self):
        cfg = SimConfig(8, 50, [parse_spec("repetition")], [1.0], "repeated_plus_innovation",
                        sizes=[2], epsilon=0.0, seed=4)
        ev = simulate(cfg)
        assert len({e.hyperedge for e in ev}) == 1

    def test_outcomes(self):
        om = OutcomeModel(2.0, [1.0], noise_sd=0.0)
        cfg = SimConfig(6, 30, [parse_spec("size")], [0.0], "conditional_size", sizes=[1, 3],
                        outcome_model=om, seed=5)
        for e in simulate(cfg):
            assert e.outcome == 2.0 + e.hyperedge.size

    def test_deterministic(self):
        cfg = SimConfig(6, 40, [parse_spec("subrep(1)")], [0.5], "full", seed=6)
        assert simulate(cfg) == simulate(cfg)

    def test_full_recovery_sign(self):
        from rhem.estimate import fit_cox
        from rhem.sampling import RiskSetPolicy, build_strata
        specs = [parse_spec("subrep(1)"), parse_spec("size")]
        ev = simulate(SimConfig(6, 400, specs, [1.0, -0.5], "full", seed=7))
        fit = fit_cox(build_strata(ev, RiskSetPolicy("full", node_pool="roster"), specs))
        assert fit.theta[0] > 0 and fit.theta[1] < 0
        assert np.all(np.abs(fit.theta - [1.0, -0.5]) < 3 * fit.std_errors)


class TestMeetingLike:
    def test_shape(self):
        ev = make_meeting_like(0)
        hist = History.from_events(ev)
        assert len(ev) == 886 and hist.num_nodes == 23
        sizes = size_histogram(ev)
        assert sizes[1] / len(ev) >= 0.40
        assert sum(c for k, c in sizes.items() if k >= 18) / len(ev) >= 0.15

    def test_seed(self):
        assert make_meeting_like(4) == make_meeting_like(4)
        assert make_meeting_like(4) != make_meeting_like(5)


class TestCoauthorLike:
    def test_small(self):
        ev = make_coauthor_like(n_nodes=2000, n_events=3000, events_per_time=100, seed=1)
        sizes = np.array([e.hyperedge.size for e in ev])
        assert abs(sizes.mean() - 8.0) < 0.5
        hist = History.from_events(ev)
        assert hist.has_outcomes and len(hist) == 3000
        assert hist.num_distinct() < 3000
