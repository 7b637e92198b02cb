"""Relational hyperevent models: history indexes, statistics, risk-set sampling and estimation."""

from .estimate import (EstimationError, ModelFit, ReplicatedFit, RomFit, SeparationError,
                       SingularInformationError, fit_cox, fit_replicated, fit_rom,
                       log_likelihood, rank_by_aic)
from .hyperstore import Event, History, Hyperedge, read_events, write_events
from .sampling import RiskSetPolicy, Stratum, StrataSet, build_strata
from .simulate import SimConfig, make_meeting_like, simulate
from .statistics import CovariateTable, StatisticSpec, eval, eval_batch, parse_spec

__version__ = "0.1.0"
