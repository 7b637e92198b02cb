"""Sampled Cox partial likelihood, Newton-Raphson fitting and outcome regression."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats as sps

from .hyperstore import Event, History
from .sampling import RiskSetPolicy, StrataSet, Stratum, build_strata
from .statistics import CovariateTable, StatisticSpec, eval_batch

log = logging.getLogger(__name__)


class EstimationError(RuntimeError):
    pass


class SeparationError(EstimationError):
    pass


class SingularInformationError(EstimationError):
    pass


class IncomparableModelsError(ValueError):
    pass


def stars(p: float) -> str:
    if not np.isfinite(p):
        return ""
    return "***" if p < 0.001 else "**" if p < 0.01 else "*" if p < 0.05 else ""


# likelihood ---------------------------------------------------------------

class StrataDesign:
    """Strata flattened into one array of rows centered on each stratum's case.

    Row ``r`` of ``diff`` holds ``s_row - s_case``; the case itself is the
    zero row at the start of every segment.
    """

    def __init__(self, strata: Iterable[Stratum], labels: Sequence[str] | None = None):
        strata = list(strata)
        if not strata:
            raise EstimationError("no strata to fit")
        blocks, starts = [], []
        r = 0
        k = None
        for s in strata:
            x = np.asarray(s.statistics, dtype=float)
            if k is None:
                k = x.shape[1]
            if x.shape[0] < 2:
                raise EstimationError(f"stratum of event {s.event_ordinal} has no controls")
            bad = ~np.isfinite(x)
            if bad.any():
                j = int(np.argwhere(bad)[0][1])
                name = labels[j] if labels is not None else f"column {j}"
                raise EstimationError(
                    f"non-finite statistic in stratum of event {s.event_ordinal} ({name})")
            blocks.append(x - x[0])
            starts.append(r)
            r += x.shape[0]
        self.diff = np.vstack(blocks)
        self.starts = np.asarray(starts)
        self.n_strata = len(strata)
        self.n_rows = r
        self.k = k
        self.seg = np.repeat(np.arange(self.n_strata), np.diff(np.append(self.starts, r)))

    def evaluate(self, theta, need_hessian: bool = True):
        theta = np.asarray(theta, dtype=float)
        eta = self.diff @ theta
        mx = np.maximum.reduceat(eta, self.starts)
        e = np.exp(eta - mx[self.seg])
        tot = np.add.reduceat(e, self.starts)
        value = -float(np.sum(mx + np.log(tot)))
        if need_hessian is None:
            return value, None, None
        w = e / tot[self.seg]
        wd = self.diff * w[:, None]
        m = np.add.reduceat(wd, self.starts, axis=0)
        grad = -m.sum(axis=0)
        if not need_hessian:
            return value, grad, None
        hess = -(self.diff.T @ wd - m.T @ m)
        return value, grad, hess


def _design(strata, labels=None) -> StrataDesign:
    if isinstance(strata, StrataDesign):
        return strata
    if isinstance(strata, StrataSet):
        labels = labels or [s.label for s in strata.specs]
    return StrataDesign(strata, labels)


def log_likelihood(strata, theta):
    """Sampled log partial likelihood with its exact gradient and Hessian.

    ``value = sum_s [s_case . theta - log sum_rows exp(s_row . theta)]``.
    """
    return _design(strata).evaluate(theta)


# Cox fit ------------------------------------------------------------------

@dataclass
class ModelFit:
    labels: list[str]
    theta: np.ndarray
    std_errors: np.ndarray
    z: np.ndarray
    p_values: np.ndarray
    log_likelihood: float
    aic: float
    iterations: int
    converged: bool
    n_events: int
    n_observations: int
    policy_tag: str = ""
    warnings: list[str] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.theta)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "theta": [float(x) for x in self.theta],
            "std_errors": [float(x) for x in self.std_errors],
            "z": [float(x) for x in self.z],
            "p_values": [float(x) for x in self.p_values],
            "log_likelihood": float(self.log_likelihood),
            "aic": float(self.aic) if np.isfinite(self.aic) else None,
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "n_events": int(self.n_events),
            "n_observations": int(self.n_observations),
            "policy": self.policy_tag,
            "warnings": list(self.warnings),
        }

    def summary(self) -> str:
        return format_table([self])


def aic(log_lik: float, k: int) -> float:
    return 2.0 * k - 2.0 * log_lik


def fit_cox(strata, labels: Sequence[str] | None = None, max_iter: int = 100,
            gtol: float = 1e-8, ftol: float = 1e-12, separation_threshold: float = 20.0,
            policy_tag: str | None = None) -> ModelFit:
    """Maximize the sampled partial likelihood by Newton-Raphson from zero.

    Steps are halved until the log-likelihood does not decrease.  Iteration
    stops when the gradient max-norm drops below ``gtol`` or the relative
    change of the log-likelihood below ``ftol``.

    Raises
    ------
    SingularInformationError
        If the information matrix is rank deficient, e.g. a statistic is
        constant within every stratum.
    SeparationError
        If a coefficient exceeds ``separation_threshold`` in absolute value
        while the likelihood is still improving.
    """
    if isinstance(strata, StrataSet):
        labels = labels or [s.label for s in strata.specs]
        policy_tag = policy_tag if policy_tag is not None else strata.policy.tag
    d = _design(strata, labels)
    labels = list(labels) if labels is not None else [f"x{j}" for j in range(d.k)]
    if len(labels) != d.k:
        raise ValueError("labels do not match the number of statistics")

    theta = np.zeros(d.k)
    f, g, H = d.evaluate(theta)
    info = -H
    ev = np.linalg.eigvalsh(info)
    if ev[0] <= max(ev[-1], 1e-300) * 1e-10:
        flat = [labels[j] for j in range(d.k) if not np.any(d.diff[:, j])]
        hint = f" (constant within all strata: {', '.join(flat)})" if flat else ""
        raise SingularInformationError("singular information matrix" + hint)

    converged = False
    it = 0
    while it < max_iter:
        try:
            step = np.linalg.solve(-H, g)
        except np.linalg.LinAlgError:
            raise SingularInformationError("singular information matrix during iteration") \
                from None
        # Under separation the gradient vanishes while Newton steps stay of
        # order one, so a small gradient alone does not signal convergence.
        small_step = np.max(np.abs(step)) <= 1e-6 * (1.0 + np.max(np.abs(theta)))
        if small_step and np.max(np.abs(g)) < gtol:
            converged = True
            break
        t = 1.0
        while True:
            cand = theta + t * step
            fn = d.evaluate(cand, need_hessian=None)[0]
            if fn >= f or t < 1e-10:
                break
            t *= 0.5
        if np.max(np.abs(cand)) > separation_threshold and fn >= f:
            j = int(np.argmax(np.abs(cand)))
            raise SeparationError(
                f"separation detected: {labels[j]} reached {cand[j]:.3g} with the "
                "likelihood still improving (the estimate diverges)")
        if fn < f:
            # no ascent along the Newton direction: at the optimum up to rounding
            converged = np.max(np.abs(g)) < 1e-6 * max(1.0, abs(f))
            break
        it += 1
        f_old = f
        theta = cand
        f, g, H = d.evaluate(theta)
        if small_step and abs(f - f_old) <= ftol * abs(f_old):
            converged = True
            break

    info = -H
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        raise SingularInformationError("singular information matrix at the optimum") from None
    se = np.sqrt(np.clip(np.diag(cov), 0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = theta / se
    p = 2.0 * sps.norm.sf(np.abs(z))
    notes = []
    if not converged:
        notes.append(f"no convergence after {it} iterations")
    n_events = d.n_strata
    return ModelFit(labels, theta, se, z, p, f, aic(f, d.k) if converged else math.nan,
                    it, converged, n_events, d.n_rows, policy_tag or "", notes)


def rank_by_aic(fits: Sequence[ModelFit]) -> list[ModelFit]:
    """Order fits by AIC; only fits estimated under the same risk-set policy compare."""
    tags = {f.policy_tag for f in fits}
    if len(tags) > 1:
        raise IncomparableModelsError(
            "AIC values from different risk-set policies are not comparable: "
            + ", ".join(sorted(tags)))
    return sorted(fits, key=lambda f: (not np.isfinite(f.aic), f.aic))


# replications -------------------------------------------------------------

@dataclass
class ReplicatedFit:
    fits: list[ModelFit | None]
    errors: list[str | None]
    labels: list[str]
    strata_info: list[dict] = field(default_factory=list)

    @property
    def successes(self) -> list[ModelFit]:
        return [f for f in self.fits if f is not None]

    def summary(self, alpha: float = 0.05) -> dict:
        """Per-parameter mean, sd and sign agreement over successful replications.

        ``sign_consistency`` is the share of replications with the majority
        sign; ``stable`` holds when every replication is significant at
        ``alpha`` with the same sign.
        """
        ok = self.successes
        out = {}
        if not ok:
            return out
        th = np.array([f.theta for f in ok])
        pv = np.array([f.p_values for f in ok])
        for j, name in enumerate(self.labels):
            x = th[:, j]
            pos, neg = int(np.sum(x > 0)), int(np.sum(x < 0))
            out[name] = {
                "mean": float(x.mean()),
                "sd": float(x.std(ddof=1)) if len(x) > 1 else 0.0,
                "positive": pos,
                "negative": neg,
                "sign_consistency": max(pos, neg) / len(x),
                "significant": int(np.sum(pv[:, j] < alpha)),
                "stable": bool((pos == len(x) or neg == len(x)) and np.all(pv[:, j] < alpha)),
            }
        return out

    def to_dict(self) -> dict:
        return {
            "replications": [f.to_dict() if f is not None else {"error": e}
                             for f, e in zip(self.fits, self.errors)],
            "strata": self.strata_info,
            "summary": self.summary(),
        }


def fit_replicated(events, policy: RiskSetPolicy, specs: Sequence[StatisticSpec], R: int = 10,
                   seed: int = 0, covariates: CovariateTable | None = None, n_jobs: int = 1,
                   **fit_options) -> ReplicatedFit:
    """Fit the model on ``R`` independently sampled sets of controls."""
    if R < 1:
        raise ValueError("R must be at least 1")
    history = events if isinstance(events, History) else History.from_events(events)
    specs = list(specs)
    labels = [s.label for s in specs]
    fits, errors, info = [], [], []
    for r in range(R):
        strata = build_strata(history, policy, specs, r, seed, covariates, n_jobs)
        info.append({"replication": r, "n_strata": len(strata), "dropped": strata.dropped,
                     "underfilled": strata.underfilled, "skipped": strata.skipped})
        try:
            fits.append(fit_cox(strata, labels, **fit_options))
            errors.append(None)
        except EstimationError as exc:
            log.warning("replication %d failed: %s", r, exc)
            fits.append(None)
            errors.append(str(exc))
    return ReplicatedFit(fits, errors, labels, info)


# relational outcome model -------------------------------------------------

@dataclass
class RomFit:
    labels: list[str]
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_values: np.ndarray
    p_values: np.ndarray
    residual_variance: float
    r_squared: float
    adj_r_squared: float
    rmse: float
    n_obs: int
    dropped: list[str] = field(default_factory=list)
    split: str = "all"

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "coefficients": [float(x) for x in self.coefficients],
            "std_errors": [float(x) for x in self.std_errors],
            "t": [float(x) for x in self.t_values],
            "p_values": [float(x) for x in self.p_values],
            "residual_variance": float(self.residual_variance),
            "r_squared": float(self.r_squared),
            "adj_r_squared": float(self.adj_r_squared),
            "rmse": float(self.rmse),
            "n_obs": int(self.n_obs),
            "dropped": list(self.dropped),
            "split": self.split,
        }


def ols(X: np.ndarray, y: np.ndarray, labels: Sequence[str] | None = None,
        tol: float = 1e-10) -> RomFit:
    """Least squares with normal errors; X must contain the intercept column.

    Columns that are linear combinations of earlier columns are dropped,
    left to right, with a warning.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    labels = list(labels) if labels is not None else [f"x{j}" for j in range(p)]
    keep, dropped = [], []
    scale = np.linalg.norm(X, axis=0)
    for j in range(p):
        trial = keep + [j]
        Z = X[:, trial] / np.where(scale[trial] > 0, scale[trial], 1.0)
        if scale[j] > 0 and np.linalg.matrix_rank(Z, tol=tol * max(1, n) ** 0.5) == len(trial):
            keep.append(j)
        else:
            dropped.append(labels[j])
    if dropped:
        warnings.warn(f"collinear column(s) dropped: {', '.join(dropped)}", RuntimeWarning,
                      stacklevel=2)
    Xk = X[:, keep]
    beta, *_ = np.linalg.lstsq(Xk, y, rcond=None)
    resid = y - Xk @ beta
    rss = float(resid @ resid)
    df = n - len(keep)
    sigma2 = rss / df if df > 0 else math.nan
    xtx_inv = np.linalg.inv(Xk.T @ Xk)
    se = np.sqrt(np.clip(np.diag(xtx_inv) * sigma2, 0, None)) if df > 0 else \
        np.full(len(keep), math.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        tv = beta / se
    pv = 2.0 * sps.t.sf(np.abs(tv), df) if df > 0 else np.full(len(keep), math.nan)
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = min(max(1.0 - rss / tss, 0.0), 1.0) if tss > 0 else 0.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / df if df > 0 else math.nan
    return RomFit([labels[j] for j in keep], beta, se, tv, pv, sigma2, r2, adj,
                  math.sqrt(sigma2) if df > 0 else 0.0, n, dropped)


def split_events(history: History) -> dict[str, list[int]]:
    """Ordinals of first events (no prior event on the exact hyperedge) and repeated events."""
    first, repeated = [], []
    for i, e in enumerate(history.events):
        (repeated if history.activity(e.hyperedge, e.time) > 0 else first).append(i)
    return {"first": first, "repeated": repeated, "all": list(range(len(history)))}


def rom_design(history: History, specs: Sequence[StatisticSpec], split: str = "all",
               covariates: CovariateTable | None = None):
    """Design matrix (with intercept) and outcomes of the events in ``split``."""
    history._require_outcomes()
    if split not in ("all", "first", "repeated"):
        raise ValueError(f"unknown split {split!r}")
    idx = split_events(history)[split]
    specs = list(specs)
    X = np.ones((len(idx), 1 + len(specs)))
    for r, i in enumerate(idx):
        e = history.events[i]
        if specs:
            X[r, 1:] = eval_batch(specs, history, [e.hyperedge], e.time, covariates)[0]
    y = np.array([history.outcomes[i] for i in idx])
    return X, y, idx


def fit_rom(events, specs: Sequence[StatisticSpec], split: str = "all",
            covariates: CovariateTable | None = None) -> RomFit:
    """Regress event outcomes on statistics of the event's own hyperedge.

    Statistics are evaluated against the events strictly before each event,
    outcomes are assumed conditionally independent given that history and
    normally distributed, which makes the fit ordinary least squares.
    """
    history = events if isinstance(events, History) else History.from_events(events)
    X, y, _ = rom_design(history, specs, split, covariates)
    if len(y) == 0:
        raise EstimationError(f"no {split} events with outcomes")
    fit = ols(X, y, ["(Intercept)"] + [s.label for s in specs])
    fit.split = split
    return fit


# reports ------------------------------------------------------------------

def format_table(fits: Sequence[ModelFit], digits: int = 2) -> str:
    """Aligned coefficient table: ``theta (se)`` with significance stars per model."""
    names = []
    for f in fits:
        for n in f.labels:
            if n not in names:
                names.append(n)
    cells = {}
    for c, f in enumerate(fits):
        for j, n in enumerate(f.labels):
            cells[(n, c)] = (f"{f.theta[j]:.{digits}f} ({f.std_errors[j]:.{digits}f})"
                             f"{stars(f.p_values[j])}")
    rows = [[n] + [cells.get((n, c), "") for c in range(len(fits))] for n in names]
    foot = [
        ["AIC"] + [f"{f.aic:.2f}" if np.isfinite(f.aic) else "n/a" for f in fits],
        ["Num. events"] + [f"{f.n_events:,}" for f in fits],
        ["Num. obs."] + [f"{f.n_observations:,}" for f in fits],
    ]
    return _render(rows, foot)


def format_rom_table(fits: Sequence[RomFit], digits: int = 3) -> str:
    names = []
    for f in fits:
        for n in f.labels:
            if n not in names:
                names.append(n)
    cells = {}
    for c, f in enumerate(fits):
        for j, n in enumerate(f.labels):
            cells[(n, c)] = (f"{f.coefficients[j]:.{digits}f} ({f.std_errors[j]:.{digits}f})"
                             f"{stars(f.p_values[j])}")
    rows = [[n] + [cells.get((n, c), "") for c in range(len(fits))] for n in names]
    foot = [
        ["R^2"] + [f"{f.r_squared:.3f}" for f in fits],
        ["Adj. R^2"] + [f"{f.adj_r_squared:.3f}" for f in fits],
        ["Num. obs."] + [f"{f.n_obs:,}" for f in fits],
        ["RMSE"] + [f"{f.rmse:.3f}" for f in fits],
    ]
    return _render(rows, foot)


def _render(rows, foot) -> str:
    allrows = rows + foot
    ncol = max(len(r) for r in allrows)
    widths = [max(len(r[c]) for r in allrows if c < len(r)) for c in range(ncol)]

    def line(r):
        return "  ".join(r[c].ljust(widths[c]) if c == 0 else r[c].rjust(widths[c])
                         for c in range(len(r))).rstrip()

    rule = "-" * (sum(widths) + 2 * (ncol - 1))
    out = [rule] + [line(r) for r in rows] + [rule] + [line(r) for r in foot] + [rule]
    out.append("*** p<0.001, ** p<0.01, * p<0.05")
    return "\n".join(out)
