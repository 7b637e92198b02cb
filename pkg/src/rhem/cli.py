"""Command-line entry point: ``rhem {fit,rom,stats,simulate,sample-check}``.

Every option may also come from an INI-style config file (``--config``) with
a ``[run]`` section whose keys are the long option names; command-line flags
override the file.  ``spec`` takes one statistic per line.  Reports depend
only on the configuration and the seed, never on the number of threads.

Exit codes: 0 success, 2 configuration or input error, 3 estimation error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .estimate import (EstimationError, fit_replicated, fit_rom, format_rom_table,
                       format_table, split_events)
from .hyperstore import DEFAULT_MAX_SIZE, read_events, write_events
from .sampling import RiskSetPolicy, build_strata
from .simulate import OutcomeModel, SimConfig, SimulationError, simulate
from .statistics import CovariateTable, parse_spec

EXIT_OK, EXIT_CONFIG, EXIT_ESTIMATION = 0, 2, 3
LARGE_NETWORK = 10_000
COMMANDS = ("fit", "rom", "stats", "simulate", "sample-check")

# option name -> (type, default) for values that may come from the config file
OPTIONS = {
    "events": (str, None),
    "covariates": (str, None),
    "directed": (bool, False),
    "spec": (list, []),
    "risk_set": (str, "conditional_size"),
    "controls": (int, 1),
    "replications": (int, 1),
    "seed": (int, 0),
    "split": (str, None),
    "pool": (str, "active"),
    "max_size": (int, DEFAULT_MAX_SIZE),
    "out": (str, None),
    "threads": (int, 1),
    "timing": (bool, False),
    # simulate only
    "nodes": (int, None),
    "n_events": (int, None),
    "theta": (str, None),
    "candidates": (str, "full"),
    "sizes": (str, None),
    "epsilon": (float, 0.1),
    "outcome": (str, None),
    "outcome_sd": (float, 1.0),
}


class ConfigError(ValueError):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rhem", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        q = sub.add_parser(name)
        q.add_argument("--config", help="INI file with a [run] section")
        q.add_argument("--events", help="event log (CSV)")
        q.add_argument("--covariates", help="node covariates (CSV: label,attr,...)")
        q.add_argument("--directed", action="store_const", const=True, default=None)
        q.add_argument("--spec", action="append", help="statistic, repeatable")
        q.add_argument("--risk-set", dest="risk_set",
                       help="full | unconstrained | conditional_size | repeated")
        q.add_argument("--controls", type=int, help="controls per event (m)")
        q.add_argument("--replications", type=int)
        q.add_argument("--seed", type=int)
        q.add_argument("--split", help="all | first | repeated")
        q.add_argument("--pool", help="active | roster")
        q.add_argument("--max-size", dest="max_size", type=int)
        q.add_argument("--out", help="output path")
        q.add_argument("--threads", type=int)
        q.add_argument("--timing", action="store_const", const=True, default=None,
                       help="include wall-clock timings (breaks byte-identical reports)")
        if name == "simulate":
            q.add_argument("--nodes", type=int)
            q.add_argument("--n-events", dest="n_events", type=int)
            q.add_argument("--theta", help="comma-separated coefficients, one per spec")
            q.add_argument("--candidates", help="full | conditional_size | "
                                                "repeated_plus_innovation")
            q.add_argument("--sizes", help="comma-separated event sizes to draw from")
            q.add_argument("--epsilon", type=float)
            q.add_argument("--outcome", help="intercept,coef1,... for a normal outcome")
            q.add_argument("--outcome-sd", dest="outcome_sd", type=float)
        q.add_argument("-v", "--verbose", action="store_true")
    return p


def _read_config(path: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    if not cp.read(path, encoding="utf-8"):
        raise ConfigError(f"cannot read config file {path}")
    if not cp.has_section("run"):
        raise ConfigError(f"{path}: missing [run] section")
    out = {}
    for key, raw in cp.items("run"):
        k = key.replace("-", "_")
        if k not in OPTIONS:
            raise ConfigError(f"{path}: unknown key {key!r}")
        typ = OPTIONS[k][0]
        try:
            if typ is list:
                out[k] = [s.strip() for s in raw.splitlines() if s.strip()]
            elif typ is bool:
                out[k] = cp.getboolean("run", key)
            else:
                out[k] = typ(raw.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key}: {exc}") from None
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and command-line flags (flags win)."""
    cfg = {k: (list(d) if isinstance(d, list) else d) for k, (_, d) in OPTIONS.items()}
    if args.config:
        cfg.update(_read_config(args.config))
    for k in OPTIONS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    cfg["command"] = args.command
    cfg["risk_set"] = cfg["risk_set"].replace("-", "_")
    return cfg


# shared steps ---------------------------------------------------------------

def _specs(cfg):
    if not cfg["spec"]:
        raise ConfigError("at least one --spec is required")
    return [parse_spec(s) for s in cfg["spec"]]


def _load(cfg):
    if not cfg["events"]:
        raise ConfigError("--events is required")
    if not Path(cfg["events"]).is_file():
        raise ConfigError(f"events file not found: {cfg['events']}")
    hist = read_events(cfg["events"], directed=cfg["directed"], max_size=cfg["max_size"])
    cov = None
    if cfg["covariates"]:
        if not Path(cfg["covariates"]).is_file():
            raise ConfigError(f"covariates file not found: {cfg['covariates']}")
        cov = CovariateTable.from_csv(cfg["covariates"], hist)
    return hist, cov


def _split(cfg, hist) -> str:
    split = cfg["split"]
    if split is None:
        if cfg["risk_set"] == "repeated":
            raise ConfigError("the repeated risk set needs an explicit --split repeated")
        if hist.num_nodes > LARGE_NETWORK:
            raise ConfigError(f"networks above {LARGE_NETWORK} nodes need an explicit "
                              "--split first or --split repeated")
        split = "all"
    if split not in ("all", "first", "repeated"):
        raise ConfigError(f"unknown split {split!r}")
    return split


def _check_split_specs(split, specs):
    if split == "first":
        bad = [s.label for s in specs if s.kind in ("repetition", "prior_hyperedge_success")]
        if bad:
            raise ConfigError(f"{', '.join(bad)} is constantly zero on first events; "
                              "remove it when --split first")


def _policy(cfg, split) -> RiskSetPolicy:
    return RiskSetPolicy(kind=cfg["risk_set"], m=cfg["controls"], node_pool=cfg["pool"],
                         split=split)


def _echo(cfg) -> dict:
    keys = ["command", "events", "covariates", "directed", "spec", "risk_set", "controls",
            "replications", "seed", "split", "pool", "max_size"]
    return {k: cfg[k] for k in keys}


def _emit(cfg, report: dict, text: str) -> None:
    if cfg["out"]:
        with open(cfg["out"], "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, allow_nan=False, default=_jsonable)
            fh.write("\n")
    sys.stdout.write(text.rstrip("\n") + "\n")


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    raise TypeError(f"not serializable: {type(x).__name__}")


def _finite(obj):
    """Replace NaN/inf by None so reports stay valid JSON."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


# commands -----------------------------------------------------------------

def cmd_fit(cfg) -> int:
    specs = _specs(cfg)
    hist, cov = _load(cfg)
    split = _split(cfg, hist)
    _check_split_specs(split, specs)
    if split == "repeated" and not split_events(hist)["repeated"]:
        raise ConfigError("--split repeated but no event repeats an earlier hyperedge")
    policy = _policy(cfg, split)
    t0 = time.perf_counter()
    rep = fit_replicated(hist, policy, specs, R=cfg["replications"], seed=cfg["seed"],
                         covariates=cov, n_jobs=cfg["threads"])
    warns = []
    if hist.truncated:
        warns.append(f"{hist.truncated} event(s) truncated to {cfg['max_size']} participants")
    for info in rep.strata_info:
        if info["dropped"]:
            warns.append(f"replication {info['replication']}: {info['dropped']} "
                         "stratum/strata dropped (no controls)")
        if info["underfilled"]:
            warns.append(f"replication {info['replication']}: {info['underfilled']} "
                         f"stratum/strata with fewer than {cfg['controls']} controls")
    for r, err in enumerate(rep.errors):
        if err:
            warns.append(f"replication {r}: {err}")
    report = {"config": _echo(cfg), "policy": policy.tag, **rep.to_dict(), "warnings": warns}
    if cfg["timing"]:
        report["timing_seconds"] = round(time.perf_counter() - t0, 3)
    ok = rep.successes
    lines = [f"policy: {policy.tag}"]
    if ok:
        lines.append(format_table(ok))
    if len(ok) > 1:
        lines.append("")
        lines.append(_consistency_table(rep.summary()))
    lines += [f"warning: {w}" for w in warns]
    _emit(cfg, _finite(report), "\n".join(lines))
    if not ok:
        sys.stderr.write("estimation failed in every replication\n")
        return EXIT_ESTIMATION
    return EXIT_OK


def _consistency_table(summary: dict) -> str:
    rows = [["statistic", "mean", "sd", "+", "-", "signif.", "stable"]]
    for name, s in summary.items():
        rows.append([name, f"{s['mean']:.3f}", f"{s['sd']:.3f}", str(s["positive"]),
                     str(s["negative"]), str(s["significant"]), "yes" if s["stable"] else "no"])
    w = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    return "\n".join("  ".join(r[0].ljust(w[0]) if c == 0 else r[c].rjust(w[c])
                               for c in range(len(r)))
                     for r in rows)


def cmd_rom(cfg) -> int:
    specs = _specs(cfg)
    hist, cov = _load(cfg)
    split = cfg["split"] or "all"
    _check_split_specs(split, specs)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fit = fit_rom(hist, specs, split, cov)
    warns = [str(w.message) for w in caught]
    if hist.truncated:
        warns.append(f"{hist.truncated} event(s) truncated to {cfg['max_size']} participants")
    report = {"config": _echo(cfg), "fit": fit.to_dict(), "warnings": warns}
    text = format_rom_table([fit]) + "".join(f"\nwarning: {w}" for w in warns)
    _emit(cfg, _finite(report), text)
    return EXIT_OK


def cmd_stats(cfg) -> int:
    specs = _specs(cfg)
    hist, cov = _load(cfg)
    split = _split(cfg, hist)
    _check_split_specs(split, specs)
    policy = _policy(cfg, split)
    strata = build_strata(hist, policy, specs, 0, cfg["seed"], cov, cfg["threads"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["stratum", "event", "time", "case", "hyperedge"] + [s.label for s in specs])
    names = hist.labels
    for k, s in enumerate(strata):
        for r, h in enumerate(s.rows):
            if h.is_directed:
                hname = ";".join(names[v] for v in h.sources) + "->" + \
                    ";".join(names[v] for v in h.targets)
            else:
                hname = ";".join(names[v] for v in h.sources)
            w.writerow([k, s.event_ordinal, repr(float(s.time)), int(r == 0), hname]
                       + [repr(float(x)) for x in s.statistics[r]])
    if cfg["out"]:
        Path(cfg["out"]).write_text(buf.getvalue(), encoding="utf-8")
    else:
        sys.stdout.write(buf.getvalue())
    sys.stderr.write(f"{strata.n_events} strata, {strata.n_observations} rows, "
                     f"{strata.dropped} dropped, {strata.skipped} skipped\n")
    return EXIT_OK


def _moments(sizes) -> dict:
    x = np.asarray(sizes, dtype=float)
    if len(x) == 0:
        return {"n": 0, "mean": None, "sd": None, "min": None, "max": None}
    return {"n": int(len(x)), "mean": float(x.mean()), "sd": float(x.std()),
            "min": int(x.min()), "max": int(x.max())}


def _hist(sizes) -> dict:
    vals, counts = np.unique(np.asarray(sizes, dtype=int), return_counts=True)
    return {str(int(v)): int(c) for v, c in zip(vals, counts)}


def cmd_sample_check(cfg) -> int:
    hist, _ = _load(cfg)
    split = _split(cfg, hist)
    policy = _policy(cfg, split)
    strata = build_strata(hist, policy, [], 0, cfg["seed"], None, cfg["threads"])
    case_sizes = [len(s.case.members) for s in strata]
    ctrl_sizes = [len(h.members) for s in strata for h in s.controls]
    report = {
        "config": _echo(cfg), "policy": policy.tag,
        "cases": {"histogram": _hist(case_sizes), **_moments(case_sizes)},
        "controls": {"histogram": _hist(ctrl_sizes), **_moments(ctrl_sizes)},
        "dropped": strata.dropped, "underfilled": strata.underfilled,
    }
    keys = sorted(set(report["cases"]["histogram"]) | set(report["controls"]["histogram"]),
                  key=int)
    lines = [f"policy: {policy.tag}", f"{'size':>5}  {'events':>8}  {'controls':>8}"]
    for k in keys:
        lines.append(f"{k:>5}  {report['cases']['histogram'].get(k, 0):>8}  "
                     f"{report['controls']['histogram'].get(k, 0):>8}")
    for what in ("cases", "controls"):
        m = report[what]
        if m["n"]:
            lines.append(f"{what}: mean size {m['mean']:.3f}, sd {m['sd']:.3f}")
    _emit(cfg, report, "\n".join(lines))
    return EXIT_OK


def _floats(text, what):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad {what}: {text!r}") from None


def cmd_simulate(cfg) -> int:
    specs = _specs(cfg)
    if cfg["nodes"] is None or cfg["n_events"] is None or cfg["theta"] is None:
        raise ConfigError("simulate needs --nodes, --n-events and --theta")
    if not cfg["out"]:
        raise ConfigError("simulate needs --out for the event log")
    theta = _floats(cfg["theta"], "theta")
    sizes = [int(x) for x in _floats(cfg["sizes"], "sizes")] if cfg["sizes"] else None
    om = None
    if cfg["outcome"]:
        c = _floats(cfg["outcome"], "outcome")
        om = OutcomeModel(c[0], c[1:], cfg["outcome_sd"])
        if len(c) - 1 != len(specs):
            raise ConfigError("--outcome needs an intercept plus one coefficient per spec")
    sc = SimConfig(cfg["nodes"], cfg["n_events"], specs, theta, cfg["candidates"], sizes,
                   cfg["epsilon"], om, seed=cfg["seed"])
    events = simulate(sc)
    write_events(cfg["out"], events)
    sys.stdout.write(f"wrote {len(events)} events to {cfg['out']}\n")
    return EXIT_OK


HANDLERS = {"fit": cmd_fit, "rom": cmd_rom, "stats": cmd_stats, "simulate": cmd_simulate,
            "sample-check": cmd_sample_check}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        return HANDLERS[args.command](cfg)
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stderr.close()
        return EXIT_OK
    except (EstimationError, SimulationError) as exc:
        sys.stderr.write(f"estimation error: {exc}\n")
        return EXIT_ESTIMATION
    except (ValueError, OSError, KeyError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
