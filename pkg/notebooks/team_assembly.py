# ---
# jupyter:
#   jupytext:
#     formats: py:light
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # Team assembly and team success on a co-authorship stream
#
# A co-author network is large and sparse: almost every paper has a new
# team.  We model first events and repeated events separately, then regress
# paper outcomes on the same kind of statistics.

import numpy as np

from rhem import History, RiskSetPolicy, fit_replicated, fit_rom, parse_spec
from rhem.estimate import format_rom_table, format_table, split_events
from rhem.simulate import make_coauthor_like

hist = History.from_events(make_coauthor_like(n_nodes=20_000, n_events=20_000, seed=1))
parts = split_events(hist)
sizes = np.array([e.hyperedge.size for e in hist.events])
print(f"{len(hist)} papers, {hist.num_nodes} authors, mean team size {sizes.mean():.2f}")
print(f"{len(parts['first'])} first events, {len(parts['repeated'])} repeated events")

# ## First events
#
# Controls have the size of the observed team.  Repetition and prior success
# of the exact team are zero on every first event, so they are left out.

first_specs = [parse_spec(s) for s in ("subrep(1)", "subrep(2)", "spe(2)",
                                       "prior_subsuccess(1)")]
first = fit_replicated(hist, RiskSetPolicy("conditional_size", m=1, split="first"),
                       first_specs, R=3)
print(format_table(first.successes))

# ## Repeated events
#
# Controls are drawn from teams that already published.  The generator picks
# the team that publishes again uniformly among earlier teams, so none of
# these effects should be stable across resamples.

rep_specs = [parse_spec(s) for s in ("subrep(1)", "subrep(2)", "repetition",
                                     "prior_success")]
rep = fit_replicated(hist, RiskSetPolicy("repeated", m=1, split="repeated"), rep_specs, R=3)
print(format_table(rep.successes))
for name, s in rep.summary().items():
    print(f"{name:>16}: same sign in {max(s['positive'], s['negative'])}/3, "
          f"stable {s['stable']}")

# ## Outcomes
#
# The outcome of each paper is regressed on statistics of its own team,
# evaluated on the papers published before it.

rom_specs = [parse_spec(s) for s in ("size", "subrep(1)", "prior_subsuccess(1)")]
print(format_rom_table([fit_rom(hist, rom_specs, split) for split in ("first", "repeated")]))
