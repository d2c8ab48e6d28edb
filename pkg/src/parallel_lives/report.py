"""Run reports: one scenario under one model, serialized to JSON or CSV."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import numpy as np

from . import engine, models
from .causal import CausalGraph, add_initial_node, locality_audit
from .scenarios import (
    ScenarioDescriptor,
    build_graph,
    check_expected,
    oracle_distribution,
    outcome_key,
)

SCHEMA_VERSION = "1.0"


def _key(k) -> str:
    return k if isinstance(k, str) else models.format_label(k)


def _dist_json(d: dict) -> dict[str, float]:
    return {_key(k): float(v) for k, v in sorted(d.items(), key=lambda kv: _key(kv[0]))}


@dataclass
class RunReport:
    scenario: ScenarioDescriptor
    model: str
    seed: int
    samples: int
    tolerance: float
    tables: dict[str, Any] = field(default_factory=dict)
    distributions: dict[str, dict] = field(default_factory=dict)
    audits: dict[str, Any] = field(default_factory=dict)
    expectations: list = field(default_factory=list)
    statistics: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = all(e.passed for e in self.expectations)
        ok = ok and self.statistics.get("replay_reproduces_future", True)
        return ok and all(a.get("passed", True) for a in self.audits.values())

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario.to_json(),
            "model": self.model,
            "seed": self.seed,
            "samples": self.samples,
            "tolerance": self.tolerance,
            "tables": self.tables,
            "distributions": {k: _dist_json(v) for k, v in self.distributions.items()},
            "audits": self.audits,
            "statistics": self.statistics,
            "expectations": [e.to_json() for e in self.expectations],
            "passed": self.passed,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True, ensure_ascii=False, default=_default) + "\n"

    def to_csv(self) -> str:
        """Long-format distributions: one row per (distribution, outcome)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["schema_version", "scenario", "model", "seed", "distribution", "outcome", "probability"])
        for name, dist in self.distributions.items():
            for outcome, p in _dist_json(dist).items():
                w.writerow([SCHEMA_VERSION, self.scenario.name, self.model, self.seed, name, outcome, f"{p:.15g}"])
        return buf.getvalue()


def _default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o).__name__}")


def inflation_graph(desc: ScenarioDescriptor) -> CausalGraph:
    """The scenario's graph with an initial event that precedes everything."""
    return add_initial_node(build_graph(desc))


def run(desc: ScenarioDescriptor, model: str, seed: int = 0, samples: int = 0,
        tolerance: float = 1e-9, audits: bool = True) -> RunReport:
    model = models.ModelKind(model).value
    report = RunReport(desc, model, int(seed), int(samples), float(tolerance))
    if model == models.ModelKind.LOCAL_REALIST.value:
        lr = models.run_local_realist(build_graph(desc))
        report.tables["local_realist"] = lr.to_json()
        return report

    needs_initial = model in (models.ModelKind.INFLATION.value, models.ModelKind.PL_INFLATION.value)
    g = inflation_graph(desc) if needs_initial else build_graph(desc)
    ex = engine.execute(g)
    key = outcome_key(desc)
    oracle = oracle_distribution(desc)
    pl = engine.terminal_distribution(ex, key)
    report.distributions["oracle"] = oracle
    report.distributions["engine"] = pl
    report.statistics["engine_vs_oracle_max_abs"] = models.max_abs_difference(pl, oracle)

    if model == models.ModelKind.PARALLEL_LIVES.value:
        report.tables["life_table"] = models.run_parallel_lives(g, ex).to_json()
    elif model == models.ModelKind.PL_INFLATION.value:
        report.tables["life_table"] = models.run_pl_inflation(g, ex).to_json()
    else:
        inf = models.run_inflation(g, seed, ex)
        report.tables["hidden_variable_table"] = inf.table.to_json()
        report.tables["possibilities"] = inf.trace.to_json()
        report.tables["selected_future"] = inf.future.to_json()
        report.statistics["replay_reproduces_future"] = inf.replay_ok
        if samples > 0:
            sampled = models.sampled_distribution(ex, samples, seed, key)
            chi2, p = models.chi_square(sampled, oracle, samples)
            report.distributions["sampled"] = sampled
            report.statistics.update({"tv_distance": models.tv_distance(sampled, oracle),
                                      "chi2": chi2, "p_value": p})

    if audits:
        report.audits["fluid"] = engine.fluid_audit(ex).to_json()
        report.audits["locality"] = locality_audit(g, ex).to_json()
    report.expectations = check_expected(desc, ex, tolerance)
    return report


def load_schema(name: str) -> dict:
    """One of the JSON schemas shipped with the package, e.g. ``run_report``."""
    text = resources.files("parallel_lives").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)
