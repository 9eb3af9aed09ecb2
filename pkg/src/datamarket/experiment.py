"""Config-driven experiment runs with deterministic CSV/JSON artifacts.

A config is one JSON object::

    {
      "preset": "desk-mixture",             # optional, fills defaults
      "scenario": {"kind": "mixture_regression", "n": 40, ...},
      "market": {"K": 4, "T": 1500, "eta": 1.0, "alpha": 0.01, "gamma": 0.01, "m": 1},
      "samplers": ["osmd", "uniform"],
      "seeds": [0, 1, 2],
      "output_dir": "runs/desk",
      "regret": false,
      "shapley": null,                      # null: off, 0: exact, N: N permutations
      "revenue": 1.0
    }

``market.alpha`` and ``market.eta`` also accept ``"theory"`` for the rates
that make the regret bound sublinear in the budget.
"""
from __future__ import annotations

import copy
import csv
import io
import json
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import accumulated_shapley, shapley_revenue
from .market import MarketConfig, allocate_revenue, run_market
from .regret import UtilityTrace, compute_regret, theory_tuning
from .scenarios import gen_corrupted_classification, gen_mixture_regression

TRACE_SCHEMA = "datamarket.trace/1"
SUMMARY_SCHEMA = "datamarket.summary/1"
AGGREGATE_SCHEMA = "datamarket.aggregate/1"
OUTPUT_ROOT_ENV = "DATAMARKET_OUTPUT_ROOT"
SAMPLERS = ("osmd", "uniform")

PRESETS = {
    "paper-mixture-a2": {
        "scenario": {"kind": "mixture_regression", "n": 100, "d": 1000, "samples_per_provider": 400,
                     "groups": 4, "consumer_group": 0},
        "market": {"gamma": 0.01, "alpha": 0.01, "eta": 0.001, "T": 1500, "K_fraction": 0.1},
    },
    "paper-classification-a1": {
        "scenario": {"kind": "corrupted_classification", "n": 100, "per_provider": 400},
        "market": {"gamma": 0.1, "alpha": 0.01, "eta": 1.0, "T": 500, "K_fraction": 0.1},
    },
    "desk-mixture": {
        "scenario": {"kind": "mixture_regression", "n": 40, "d": 50, "samples_per_provider": 25,
                     "groups": 4, "consumer_group": 0, "holdout_size": 500, "tau": 5.0},
        "market": {"gamma": 0.01, "alpha": 0.01, "eta": 1.0, "T": 1500, "K_fraction": 0.1},
    },
    "desk-classification": {
        "scenario": {"kind": "corrupted_classification", "n": 10, "per_provider": 40, "d": 5,
                     "classes": 3, "beta_schedule": [0, 0, 20, 20, 40, 40, 60, 60, 90, 90],
                     "tau": 1.0, "local_lr": 0.1, "minibatch_size": 10},
        "market": {"gamma": 0.1, "alpha": 0.01, "eta": 1.0, "T": 200, "K": 2},
    },
}

SCENARIO_KEYS = {
    "mixture_regression": {
        "kind": None, "n": 40, "d": 50, "samples_per_provider": 25, "groups": 4,
        "consumer_group": 0, "holdout_size": 500, "noise_std": 0.5, "tau": 5.0, "squash": "exp",
    },
    "corrupted_classification": {
        "kind": None, "n": 10, "per_provider": 40, "d": 5, "classes": 3, "beta_schedule": None,
        "holdout_size": 500, "test_size": 1000, "class_sep": 1.0, "tau": 1.0, "squash": "exp",
        "local_lr": 0.1, "minibatch_size": 10, "epochs": 1,
    },
}
MARKET_KEYS = {"K": None, "K_fraction": None, "T": None, "B": None, "eta": 1.0, "alpha": 0.01,
               "gamma": 0.01, "m": 1}
TOP_KEYS = {"preset", "scenario", "market", "samplers", "seeds", "output_dir", "regret",
            "shapley", "revenue"}


class ConfigError(ValueError):
    """Invalid experiment config; carries the offending field and source line."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.field = field
        self.line = line

    def to_dict(self) -> dict:
        return {"error": "ConfigError", "message": str(self), "field": self.field, "line": self.line}


@dataclass
class ExperimentConfig:
    scenario: dict
    market: dict
    samplers: list
    seeds: list
    output_dir: Optional[str] = None
    regret: bool = False
    shapley: Optional[int] = None
    revenue: float = 1.0
    preset: Optional[str] = None
    source: Optional[str] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.scenario["n"]

    def market_config(self, seed: int) -> MarketConfig:
        m = self.market
        return MarketConfig(n=self.n, B=m["B"], K=m["K"], eta=m["eta"], alpha=m["alpha"],
                            gamma=m["gamma"], seed=seed, m=m["m"])

    def to_dict(self) -> dict:
        return {"preset": self.preset, "scenario": self.scenario, "market": self.market,
                "samplers": self.samplers, "seeds": self.seeds, "regret": self.regret,
                "shapley": self.shapley, "revenue": self.revenue}


def _line_of(text: Optional[str], key: Optional[str]) -> Optional[int]:
    if not text or not key:
        return None
    match = re.search(r'"%s"\s*:' % re.escape(key.split(".")[-1]), text)
    return text.count("\n", 0, match.start()) + 1 if match else None


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def normalize_config(raw: dict, source: Optional[str] = None) -> ExperimentConfig:
    """Fill defaults from the named preset and check every field before any compute."""

    def fail(msg, key=None):
        raise ConfigError(msg, key, _line_of(source, key))

    if not isinstance(raw, dict):
        fail("config must be a JSON object")
    for k in raw:
        if k not in TOP_KEYS:
            fail(f"unknown key {k!r}", k)

    preset = raw.get("preset")
    doc = {}
    if preset is not None:
        if preset not in PRESETS:
            fail(f"unknown preset {preset!r}; known: {sorted(PRESETS)}", "preset")
        doc = copy.deepcopy(PRESETS[preset])
    doc = _merge(doc, {k: v for k, v in raw.items() if k != "preset"})

    scen = doc.get("scenario")
    if not isinstance(scen, dict) or "kind" not in scen:
        fail("scenario.kind is required", "scenario")
    kind = scen["kind"]
    if kind not in SCENARIO_KEYS:
        fail(f"unknown scenario kind {kind!r}", "scenario.kind")
    for k in scen:
        if k not in SCENARIO_KEYS[kind]:
            fail(f"unknown key scenario.{k} for kind {kind!r}", f"scenario.{k}")
    scen = {**SCENARIO_KEYS[kind], **scen}
    for k in ("n", "holdout_size"):
        if not isinstance(scen[k], int) or scen[k] < 1:
            fail(f"scenario.{k} must be a positive integer", f"scenario.{k}")
    if not (isinstance(scen["tau"], (int, float)) and scen["tau"] > 0):
        fail("scenario.tau must be positive", "scenario.tau")
    if scen["squash"] not in ("exp", "affine"):
        fail("scenario.squash must be 'exp' or 'affine'", "scenario.squash")
    if kind == "mixture_regression":
        if not 0 <= scen["consumer_group"] < scen["groups"]:
            fail("scenario.consumer_group must lie in [0, groups)", "scenario.consumer_group")
    else:
        bs = scen["beta_schedule"]
        if bs is not None and (len(bs) != scen["n"] or any(not 0 <= b <= 100 for b in bs)):
            fail("scenario.beta_schedule needs n entries in [0, 100]", "scenario.beta_schedule")
        if not 1 <= scen["minibatch_size"] <= scen["per_provider"]:
            fail("scenario.minibatch_size must lie in [1, per_provider]", "scenario.minibatch_size")

    mk = doc.get("market", {})
    if not isinstance(mk, dict):
        fail("market must be an object", "market")
    for k in mk:
        if k not in MARKET_KEYS:
            fail(f"unknown key market.{k}", f"market.{k}")
    mk = {**MARKET_KEYS, **mk}
    n = scen["n"]
    if mk["K"] is None:
        frac = mk["K_fraction"] if mk["K_fraction"] is not None else 0.1
        mk["K"] = max(1, int(round(frac * n)))
    if not isinstance(mk["K"], int) or mk["K"] < 1:
        fail("market.K must be a positive integer", "market.K")
    if mk["B"] is None:
        if mk["T"] is None:
            fail("market needs T or B", "market")
        mk["B"] = mk["K"] * mk["T"]
    T = mk["B"] // mk["K"]
    if T < 1:
        fail("market.B must be at least K", "market.B")
    mk["T"] = T
    if not isinstance(mk["m"], int) or not 1 <= mk["m"] <= T:
        fail(f"market.m must be an integer in [1, {T}]", "market.m")
    alpha_t, eta_t = theory_tuning(n, mk["B"], mk["K"], mk["m"])
    if mk["alpha"] == "theory":
        mk["alpha"] = alpha_t
    if mk["eta"] == "theory":
        mk["eta"] = eta_t
    if not isinstance(mk["alpha"], (int, float)) or not 0 <= mk["alpha"] <= 1:
        fail(f"market.alpha must lie in [0, 1], got {mk['alpha']!r}", "market.alpha")
    if not isinstance(mk["eta"], (int, float)) or not mk["eta"] > 0:
        fail(f"market.eta must be positive, got {mk['eta']!r}", "market.eta")
    gammas = mk["gamma"] if isinstance(mk["gamma"], list) else [mk["gamma"]]
    if not all(isinstance(g, (int, float)) and g > 0 for g in gammas):
        fail("market.gamma must be positive", "market.gamma")
    if isinstance(mk["gamma"], list) and len(mk["gamma"]) != T:
        fail(f"market.gamma schedule needs {T} entries", "market.gamma")
    mk["alpha"] = float(mk["alpha"])
    mk["eta"] = float(mk["eta"])
    mk.pop("K_fraction")

    seeds = doc.get("seeds")
    if not isinstance(seeds, list) or not seeds:
        fail("seeds must be a non-empty list of integers", "seeds")
    if not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        fail("seeds must be nonnegative integers", "seeds")
    if len(set(seeds)) != len(seeds):
        fail("seeds must be distinct", "seeds")

    samplers = doc.get("samplers", ["osmd"])
    if not isinstance(samplers, list) or not samplers or any(s not in SAMPLERS for s in samplers):
        fail(f"samplers must be a non-empty subset of {list(SAMPLERS)}", "samplers")

    shapley = doc.get("shapley")
    if shapley is not None:
        if not isinstance(shapley, int) or shapley < 0:
            fail("shapley must be null, 0 (exact) or a positive permutation count", "shapley")
        if shapley == 0 and n > 16:
            fail("exact shapley needs n <= 16", "shapley")

    revenue = doc.get("revenue", 1.0)
    if not isinstance(revenue, (int, float)) or not revenue > 0:
        fail("revenue must be positive", "revenue")
    regret = doc.get("regret", False)
    if not isinstance(regret, bool):
        fail("regret must be true or false", "regret")
    out = doc.get("output_dir")
    if out is not None and not isinstance(out, str):
        fail("output_dir must be a string", "output_dir")

    return ExperimentConfig(scen, mk, list(samplers), list(seeds), out, regret, shapley,
                            float(revenue), preset, source)


def validate_config(path) -> ExperimentConfig:
    """Read, parse and normalize a JSON config file."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg} (column {e.colno})", None, e.lineno) from None
    return normalize_config(raw, text)


# ----------------------------------------------------------------- running ---

def build_scenario(cfg: ExperimentConfig, seed: int):
    """Return ``(scenario, oracles, utility, w0, metric)`` for one seed."""
    s = cfg.scenario
    if s["kind"] == "mixture_regression":
        sc = gen_mixture_regression(s["n"], s["d"], s["samples_per_provider"], s["groups"],
                                    s["consumer_group"], seed, s["holdout_size"], s["noise_std"])
        return sc, sc.oracles(), sc.utility(s["tau"], s["squash"]), sc.initial_params(), sc.estimation_error
    sc = gen_corrupted_classification(s["n"], s["per_provider"], s["d"], s["classes"],
                                      s["beta_schedule"], seed, s["holdout_size"], s["test_size"],
                                      s["class_sep"])
    oracles = sc.oracles(s["local_lr"], s["minibatch_size"], s["epochs"])
    return sc, oracles, sc.utility(s["tau"], s["squash"]), sc.initial_params(), sc.accuracy


def _fmt(x) -> str:
    return repr(float(x))


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def trace_csv(trace, ledger_counts_by_round, n: int) -> str:
    buf = io.StringIO()
    buf.write(f"# {TRACE_SCHEMA}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["round", "utility", "test_metric"] + [f"p_{i}" for i in range(n)]
                    + [f"N_{i}" for i in range(n)])
    metric = trace.metric if trace.metric is not None else np.full(trace.T, np.nan)
    for t in range(trace.T):
        writer.writerow([t, _fmt(trace.utility[t]), _fmt(metric[t])]
                        + [_fmt(p) for p in trace.probs[t]]
                        + [int(c) for c in ledger_counts_by_round[t]])
    return buf.getvalue()


def aggregate_csv(traces) -> str:
    U = np.array([tr.utility for tr in traces])
    M = np.array([tr.metric for tr in traces])
    buf = io.StringIO()
    buf.write(f"# {AGGREGATE_SCHEMA}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["round", "n_seeds", "utility_mean", "utility_std", "test_metric_mean",
                     "test_metric_std"])
    for t in range(U.shape[1]):
        writer.writerow([t, U.shape[0], _fmt(U[:, t].mean()), _fmt(U[:, t].std()),
                         _fmt(M[:, t].mean()), _fmt(M[:, t].std())])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


def run_single(cfg: ExperimentConfig, sampler: str, seed: int, shapley_report=None):
    """One market run; returns ``(trace, summary_dict, per-round cumulative counts)``."""
    sc, oracles, utility, w0, metric = build_scenario(cfg, seed)
    mc = cfg.market_config(seed)
    w, ledger, trace = run_market(mc, oracles, utility, w0, sampler, metric=metric,
                                  analysis=cfg.regret)
    cum = np.cumsum([np.bincount(row, minlength=mc.n) for row in trace.draws], axis=0)
    payments = allocate_revenue(ledger, cfg.revenue)
    summary = {
        "schema": SUMMARY_SCHEMA,
        "sampler": sampler,
        "seed": seed,
        "config": cfg.to_dict(),
        "final": {"utility": float(utility.evaluate(w)), "test_metric": float(metric(w))},
        "ledger": {"counts": ledger.counts.tolist(), "total": ledger.total, "budget": mc.K * mc.T},
        "payments": payments.tolist(),
        "regret": None,
        "shapley": None,
    }
    if hasattr(sc, "provider_groups"):
        summary["provider_groups"] = sc.provider_groups.tolist()
    if hasattr(sc, "beta"):
        summary["provider_beta"] = sc.beta.tolist()
    if cfg.regret:
        rep = compute_regret(UtilityTrace.from_run(trace), mc.m, mc.K, alpha=mc.alpha, eta=mc.eta)
        summary["regret"] = rep.to_dict()
    if shapley_report is not None:
        pay, degenerate = shapley_revenue(shapley_report.values, cfg.revenue)
        summary["shapley"] = {**shapley_report.to_dict(), "payments": pay.tolist(),
                              "degenerate": degenerate}
    return trace, _jsonable(summary), cum


def resolve_output_dir(cfg: ExperimentConfig, override=None, config_path=None) -> Path:
    if override:
        return Path(override)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    stem = Path(config_path).stem if config_path else "experiment"
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs")) / stem


def run_experiment(cfg: ExperimentConfig, out_dir) -> list:
    """Run every (sampler, seed) job and write trace, summary and aggregate files.

    Files are written atomically, so an interrupted run never leaves a
    truncated artifact in place of a completed one. Returns the written paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable", "output_dir")
    written = []

    shapley = {}
    if cfg.shapley is not None:
        for seed in cfg.seeds:
            _, oracles, utility, w0, _ = build_scenario(cfg, seed)
            shapley[seed] = accumulated_shapley(cfg.market_config(seed), oracles, utility, w0,
                                                cfg.shapley)

    for sampler in cfg.samplers:
        traces = []
        for seed in cfg.seeds:
            trace, summary, cum = run_single(cfg, sampler, seed, shapley.get(seed))
            traces.append(trace)
            p = out / f"trace_{sampler}_seed{seed}.csv"
            _atomic_write(p, trace_csv(trace, cum, cfg.n))
            written.append(p)
            p = out / f"summary_{sampler}_seed{seed}.json"
            _atomic_write(p, json.dumps(summary, indent=2, sort_keys=True) + "\n")
            written.append(p)
        p = out / f"aggregate_{sampler}.csv"
        _atomic_write(p, aggregate_csv(traces))
        written.append(p)
    return written
