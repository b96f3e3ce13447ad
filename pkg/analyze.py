"""Scenario runner: build a model from a JSON scenario, reach, verify, export.

    python analyze.py configs/emb_nopv.json --delta 1e-8 --strict
"""

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

import ledger
from errors import AnalysisError, ConfigError, InputError
from discretization import DEFAULT_TAYLOR_ORDER
from hybrid_engine import ALGORITHMS, ReachOptions, run_analysis
from models import (
    EMBParams,
    Variation,
    build_emb,
    build_simple,
    load_params,
    read_json,
    split_parametric,
    velocity_row,
)
from sim_oracle import random_check
from verification import bounds_table, check_requirement, final_diameter

# ── Config ──────────────────────────────────────────────────────────────────
REACH_THREADS = int(os.getenv("REACH_THREADS", "1"))
OUTPUT_DIR = os.getenv("OUTPUT_DIR", "results")
ORACLE_SAMPLES = int(os.getenv("ORACLE_SAMPLES", "2000"))

SCENARIO_KEYS = {
    "name", "model", "model_params", "variation", "algorithm", "delta", "max_order",
    "splits", "split_entry", "requirement", "output_dir", "zeta", "horizon", "seed", "taylor_order",
}
SIMPLE_DEFAULTS = {"x0": 10.0, "t_sample": 1.0, "zeta": [0.0, 0.0], "horizon": 5.0}


@dataclass(frozen=True)
class Scenario:
    name: str
    model: str
    model_params: object              # EMBParams or dict of simple-model values
    variation: Variation = Variation()
    algorithm: str = "glgm06"
    delta: float = 1e-7
    max_order: float = math.inf
    taylor_order: int = DEFAULT_TAYLOR_ORDER
    splits: int = 1
    split_entry: tuple = (1, 0)
    requirement: dict = field(default_factory=dict)
    output_dir: str = OUTPUT_DIR
    seed: int = 0

    def build(self):
        if self.model == "emb":
            return build_emb(self.model_params, self.variation)
        p = self.model_params
        return build_simple(p["x0"], p["t_sample"], p["zeta"], p["horizon"])


# ── Loading ──────────────────────────────────────────────────────────────────

def _field(path, key, message):
    return ConfigError(f"{path}: field '{key}': {message}")


def _number(path, data, key, default=None):
    value = data.get(key, default)
    if value is None or value == "inf":
        return math.inf if key == "max_order" else value
    try:
        return float(value)
    except (TypeError, ValueError):
        raise _field(path, key, f"expected a number, got {value!r}") from None


def _model_params(path, data):
    model = data.get("model")
    raw = data.get("model_params", {} if model == "simple" else None)
    if raw is None:
        raise _field(path, "model_params", "required for the emb model")
    if isinstance(raw, str):
        # relative to the scenario file
        ref = Path(path).parent / raw
        raw = load_params(ref) if model == "emb" else read_json(ref)
    if not isinstance(raw, (dict, EMBParams)):
        raise _field(path, "model_params", "expected an object or a file path")
    overrides = {k: data[k] for k in ("zeta", "horizon") if k in data}

    if model == "emb":
        try:
            params = raw if isinstance(raw, EMBParams) else EMBParams.from_dict(raw)
            if overrides:
                params = replace(params, **{k: tuple(v) if k == "zeta" else float(v) for k, v in overrides.items()})
        except (InputError, TypeError) as e:
            raise _field(path, "model_params", str(e)) from None
        return params

    unknown = sorted(set(raw) - set(SIMPLE_DEFAULTS))
    if unknown:
        raise _field(path, "model_params", f"unknown key(s) {', '.join(unknown)}")
    return {**SIMPLE_DEFAULTS, **raw, **overrides}


def parse_scenario(data, path="<scenario>"):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    unknown = sorted(set(data) - SCENARIO_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {', '.join(unknown)}")
    name = data.get("name") or Path(path).stem
    model = data.get("model")
    if model not in ("simple", "emb"):
        raise _field(path, "model", f"must be 'simple' or 'emb', got {model!r}")
    try:
        variation = Variation.from_dict(data.get("variation"))
    except InputError as e:
        raise _field(path, "variation", str(e)) from None
    if model == "simple" and variation.kind != "none":
        raise _field(path, "variation", "the simple model has no parameters to vary")

    requirement = data.get("requirement") or {}
    if requirement and not isinstance(requirement, dict):
        raise _field(path, "requirement", "expected an object with epsilon and x0")
    taylor_order = data.get("taylor_order", DEFAULT_TAYLOR_ORDER)
    if not isinstance(taylor_order, int) or taylor_order < 2:
        raise _field(path, "taylor_order", f"must be an integer >= 2, got {taylor_order!r}")
    splits = data.get("splits", 1)
    if not isinstance(splits, int) or splits < 1:
        raise _field(path, "splits", f"must be an integer >= 1, got {splits!r}")

    return Scenario(
        name=str(name),
        model=model,
        model_params=_model_params(path, data),
        variation=variation,
        algorithm=data.get("algorithm", "glgm06"),
        delta=_number(path, data, "delta", 1e-7),
        max_order=_number(path, data, "max_order"),
        taylor_order=taylor_order,
        splits=splits,
        split_entry=tuple(data.get("split_entry", (1, 0))),
        requirement=dict(requirement),
        output_dir=data.get("output_dir", OUTPUT_DIR),
        seed=int(data.get("seed", 0)),
    )


def validate(sc: Scenario, path="<scenario>"):
    if sc.algorithm not in ALGORITHMS:
        raise _field(path, "algorithm", f"must be one of {ALGORITHMS}, got {sc.algorithm!r}")
    if not sc.delta > 0:
        raise _field(path, "delta", f"must be positive, got {sc.delta}")
    if not sc.max_order >= 1:
        raise _field(path, "max_order", f"must be >= 1, got {sc.max_order}")
    if sc.variation.kind != "none" and sc.algorithm != "asb07":
        raise _field(path, "algorithm", "parameter variations need asb07")
    zeta = sc.model_params.zeta if sc.model == "emb" else tuple(sc.model_params["zeta"])
    if sc.algorithm == "exact" and (sc.variation.kind != "none" or tuple(zeta) != (0.0, 0.0)):
        raise _field(path, "algorithm", "exact mode needs no variation and zeta = [0, 0]")
    if sc.splits > 1 and sc.variation.kind == "none":
        raise _field(path, "splits", "splitting needs interval dynamics (a variation)")
    if sc.requirement:
        eps = sc.requirement.get("epsilon")
        if not isinstance(eps, (int, float)) or not eps > 0:
            raise _field(path, "requirement", f"epsilon must be positive, got {eps!r}")
    return sc


def load_scenario(path, **overrides):
    """Scenario from a JSON file; keyword overrides (command-line flags) win."""
    sc = parse_scenario(read_json(path), str(path))
    sc = replace(sc, **{k: v for k, v in overrides.items() if v is not None})
    return validate(sc, str(path))


# ── Outputs ──────────────────────────────────────────────────────────────────

def write_bounds_csv(runs, path):
    table = bounds_table(runs)
    columns = list(table)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in zip(*(table[c] for c in columns)):
            writer.writerow([int(v) if c in ("k", "flowpipe") else format(float(v), ".17g")
                             for c, v in zip(columns, row)])
    return len(table["k"])


def write_metrics(metrics, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(metrics, f, indent=2)
        f.write("\n")


def _jsonable(x):
    if x is None:
        return None
    return "inf" if math.isinf(x) else x


# ── Main ─────────────────────────────────────────────────────────────────────

def run_scenario(sc: Scenario, oracle=0, record=True):
    """Reach, verify and export one scenario; returns the metrics dict."""
    phs = sc.build()
    parts = split_parametric(phs, sc.splits, sc.split_entry) if sc.splits > 1 else [phs]
    opts = ReachOptions(sc.delta, sc.algorithm, sc.max_order, taylor_order=sc.taylor_order)

    start = time.perf_counter()
    if len(parts) > 1:
        print(f"[SPLIT] {len(parts)} sub-runs on entry {sc.split_entry} with {REACH_THREADS} thread(s)")
        with ThreadPoolExecutor(max_workers=max(1, REACH_THREADS)) as pool:
            runs = list(pool.map(lambda p: run_analysis(p, opts), parts))
    else:
        runs = [run_analysis(phs, opts)]
    runtime = time.perf_counter() - start

    metrics = {
        "name": sc.name,
        "model": sc.model,
        "variation": sc.variation.kind,
        "variation_amount": sc.variation.amount,
        "algorithm": sc.algorithm,
        "delta": sc.delta,
        "max_order": _jsonable(sc.max_order),
        "zeta": list(phs.zeta),
        "splits": len(runs),
        "flowpipes": len(runs[0].flowpipes),
        "sets": runs[0].set_count,
    }
    for j, var in enumerate(phs.names):
        metrics[f"final_diameter_{var}"] = final_diameter(runs, j)

    if sc.requirement:
        x0 = sc.requirement.get("x0", getattr(sc.model_params, "disk_position", 0.0))
        result = check_requirement(runs, sc.requirement["epsilon"], x0, velocity_row(phs))
        metrics["requirement"] = {
            "epsilon": result.epsilon,
            "x0": x0,
            "verified": result.verified,
            "t_c": result.t_c,
            "v_r": result.v_r,
            "window": "t_c to the end of the last flowpipe",
        }
        label = f"t_c={result.t_c * 1e3:.3f} ms, v_r={result.v_r * 1e3:.4f} mm/s" if result.verified else "NOT verified"
        print(f"[VERIFY] epsilon={result.epsilon:g}: {label}")

    if oracle:
        rng = np.random.default_rng(sc.seed)
        dt = max(sc.delta / 2.0, phs.horizon / ORACLE_SAMPLES)
        violations = sum(random_check(p, r, rng, oracle, dt) for p, r in zip(parts, runs))
        metrics["oracle"] = {"trajectories": oracle * len(parts), "violations": violations, "dt": dt}
        print(f"[ORACLE] {oracle * len(parts)} trajectories, {violations} violations")

    metrics["runtime"] = runtime

    out = Path(sc.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = write_bounds_csv(runs, out / f"{sc.name}.bounds.csv")
    write_metrics(metrics, out / f"{sc.name}.metrics.json")
    print(f"[REACH] wrote {rows} rows to {out / (sc.name + '.bounds.csv')} in {runtime:.3f}s of reach time")

    if record:
        try:
            ledger.init_db()
            ledger.record_run(metrics)
        except Exception as e:
            print(f"[DB] ledger unavailable: {e}")
    return metrics


def build_parser():
    parser = argparse.ArgumentParser(prog="analyze", description="Periodic hybrid reachability analysis")
    parser.add_argument("config", type=Path, help="scenario JSON file")
    parser.add_argument("--algorithm", choices=ALGORITHMS)
    parser.add_argument("--delta", type=float, help="time step in seconds")
    parser.add_argument("--order", type=float, dest="max_order", help="max zonotope order")
    parser.add_argument("--splits", type=int, help="partitions of the varied parameter")
    parser.add_argument("--strict", action="store_true", help="exit 1 when the requirement fails")
    parser.add_argument("--oracle", type=int, default=0, metavar="N", help="random simulation checks")
    parser.add_argument("--no-ledger", action="store_true", help="do not record the run")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.config, algorithm=args.algorithm, delta=args.delta,
                           max_order=args.max_order, splits=args.splits)
    except ConfigError as e:
        print(f"[CONFIG ERROR] {e}")
        return 2

    print("╔══ Reachability analysis ══════════════════════")
    print(f"║  Scenario: {sc.name} ({sc.model}, variation {sc.variation.kind})")
    print(f"║  Algorithm: {sc.algorithm} | delta: {sc.delta:g} | order: {sc.max_order:g}")
    print(f"║  Splits: {sc.splits} | Threads: {REACH_THREADS}")
    print("╚═══════════════════════════════════════════════")

    try:
        metrics = run_scenario(sc, oracle=args.oracle, record=not args.no_ledger)
    except AnalysisError as e:
        print(f"[ANALYSIS ERROR] {e}")
        return 3
    except InputError as e:
        print(f"[CONFIG ERROR] {e}")
        return 2

    req = metrics.get("requirement")
    if args.strict and req is not None and not req["verified"]:
        return 1
    if args.strict and metrics.get("oracle", {}).get("violations"):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
