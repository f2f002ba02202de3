"""Command-line experiment runner.

    rebackoff run --scenario batch.yaml --out results/
    rebackoff sweep --scenario sweep.yaml --out results/ --jobs 4
    rebackoff compare --scenario burst.yaml --protocols rebackoff2,beb
    rebackoff verify sigma

Exit status: 0 on success, 1 when a verification criterion fails, 2 for an
invalid scenario, 3 when a run hit ``max_slots`` before every packet was
delivered.
"""
import argparse
import copy
import csv
import json
import os
import sys

import jsonschema
import yaml

from .adversary import ConfigError, make_adversary
from .engine import RunConfig, run
from .experiments import AGGREGATES, aggregate, map_runs, summarize
from .analysis import run_metrics
from .protocols import ProtocolParams
from . import suites

EXIT_OK, EXIT_FAILED, EXIT_SCHEMA, EXIT_INCOMPLETE = 0, 1, 2, 3

_NUM = {"type": "number"}
_INT = {"type": "integer"}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["protocol", "adversary"],
    "properties": {
        "protocol": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["rebackoff2", "rebackoff1", "beb"]},
                "c": _NUM,
                "d": _NUM,
                "gamma": _NUM,
            },
        },
        "adversary": {"type": "object", "required": ["kind"]},
        "seed": _INT,
        "seeds": {"oneOf": [{"type": "integer", "minimum": 1}, {"type": "array", "items": _INT, "minItems": 1}]},
        "stop": {"enum": ["all_done", "max_slots"]},
        "max_slots": {"type": "integer", "minimum": 0},
        "verbosity": {"enum": ["summary", "per_packet"]},
        "window": {"type": "array", "items": _INT, "minItems": 2, "maxItems": 2},
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "trace_path": {"type": "string"},
                "metrics_path": {"type": "string"},
                "csv_path": {"type": "string"},
            },
        },
    },
}

SWEEP_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["base", "param", "values"],
    "properties": {
        "base": {"type": "object"},
        "param": {"type": "string"},
        "values": {"type": "array", "minItems": 2},
        "seeds": {"type": "integer", "minimum": 10},
        "aggregate": {"enum": list(AGGREGATES)},
        "outputs": SCENARIO_SCHEMA["properties"]["outputs"],
    },
}

SWEEP_COLUMNS = ["param", "value", "seeds", "lambda", "Lambda", "waste", "makespan", "mean_attempts", "mean_resets"]
COMPARE_METRICS = ["lambda", "Lambda", "waste", "makespan", "backlog", "window_lambda", "mean_attempts", "mean_resets"]


class ScenarioError(Exception):
    pass


def load_document(path):
    with open(path) as fh:
        text = fh.read()
    try:
        doc = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ScenarioError(f"{path}: cannot parse: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: top level must be a mapping")
    return doc


def validate(doc, schema, where="scenario"):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{where}: {loc}: {exc.message}") from None


def scenario_config(doc, seed=None):
    """RunConfig from a validated scenario mapping."""
    validate(doc, SCENARIO_SCHEMA)
    proto = dict(doc["protocol"])
    kind = proto.pop("kind")
    try:
        params = ProtocolParams(**proto)
        make_adversary(doc["adversary"])
        return RunConfig(
            protocol=kind,
            params=params,
            adversary=doc["adversary"],
            seed=doc.get("seed", 0) if seed is None else seed,
            stop=doc.get("stop", "all_done"),
            max_slots=doc.get("max_slots", 10_000_000),
            verbosity=doc.get("verbosity", "summary"),
        )
    except (ConfigError, ValueError) as exc:
        raise ScenarioError(f"scenario: {exc}") from None


def scenario_seeds(doc, seed=None):
    base = doc.get("seed", 0) if seed is None else seed
    seeds = doc.get("seeds")
    if seeds is None:
        return [base]
    if isinstance(seeds, int):
        return list(range(base, base + seeds))
    return list(seeds)


def _output_path(doc, key, default, out):
    path = doc.get("outputs", {}).get(key)
    if path is None:
        return os.path.join(out or ".", default)
    return os.path.join(out, path) if out and not os.path.isabs(path) else path


def _ensure_dir(path):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)


def _write_json(path, obj):
    _ensure_dir(path)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, header_obj, columns, rows):
    _ensure_dir(path)
    with open(path, "w", newline="") as fh:
        fh.write("# config: " + json.dumps(header_obj, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])


def read_csv(path):
    """Rows of a CSV written by this tool, numbers parsed back."""
    with open(path) as fh:
        lines = [l for l in fh if not l.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        parsed = {}
        for k, v in row.items():
            if v == "":
                parsed[k] = None
                continue
            try:
                parsed[k] = int(v)
            except ValueError:
                try:
                    parsed[k] = float(v)
                except ValueError:
                    parsed[k] = v
        out.append(parsed)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args):
    doc = load_document(args.scenario)
    cfg = scenario_config(doc, args.seed)
    trace = run(cfg)
    trace_path = _output_path(doc, "trace_path", "trace.jsonl", args.out)
    metrics_path = _output_path(doc, "metrics_path", "metrics.json", args.out)
    _ensure_dir(trace_path)
    trace.write(trace_path)
    m = run_metrics(trace)
    _write_json(metrics_path, {
        "config": cfg.to_dict(),
        "complete": bool(trace.complete),
        "slots": trace.slots,
        "packets": trace.n_packets,
        "backlog": trace.live_at_end,
        "metrics": m.to_dict(),
    })
    print(f"{trace.slots} slots, {m.successes}/{trace.n_packets} delivered; wrote {trace_path}, {metrics_path}")
    if cfg.stop == "all_done" and not trace.complete:
        print("run stopped at max_slots with packets still live", file=sys.stderr)
        return EXIT_INCOMPLETE
    return EXIT_OK


def _set_path(doc, dotted, value):
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            raise ScenarioError(f"sweep: param path {dotted!r} does not exist in base")
        node = node[k]
    node[keys[-1]] = value


def cmd_sweep(args):
    sweep = load_document(args.scenario)
    validate(sweep, SWEEP_SCHEMA, "sweep")
    seeds = sweep.get("seeds", 10)
    how = sweep.get("aggregate", "median")
    configs, points = [], []
    for value in sweep["values"]:
        doc = copy.deepcopy(sweep["base"])
        _set_path(doc, sweep["param"], value)
        cfg = scenario_config(doc, args.seed)
        points.append(value)
        configs.extend(cfg.with_(seed=cfg.seed + s) for s in range(seeds))
    results = map_runs(configs, args.jobs, prefix_check=False)
    rows = []
    incomplete = False
    for i, value in enumerate(points):
        chunk = results[i * seeds: (i + 1) * seeds]
        incomplete |= any(not r["complete"] for r in chunk)
        rows.append([sweep["param"], value, seeds] + [aggregate([r[k] for r in chunk], how) for k in SWEEP_COLUMNS[3:]])
    path = _output_path(sweep, "csv_path", "sweep.csv", args.out)
    base_seed = sweep["base"].get("seed", 0) if args.seed is None else args.seed
    header = {"sweep": sweep, "seed": base_seed, "aggregate": how}
    _write_csv(path, header, SWEEP_COLUMNS, rows)
    print(f"{len(rows)} sweep points x {seeds} seeds; wrote {path}")
    return EXIT_INCOMPLETE if incomplete else EXIT_OK


def compare_columns(protocols):
    names, seen = [], {}
    for p in protocols:
        seen[p] = seen.get(p, 0) + 1
        names.append(p if seen[p] == 1 else f"{p}.{seen[p]}")
    return names, ["seed"] + [f"{g}:{m}" for g in names for m in COMPARE_METRICS]


def cmd_compare(args):
    doc = load_document(args.scenario)
    protocols = [p.strip() for p in args.protocols.split(",") if p.strip()]
    if not protocols:
        raise ScenarioError("compare needs at least one protocol")
    seeds = scenario_seeds(doc, args.seed)
    groups, columns = compare_columns(protocols)
    per_group = []
    for p in protocols:
        d = copy.deepcopy(doc)
        d["protocol"] = {**d["protocol"], "kind": p}
        if p == "beb":
            d["protocol"] = {"kind": "beb"}
        base = scenario_config(d)
        cfgs = [base.with_(seed=s) for s in seeds]
        window = tuple(doc["window"]) if "window" in doc else (0, base.max_slots)
        per_group.append(map_runs(cfgs, args.jobs, window=window, prefix_check=False))
    rows = []
    for i, s in enumerate(seeds):
        rows.append([s] + [res[i][m] for res in per_group for m in COMPARE_METRICS])
    rows.append(["median"] + [aggregate([r[m] for r in res], "median") for res in per_group for m in COMPARE_METRICS])
    path = _output_path(doc, "csv_path", "compare.csv", args.out)
    _write_csv(path, {"scenario": doc, "protocols": protocols, "seeds": seeds}, columns, rows)
    for g, res in zip(groups, per_group):
        print(f"{g}: median backlog {aggregate([r['backlog'] for r in res], 'median'):g}, "
              f"median window throughput {aggregate([r['window_lambda'] for r in res], 'median')}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_verify(args):
    seed = 0 if args.seed is None else args.seed
    verdicts = suites.run_suite(args.suite, seed=seed, jobs=args.jobs)
    for v in verdicts:
        print(v.line())
    if args.out:
        _write_json(os.path.join(args.out, f"verify-{args.suite}.json"),
                    {"suite": args.suite, "seed": seed, "verdicts": [v.to_dict() for v in verdicts]})
    return EXIT_OK if all(v.passed for v in verdicts) else EXIT_FAILED


def build_parser():
    ap = argparse.ArgumentParser(prog="rebackoff", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", required=True, help="YAML or JSON scenario file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = sub.add_parser("run", help="simulate one scenario")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="sweep one parameter over many seeds")
    common(p)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("compare", help="run one scenario under several protocols")
    common(p)
    p.add_argument("--protocols", default="rebackoff2,beb", help="comma-separated protocol list")
    p.set_defaults(func=cmd_compare)
    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=suites.SUITES)
    common(p, scenario=False)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
