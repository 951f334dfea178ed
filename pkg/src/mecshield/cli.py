"""Command-line entry point: train / run / eval / gen.

Exit codes: 0 success, 1 config error, 2 data error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .config import RunConfig, config_to_dict, load_config, reference_config
from .errors import ConfigError, DataError
from .features import MODE_DIM, FeatureMode, NormalizationSpec
from .harness import METRIC_COLUMNS, flows_to_samples, run_matrix
from .som import BENIGN, MALICIOUS, SomMap, init_map
from .traffic import (AttackProfile, BenignProfile, LABEL_MALICIOUS,
                      default_benign_profile, gen_attack, gen_benign,
                      load_flow_csv, write_flow_csv)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_or_default_config(args) -> RunConfig:
    rc = load_config(args.config) if args.config else reference_config()
    if getattr(args, "seed", None) is not None:
        rc.seed = args.seed
        rc.scenario.seed = args.seed
    if getattr(args, "out", None):
        rc.output_dir = args.out
    if getattr(args, "scheme", None):
        for s in args.scheme:
            if s not in rc.schemes:
                raise ConfigError(f"--scheme {s!r} not in configured schemes {rc.schemes}")
        rc.schemes = list(args.scheme)
    return rc


# -- commands ---------------------------------------------------------------

def cmd_train(args) -> int:
    rc = _load_or_default_config(args)
    sc = rc.scenario
    flows = []
    for path in args.dataset:
        flows.extend(load_flow_csv(path))
    if not flows:
        raise DataError("training dataset is empty; no map written")
    vectors, labels = flows_to_samples(flows, sc.feature_mode, sc.norm_spec,
                                       sc.window_length)
    m = init_map(sc.som_width, sc.som_height, MODE_DIM[sc.feature_mode],
                 seed=sc.hyperparams.rng_seed)
    m.train(vectors, labels, sc.hyperparams)
    m.label_neurons()
    out_dir = Path(rc.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    map_path = out_dir / "som_map.json"
    m.save(map_path)
    summary = {
        "epoch": m.epoch,
        "samples": len(vectors),
        "neurons": m.neuron_count,
        "labeled_benign": int((m.labels == BENIGN).sum()),
        "labeled_malicious": int((m.labels == MALICIOUS).sum()),
        "per_neuron": [
            {"index": j, "label": str(m.labels[j]), "hit_count": int(m.hit_counts[j]),
             "benign_wins": int(m.benign_wins[j]),
             "malicious_wins": int(m.malicious_wins[j])}
            for j in range(m.neuron_count)
        ],
    }
    with open(out_dir / "training_summary.json", "w") as f:
        json.dump(summary, f, sort_keys=True, indent=1)
        f.write("\n")
    print(f"trained map: epoch={m.epoch} "
          f"benign_neurons={summary['labeled_benign']} "
          f"malicious_neurons={summary['labeled_malicious']} -> {map_path}")
    return 0


def cmd_run(args) -> int:
    rc = _load_or_default_config(args)
    out_dir = Path(rc.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        base = rc.scenario_for(rc.schemes[0], rc.attack_levels[0])
        rows, logs = run_matrix(base, rc.schemes, rc.attack_levels)

        metrics_path = out_dir / "metrics.csv"
        with open(metrics_path, "w") as f:
            f.write(",".join(METRIC_COLUMNS) + "\n")
            for row in rows:
                f.write(",".join(_fmt(row[c]) for c in METRIC_COLUMNS) + "\n")
        written.append(metrics_path)

        events_path = out_dir / "events.jsonl"
        with open(events_path, "w") as f:
            for scheme in rc.schemes:
                for level in rc.attack_levels:
                    for e in logs[(scheme, float(level))]:
                        f.write(json.dumps(e, sort_keys=True) + "\n")
        written.append(events_path)

        summary_path = out_dir / "summary.json"
        with open(summary_path, "w") as f:
            json.dump({
                "config": config_to_dict(rc),
                "digests": {
                    "metrics_csv": _sha256(metrics_path),
                    "events_jsonl": _sha256(events_path),
                    "cells": {f"{r['scheme']}/{_fmt(r['attack_level'])}": r["event_digest"]
                              for r in rows},
                },
            }, f, sort_keys=True, indent=1)
            f.write("\n")
        written.append(summary_path)
    except Exception:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    print(f"wrote {len(rows)} metric rows to {out_dir}/metrics.csv")
    return 0


def cmd_eval(args) -> int:
    m = SomMap.load(args.map)
    modes = {dim: mode for mode, dim in MODE_DIM.items()}
    if m.dim not in modes:
        raise DataError(f"map dimension {m.dim} matches no feature mode "
                        f"(expected one of {sorted(modes)})")
    rc = _load_or_default_config(args)
    sc = rc.scenario
    if MODE_DIM[modes[m.dim]] != m.dim:  # defensive; modes is keyed by dim
        raise DataError(f"map dim {m.dim} vs feature dim {MODE_DIM[modes[m.dim]]}")
    flows = load_flow_csv(args.dataset)
    if not flows:
        raise DataError(f"{args.dataset}: no flows to evaluate")
    vectors, labels = flows_to_samples(flows, modes[m.dim], sc.norm_spec,
                                       sc.window_length)
    predicted = m.classify_batch(vectors)
    tp = fp = tn = fn = 0
    for truth, pred in zip(labels, predicted):
        if truth == MALICIOUS:
            if pred == MALICIOUS:
                tp += 1
            else:
                fn += 1
        else:
            if pred == MALICIOUS:
                fp += 1
            else:
                tn += 1
    dr = tp / (tp + fn) if (tp + fn) else None
    acc = (tp + tn) / len(labels) if labels else None
    result = {"tp": tp, "fp": fp, "tn": tn, "fn": fn,
              "detection_rate": dr, "accuracy": acc, "samples": len(labels)}
    print(json.dumps(result, sort_keys=True))
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "eval.json", "w") as f:
            json.dump(result, f, sort_keys=True, indent=1)
            f.write("\n")
    return 0


def cmd_gen(args) -> int:
    seed = args.seed if args.seed is not None else 0
    if args.kind == "benign":
        profile = default_benign_profile(args.category)
        flows = gen_benign(profile, args.duration, seed)
    else:
        profile = AttackProfile(scenario=args.scenario, sub_mode=args.sub_mode,
                                target_addr=args.target_addr,
                                bot_count=args.bots)
        flows = gen_attack(profile, args.duration, seed)
    write_flow_csv(args.output, flows)
    print(f"wrote {len(flows)} flows to {args.output}")
    return 0


# -- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mecshield",
        description="Edge-based cooperative DDoS filtering simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="YAML run configuration (default: built-in reference)")
        sp.add_argument("--seed", type=int, help="override the run seed")
        sp.add_argument("--out", help="override the output directory")

    sp = sub.add_parser("train", help="train a SOM from labeled flow CSVs")
    common(sp)
    sp.add_argument("dataset", nargs="+", help="flow CSV file(s)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("run", help="run the scheme/level comparison matrix")
    common(sp)
    sp.add_argument("--scheme", action="append",
                    help="restrict to a scheme (repeatable)")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("eval", help="evaluate a serialized map on a labeled CSV")
    common(sp)
    sp.add_argument("map", help="serialized SOM map (json)")
    sp.add_argument("dataset", help="labeled flow CSV")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("gen", help="emit a synthetic flow CSV")
    sp.add_argument("kind", choices=["benign", "attack"])
    sp.add_argument("output", help="destination CSV path")
    sp.add_argument("--category", default="sensor",
                    choices=["sensor", "monitor", "alarm"])
    sp.add_argument("--scenario", default="app_layer",
                    choices=["volumetric", "app_layer"])
    sp.add_argument("--sub-mode", dest="sub_mode", default="session_flood")
    sp.add_argument("--target-addr", dest="target_addr", type=int,
                    default=0xD0000001)
    sp.add_argument("--bots", type=int, default=10)
    sp.add_argument("--duration", type=float, default=60.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
