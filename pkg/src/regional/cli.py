"""Command-line interface: dataset synthesis, experiment runs, and reports.

``synth`` writes a synthetic ground-truth file, ``run`` executes one
experiment configuration (config file values overridden by flags), and
``report`` merges several run directories into comparison tables.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from regional import harness, ingest, synthgen
from regional.informativeness import MethodKind
from regional.selection import ALLOWED_METHODS, Approach, check_pairing

_PRESETS = {"xview": synthgen.xview_like, "coco": synthgen.coco_like}


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip() != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regional",
        description="Active-learning selection engine with image-, object- and region-level acquisition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset and write it as ground truth")
    p_synth.add_argument("--out", required=True, help="output ground-truth JSON path")
    p_synth.add_argument("--preset", choices=sorted(_PRESETS), default="xview")
    p_synth.add_argument("--config", help="JSON file with synthetic-regime fields (overrides preset)")
    p_synth.add_argument("--images", type=int, help="number of images")
    p_synth.add_argument("--seed", type=int, help="generator seed")

    p_run = sub.add_parser("run", help="execute one experiment configuration")
    p_run.add_argument("--config", help="experiment config JSON; flags override its values")
    p_run.add_argument("--approach", choices=[a.value for a in Approach])
    p_run.add_argument("--method", choices=[m.value for m in MethodKind])
    p_run.add_argument("--alpha", type=float)
    p_run.add_argument("--beta", type=float)
    p_run.add_argument("--budget", type=int)
    p_run.add_argument("--splits", type=int)
    p_run.add_argument("--seed", type=_parse_seeds, help="comma-separated seed list")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--preset", choices=sorted(_PRESETS), help="synthetic dataset preset (when no config)")
    p_run.add_argument("--images", type=int, help="synthetic image count override")

    p_report = sub.add_parser("report", help="aggregate run directories into comparison tables")
    p_report.add_argument("dirs", nargs="+", help="run output directories")
    p_report.add_argument("--out", default=".", help="directory for comparison CSVs")
    return parser


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _synth_config(args) -> synthgen.SynthConfig:
    cfg = _PRESETS[args.preset]()
    fields = {}
    if args.config:
        fields.update(_load_json(args.config))
    if args.images is not None:
        fields["n_images"] = args.images
    if args.seed is not None:
        fields["seed"] = args.seed
    if fields:
        import dataclasses

        cfg = dataclasses.replace(cfg, **fields)
    return cfg


def _cmd_synth(args) -> int:
    cfg = _synth_config(args)
    dataset = synthgen.generate_dataset(cfg)
    ingest.write_dataset(dataset, args.out)
    print(
        f"wrote {args.out}: {len(dataset.images)} images, "
        f"{dataset.total_instances} annotations, {len(dataset.categories)} categories"
    )
    return 0


def _experiment_config(args) -> harness.ExperimentConfig:
    doc: dict = {}
    if args.config:
        doc = _load_json(args.config)

    approach_name = args.approach or doc.get("approach")
    method_name = args.method or doc.get("method")
    if approach_name is None or method_name is None:
        raise SystemExit("an approach and a method are required (flag or config file)")
    try:
        approach = Approach(approach_name)
        method = MethodKind(method_name)
    except ValueError as exc:
        raise SystemExit(f"error: {exc}")
    # reject an invalid pairing before touching any data
    try:
        check_pairing(approach, method)
    except ValueError as exc:
        raise SystemExit(f"error: {exc}")

    dataset_doc = doc.get("dataset", {})
    synth_cfg = None
    dataset_path = dataset_doc.get("path")
    detections = dataset_doc.get("detections")
    if "synthetic" in dataset_doc:
        synth_cfg = synthgen.SynthConfig(**dataset_doc["synthetic"])
    if args.preset:
        preset = _PRESETS[args.preset]
        synth_cfg = preset(args.images) if args.images else preset()
        dataset_path = None
        detections = None
    if synth_cfg is None and dataset_path is None:
        raise SystemExit("no dataset source: give a config with a 'dataset' entry or --preset")

    detector = None
    if "detector" in doc:
        detector = synthgen.DetectorConfig(**doc["detector"])
    elif synth_cfg is not None:
        detector = synthgen.detector_for(synth_cfg, seed=0, curated=args.preset == "coco")

    seeds = args.seed if args.seed is not None else tuple(doc.get("seeds", (0, 1, 2, 3, 4)))
    try:
        return harness.ExperimentConfig(
            approach=approach,
            method=method,
            synth=synth_cfg,
            dataset_path=dataset_path,
            detection_paths=tuple(detections) if detections else None,
            detector=detector,
            alpha=args.alpha if args.alpha is not None else doc.get("alpha", 0.5),
            beta=args.beta if args.beta is not None else doc.get("beta", 3.0),
            p=doc.get("p", 1.0),
            k=doc.get("k", 50),
            budget=args.budget if args.budget is not None else doc.get("budget", 1500),
            n_splits=args.splits if args.splits is not None else doc.get("splits", 4),
            seeds=seeds,
            out_dir=args.out or doc.get("out"),
            floor_at_one=doc.get("floor_at_one", True),
        )
    except ValueError as exc:
        raise SystemExit(f"error: {exc}")


def _cmd_run(args) -> int:
    config = _experiment_config(args)
    result = harness.run_experiment(config)
    out_dir = config.out_dir or "run_output"
    harness.write_run_outputs(result, out_dir)
    final = [res.reports[-1] for res in result.seed_results]
    mean_pct = sum(r.labeled_pct_total for r in final) / len(final)
    print(
        f"{config.approach.value}({config.method.value}): {config.n_splits} splits x "
        f"{len(config.seeds)} seeds done; final labeled {mean_pct:.2f}% -> {out_dir}"
    )
    return 0


def _read_aggregate(run_dir: Path) -> tuple[dict, dict]:
    meta = json.loads((run_dir / "run_meta.json").read_text())
    table: dict = {}
    with open(run_dir / "aggregate.csv") as fh:
        for row in csv.DictReader(fh):
            key = (int(row["split"]), row["metric"])
            table[key] = (float(row["mean"]), float(row["std"]))
    return meta, table


def _cmd_report(args) -> int:
    runs = []
    for d in args.dirs:
        run_dir = Path(d)
        try:
            meta, table = _read_aggregate(run_dir)
        except FileNotFoundError as exc:
            raise SystemExit(f"error: {run_dir} is not a run directory ({exc})")
        runs.append((f"{meta['approach']} ({meta['method']})", meta, table))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n_splits = max(s for _, _, table in runs for (s, _m) in table) + 1

    metrics = ["labeled_pct_total", "top_group_pct", "middle_group_pct", "bottom_group_pct", "rare_labels"]
    for metric in metrics:
        path = out / f"comparison_{metric}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["approach_method"] + [f"split_{i}" for i in range(n_splits)])
            for label, _meta, table in runs:
                cells = []
                for i in range(n_splits):
                    mean, std = table.get((i, metric), (float("nan"), float("nan")))
                    cells.append(f"{mean:.2f} ({std:.2f})")
                writer.writerow([label] + cells)

    # series for labels-vs-found curves: one row per (run, split)
    with open(out / "rare_series.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["approach_method", "split", "mean_cumulative_labels", "mean_rare_labels"])
        for label, _meta, table in runs:
            for i in range(n_splits):
                labels = table.get((i, "cumulative_labels"), (float("nan"),))[0]
                rare = table.get((i, "rare_labels"), (float("nan"),))[0]
                writer.writerow([label, i, repr(labels), repr(rare)])

    print(f"split-by-split labeled % (mean over seeds):")
    for label, _meta, table in runs:
        cells = [
            f"{table.get((i, 'labeled_pct_total'), (float('nan'), 0.0))[0]:6.2f}"
            for i in range(n_splits)
        ]
        print(f"  {label:28s} " + " ".join(cells))
    print(f"comparison tables written to {out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "report":
            return _cmd_report(args)
    except SystemExit:
        raise
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
