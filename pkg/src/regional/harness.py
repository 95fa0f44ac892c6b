"""Experiment driver: configuration, the multi-split loop, metrics, reports.

Split 0 is the initial pool: its labels consume the initial budget and no
querying happens. Active splits 1..n then each run one detect / score /
select / query loop until the split budget completes. Seeds run independently
on a freshly relabeled dataset; aggregates report mean and sample standard
deviation across seeds.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from regional import ingest
from regional.informativeness import MethodKind, method_scores
from regional.oracle import (
    BudgetLedger,
    oracle_image_query,
    oracle_object_query,
    oracle_region_query,
)
from regional.scene import (
    CandidateObject,
    PoolState,
    SceneDataset,
    apply_labels,
    round_half_up,
    sample_initial_pool,
)
from regional.selection import (
    Approach,
    ImageLevelSelector,
    ObjectLevelSelector,
    Region,
    RegionLevelSelector,
    SelectionParams,
    check_pairing,
)
from regional.synthgen import DetectorConfig, SynthConfig, generate_dataset, simulate_detections

# substream tags so the per-split random streams never collide
_STREAM_MODEL_RAND = 2
_STREAM_IMAGE_RANDOM = 3


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment."""

    approach: Approach
    method: MethodKind
    synth: SynthConfig | None = None
    dataset_path: str | None = None
    detection_paths: tuple[str, ...] | None = None  # one dump per active split
    detector: DetectorConfig | None = None
    alpha: float = 0.5
    beta: float = 3.0
    p: float = 1.0
    k: int = 50
    budget: int = 1500
    n_splits: int = 4
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    out_dir: str | None = None
    floor_at_one: bool = True

    def __post_init__(self):
        check_pairing(self.approach, self.method)
        if (self.synth is None) == (self.dataset_path is None):
            raise ValueError("exactly one dataset source required: synth config or dataset path")
        if self.n_splits < 1:
            raise ValueError(f"n_splits must be >= 1, got {self.n_splits}")
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")
        if not self.seeds:
            raise ValueError("at least one seed required")
        if self.detection_paths is not None and len(self.detection_paths) < self.n_splits:
            raise ValueError(
                f"{len(self.detection_paths)} detection dumps for {self.n_splits} splits"
            )
        if self.synth is not None and self.detection_paths is not None:
            raise ValueError("detection dumps only apply to a dataset loaded from disk")

    def selection_params(self) -> SelectionParams:
        return SelectionParams(
            alpha=self.alpha,
            beta=self.beta,
            budget=self.budget,
            approach=self.approach,
            method=self.method,
        )


@dataclass(frozen=True)
class CategoryGroups:
    """Categories ranked by dataset instance count, split into three groups."""

    size: int
    top: tuple[int, ...]
    middle: tuple[int, ...]
    bottom: tuple[int, ...]

    @property
    def rule(self) -> str:
        return (
            f"categories ranked descending by instance count (ties by id); "
            f"top = ranks 1-{self.size}, middle = {self.size} centered ranks, "
            f"bottom = last {self.size}; rare = bottom group"
        )


def category_groups(dataset: SceneDataset) -> CategoryGroups:
    """Group rule: exact groups of 10 when there are >= 30 categories,
    otherwise decile-sized groups (at least 1)."""
    cats = sorted(dataset.categories, key=lambda c: (-c.instance_count, c.id))
    n = len(cats)
    size = 10 if n >= 30 else max(1, round_half_up(n / 10.0))
    start = (n - size) // 2
    return CategoryGroups(
        size=size,
        top=tuple(c.id for c in cats[:size]),
        middle=tuple(c.id for c in cats[start : start + size]),
        bottom=tuple(c.id for c in cats[n - size :]),
    )


def _group_pct(dataset: SceneDataset, labels: Mapping[int, int], ids: Sequence[int]) -> float:
    total = sum(dataset.category_by_id(cid).instance_count for cid in ids)
    if total == 0:
        return 0.0
    labeled = sum(labels.get(cid, 0) for cid in ids)
    return 100.0 * labeled / total


def compute_group_breakdown(
    dataset: SceneDataset, per_category_labels: Mapping[int, int]
) -> dict[str, float]:
    """Labeled-% over the top / middle / bottom category groups."""
    groups = category_groups(dataset)
    return {
        "top": _group_pct(dataset, per_category_labels, groups.top),
        "middle": _group_pct(dataset, per_category_labels, groups.middle),
        "bottom": _group_pct(dataset, per_category_labels, groups.bottom),
    }


@dataclass(frozen=True)
class SplitReport:
    """Metrics for one (seed, split); label counts are cumulative."""

    seed: int
    split_index: int
    labels_applied: int
    background_queries: int
    interactions: int
    truncated: bool
    cumulative_labels: int
    labeled_pct_total: float
    per_category_labeled: dict[int, int]
    per_category_new: dict[int, int]
    top_group_pct: float
    middle_group_pct: float
    bottom_group_pct: float
    rare_labels: int
    rare_pct: float
    query_area: float
    images_touched: int


@dataclass
class SplitOutcome:
    """Raw outcome of one active split's greedy loop."""

    ledger: BudgetLedger
    picks: list = field(default_factory=list)
    truncated: bool = False


@dataclass
class SeedResult:
    seed: int
    reports: list[SplitReport]
    ledgers: list[BudgetLedger]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    dataset: SceneDataset
    seed_results: list[SeedResult]

    def aggregate(self) -> list[dict]:
        """Mean and sample std of each numeric metric per split, over seeds."""
        metrics = (
            "labels_applied",
            "background_queries",
            "interactions",
            "cumulative_labels",
            "labeled_pct_total",
            "top_group_pct",
            "middle_group_pct",
            "bottom_group_pct",
            "rare_labels",
            "rare_pct",
            "query_area",
            "images_touched",
        )
        rows = []
        n_reports = len(self.seed_results[0].reports)
        for split_idx in range(n_reports):
            for metric in metrics:
                values = [
                    float(getattr(res.reports[split_idx], metric)) for res in self.seed_results
                ]
                mean = float(np.mean(values))
                std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
                rows.append(
                    {"split": split_idx, "metric": metric, "mean": mean, "std": std}
                )
        return rows


def run_split(
    dataset: SceneDataset,
    pool: PoolState,
    candidates: Sequence[CandidateObject],
    params: SelectionParams,
    seed: int,
    split_index: int,
) -> SplitOutcome:
    """Run one split's greedy select/query/charge loop until the budget completes.

    Candidates are scored once; the loop then alternates argmax selection,
    an oracle interaction, label application, and consumption of resolved
    candidates. Pool exhaustion before the budget ends the split as truncated.
    """
    ledger = BudgetLedger(params.budget)
    outcome = SplitOutcome(ledger=ledger)

    if params.approach is Approach.IMAGE_LEVEL:
        _run_image_split(dataset, pool, candidates, params, seed, split_index, outcome)
    else:
        _run_object_or_region_split(dataset, pool, candidates, params, seed, split_index, outcome)
    return outcome


def _run_image_split(dataset, pool, candidates, params, seed, split_index, outcome):
    scores_by_image: dict[int, np.ndarray] = {}
    rng = None
    if params.method is MethodKind.RANDOM:
        rng = np.random.default_rng(
            np.random.SeedSequence([seed, split_index, _STREAM_IMAGE_RANDOM])
        )
    else:
        psi = method_scores(candidates, params.method)
        by_image: dict[int, list[float]] = {}
        for cand, value in zip(candidates, psi):
            by_image.setdefault(cand.image_id, []).append(float(value))
        scores_by_image = {img: np.array(vals) for img, vals in by_image.items()}

    selector = ImageLevelSelector(pool.unlabeled_image_ids, scores_by_image, params.method, rng)
    ledger = outcome.ledger
    while not ledger.complete:
        image_id = selector.next_query()
        if image_id is None:
            outcome.truncated = True
            break
        image = dataset.images[image_id]
        response = oracle_image_query(image, dataset)
        ledger.charge(response, dataset)
        apply_labels(pool, response.returned_gt_ids, dataset)
        if not image.gt_ids:
            pool.mark_image_exhausted(image_id, dataset)
        selector.mark_queried(image_id)
        outcome.picks.append(image_id)


def _run_object_or_region_split(dataset, pool, candidates, params, seed, split_index, outcome):
    rng = None
    if params.method is MethodKind.MODEL_RAND:
        rng = np.random.default_rng(
            np.random.SeedSequence([seed, split_index, _STREAM_MODEL_RAND])
        )
    ordered = sorted(candidates, key=lambda c: c.id)
    psi = method_scores(ordered, params.method, rng)

    if params.approach is Approach.OBJECT_LEVEL:
        selector = ObjectLevelSelector(ordered, psi)
    else:
        extents = {img.id: img.extent for img in dataset.images.values()}
        selector = RegionLevelSelector(ordered, psi, extents, params)

    ledger = outcome.ledger
    while not ledger.complete:
        pick = selector.next_query()
        if pick is None:
            outcome.truncated = True
            break
        if isinstance(pick, Region):
            image = dataset.images[pick.image_id]
            response = oracle_region_query(pick.bounds, image, dataset)
            queried_ids = pick.member_ids
        else:
            image = dataset.images[pick.image_id]
            response = oracle_object_query(pick.box, image, dataset)
            queried_ids = {pick.id}
        ledger.charge(response, dataset)
        apply_labels(pool, response.returned_gt_ids, dataset)
        selector.mark_consumed(queried_ids)
        if response.returned_gt_ids:
            labeled_boxes = [dataset.gts[gid].box for gid in response.returned_gt_ids]
            selector.consume_resolved(image.id, labeled_boxes)
        outcome.picks.append(pick)


def _make_report(
    dataset: SceneDataset,
    pool: PoolState,
    groups: CategoryGroups,
    seed: int,
    split_index: int,
    prev_counts: Counter,
    ledger: BudgetLedger | None,
    truncated: bool,
) -> SplitReport:
    cumulative = Counter(pool.labeled_per_category)
    new = {cid: cumulative[cid] - prev_counts.get(cid, 0) for cid in cumulative}
    new = {cid: n for cid, n in new.items() if n > 0}
    total_labeled = sum(cumulative.values())
    breakdown = compute_group_breakdown(dataset, cumulative)
    rare_labels = sum(cumulative.get(cid, 0) for cid in groups.bottom)
    if ledger is None:
        labels_applied = total_labeled
        background = 0
        interactions = 0
        query_area = 0.0
        images_touched = 0
    else:
        labels_applied = ledger.labels_applied
        background = ledger.background_queries
        interactions = len(ledger.interactions)
        query_area = float(sum(r.query_area for r in ledger.interactions))
        images_touched = len({r.image_id for r in ledger.interactions})
    return SplitReport(
        seed=seed,
        split_index=split_index,
        labels_applied=labels_applied,
        background_queries=background,
        interactions=interactions,
        truncated=truncated,
        cumulative_labels=total_labeled,
        labeled_pct_total=100.0 * total_labeled / dataset.total_instances,
        per_category_labeled=dict(cumulative),
        per_category_new=new,
        top_group_pct=breakdown["top"],
        middle_group_pct=breakdown["middle"],
        bottom_group_pct=breakdown["bottom"],
        rare_labels=rare_labels,
        rare_pct=_group_pct(dataset, cumulative, groups.bottom),
        query_area=query_area,
        images_touched=images_touched,
    )


def run_experiment(
    config: ExperimentConfig,
    dataset: SceneDataset | None = None,
) -> ExperimentResult:
    """Run every seed of an experiment; deterministic given (config, seed).

    A dataset may be passed in to share generation across experiments; label
    flags are reset per seed either way.
    """
    if dataset is None:
        if config.synth is not None:
            dataset = generate_dataset(config.synth)
        else:
            dataset = ingest.load_ground_truth(config.dataset_path)
    groups = category_groups(dataset)
    params = config.selection_params()

    detector_template = config.detector
    if detector_template is None and config.synth is not None:
        detector_template = DetectorConfig(
            feature_dim=config.synth.feature_dim,
            prototype_noise_sigma=config.synth.prototype_noise_sigma,
        )

    seed_results = []
    for seed in config.seeds:
        for gt in dataset.gts.values():
            gt.labeled = False
        pool = sample_initial_pool(dataset, config.p, config.k, seed, config.floor_at_one)
        reports = [
            _make_report(dataset, pool, groups, seed, 0, Counter(), None, False)
        ]
        ledgers = []
        prev_counts = Counter(pool.labeled_per_category)
        for split_index in range(1, config.n_splits + 1):
            if config.detection_paths is not None:
                candidates = ingest.load_detections(
                    config.detection_paths[split_index - 1], dataset
                )
                candidates = [c for c in candidates if c.image_id in pool.active_image_ids()]
            else:
                if detector_template is None:
                    raise ValueError("a detector config is required to simulate detections")
                det_cfg = dataclasses.replace(detector_template, seed=seed)
                candidates = simulate_detections(dataset, pool, det_cfg, split_index)
            outcome = run_split(dataset, pool, candidates, params, seed, split_index)
            reports.append(
                _make_report(
                    dataset, pool, groups, seed, split_index,
                    prev_counts, outcome.ledger, outcome.truncated,
                )
            )
            ledgers.append(outcome.ledger)
            prev_counts = Counter(pool.labeled_per_category)
        seed_results.append(SeedResult(seed=seed, reports=reports, ledgers=ledgers))
    return ExperimentResult(config=config, dataset=dataset, seed_results=seed_results)


# ---------------------------------------------------------------------------
# report emission

_SPLIT_COLUMNS = [
    "seed",
    "split",
    "labels_applied",
    "background_queries",
    "interactions",
    "truncated",
    "cumulative_labels",
    "labeled_pct_total",
    "top_group_pct",
    "middle_group_pct",
    "bottom_group_pct",
    "rare_labels",
    "rare_pct",
    "query_area",
    "images_touched",
]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _atomic_write(path: Path, write: Callable) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        write(fh)
    os.replace(tmp, path)


def write_run_outputs(result: ExperimentResult, out_dir: str | Path) -> None:
    """Write splits.csv, categories.csv, aggregate.csv, interaction logs, and
    run metadata for one experiment. Output is byte-stable for a fixed
    (config, seed) pair."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = result.dataset
    groups = category_groups(dataset)

    def write_splits(fh):
        writer = csv.writer(fh)
        writer.writerow(_SPLIT_COLUMNS)
        for res in result.seed_results:
            for rep in res.reports:
                writer.writerow(
                    _fmt(v)
                    for v in (
                        rep.seed, rep.split_index, rep.labels_applied,
                        rep.background_queries, rep.interactions, rep.truncated,
                        rep.cumulative_labels, rep.labeled_pct_total,
                        rep.top_group_pct, rep.middle_group_pct, rep.bottom_group_pct,
                        rep.rare_labels, rep.rare_pct, rep.query_area, rep.images_touched,
                    )
                )

    def write_categories(fh):
        writer = csv.writer(fh)
        writer.writerow(["seed", "split", "category_id", "category_name", "instances", "labeled", "labeled_pct"])
        for res in result.seed_results:
            for rep in res.reports:
                for cat in dataset.categories:
                    labeled = rep.per_category_labeled.get(cat.id, 0)
                    pct = 100.0 * labeled / cat.instance_count if cat.instance_count else 0.0
                    writer.writerow(
                        _fmt(v)
                        for v in (rep.seed, rep.split_index, cat.id, cat.name,
                                  cat.instance_count, labeled, pct)
                    )

    def write_aggregate(fh):
        writer = csv.writer(fh)
        writer.writerow(["split", "metric", "mean", "std"])
        for row in result.aggregate():
            writer.writerow(_fmt(v) for v in (row["split"], row["metric"], row["mean"], row["std"]))

    _atomic_write(out / "splits.csv", write_splits)
    _atomic_write(out / "categories.csv", write_categories)
    _atomic_write(out / "aggregate.csv", write_aggregate)

    for res in result.seed_results:
        for split_offset, ledger in enumerate(res.ledgers, start=1):
            path = out / f"interactions_seed{res.seed}_split{split_offset}.jsonl"
            tmp = path.with_suffix(".tmp")
            ingest.write_interactions(ledger, tmp)
            os.replace(tmp, path)

    meta = {
        "approach": result.config.approach.value,
        "method": result.config.method.value,
        "alpha": result.config.alpha,
        "beta": result.config.beta,
        "p": result.config.p,
        "k": result.config.k,
        "budget": result.config.budget,
        "n_splits": result.config.n_splits,
        "seeds": list(result.config.seeds),
        "group_rule": groups.rule,
        "groups": {
            "top": list(groups.top),
            "middle": list(groups.middle),
            "bottom": list(groups.bottom),
        },
    }

    def write_meta(fh):
        json.dump(meta, fh, indent=2)
        fh.write("\n")

    _atomic_write(out / "run_meta.json", write_meta)
