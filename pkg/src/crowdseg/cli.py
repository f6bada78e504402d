"""Command-line interface: corpus management, scoring, planning, curves,
reports, and the collection server."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .allocation import (
    BOUNDARY,
    REGION,
    budget_diversity_curve,
    greedy_allocate,
    priority_from_scores,
    priority_perfect,
    random_allocate,
    status_quo_orderings,
    wp_curve,
    wp_sweep_table,
)
from .ambiguity import (
    feng_unambiguity,
    ingest_scores,
    label_from_drawings,
    read_detections,
    read_subitizing,
    sos_priority_order,
    write_scores,
)
from .classifier import (
    DEFAULT_LAMBDA_GRID,
    LinearScorer,
    PcaModel,
    extract_features,
    fit_pca,
    project,
    score as scorer_score,
    train_scorer,
)
from .diversity import per_annotation_diversity
from .errors import CrowdsegError, MissingImage, MissingScore, ParseError
from .evaluation import agreement_matrix, emit_report, pr_curve
from .manifest import ImageRecord, annotation_sets, read_manifest, write_manifest
from .masks import PixelMask
from .pnm import read_grayscale, read_mask
from .synthetic import write_synthetic_corpus

DEFAULT_THRESHOLDS = [round(0.05 * k, 2) for k in range(21)]


def _parse_thresholds(text: str) -> list[float]:
    """Accept '0:1:0.05' ranges or comma-separated values."""
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        count = int(round((stop - start) / step)) + 1
        return [round(start + k * step, 10) for k in range(count)]
    return [float(v) for v in text.split(",") if v.strip()]


def _load_image(path: Path) -> np.ndarray:
    suffix = path.suffix.lower()
    if suffix in (".pgm", ".pnm"):
        return read_grayscale(path)
    if suffix == ".pbm":
        return read_mask(path).pixels.astype(float)
    if suffix == ".png":
        from PIL import Image

        return np.asarray(Image.open(path).convert("L"), dtype=float) / 255.0
    raise ParseError(f"unsupported image format: {path}")


def _record_image(record: ImageRecord, manifest_path: Path) -> np.ndarray:
    if not record.path:
        raise MissingImage(f"{record.image_id}: manifest record has no image path")
    path = Path(record.path)
    if not path.is_absolute():
        path = manifest_path.parent / path
    return _load_image(path)


# --- subcommands -------------------------------------------------------------


def cmd_ingest(args) -> int:
    image_dir = Path(args.images)
    out = Path(args.out)
    records = []
    for path in sorted(image_dir.iterdir()):
        if path.suffix.lower() not in (".pgm", ".pbm", ".png"):
            continue
        grid = _load_image(path)
        records.append(
            ImageRecord(
                image_id=path.stem,
                width=grid.shape[1],
                height=grid.shape[0],
                source=args.source,
                path=str(path.resolve().relative_to(out.resolve().parent))
                if path.resolve().is_relative_to(out.resolve().parent)
                else str(path.resolve()),
            )
        )
    if not records:
        raise MissingImage(f"no .pgm/.pbm/.png images under {image_dir}")
    write_manifest(records, out)
    print(f"wrote {out} ({len(records)} images)")
    return 0


def cmd_synth(args) -> int:
    manifest = write_synthetic_corpus(
        args.out,
        seed=args.seed,
        n_images=args.images,
        ambiguous_frac=args.ambiguous_frac,
        pool_size=args.pool,
        size=args.size,
    )
    print(f"wrote {manifest} ({args.images} images, pools of {args.pool})")
    return 0


def cmd_score(args) -> int:
    records = read_manifest(args.manifest)
    known = {r.image_id for r in records}
    chosen = [
        name
        for name, value in (
            ("model", args.model),
            ("external", args.external),
            ("detections", args.detections),
            ("subitizing", args.subitizing),
        )
        if value
    ]
    if len(chosen) != 1:
        raise MissingScore(
            "choose exactly one of --model / --external / --detections / --subitizing"
        )
    source = chosen[0]
    if source == "model":
        model = json.loads(Path(args.model).read_text())
        pca = PcaModel.from_json(model["pca"])
        scorer = LinearScorer.from_json(model["scorer"])
        manifest_path = Path(args.manifest)
        scores = {}
        for record in records:
            features = extract_features(_record_image(record, manifest_path))
            scores[record.image_id] = scorer_score(scorer, project(pca, features))
    elif source == "external":
        scores = ingest_scores(args.external, known)
        missing = known - set(scores)
        if missing:
            raise MissingScore(f"{len(missing)} images missing from {args.external}")
    elif source == "detections":
        detections = read_detections(args.detections, known)
        missing = known - set(detections)
        if missing:
            raise MissingScore(f"{len(missing)} images missing from {args.detections}")
        scores = {i: feng_unambiguity(w) for i, w in detections.items()}
    else:
        distributions = read_subitizing(args.subitizing, known)
        missing = known - set(distributions)
        if missing:
            raise MissingScore(f"{len(missing)} images missing from {args.subitizing}")
        # redundancy-priority rank as a pseudo-score: the image most in need
        # of redundancy gets the lowest score, so greedy planning matches
        ordering = sos_priority_order(distributions)
        scores = {image_id: float(rank) for rank, image_id in enumerate(ordering)}
    write_scores(scores, args.out)
    print(f"wrote {args.out} ({len(scores)} scores, source: {source})")
    return 0


def cmd_train(args) -> int:
    manifest_path = Path(args.manifest)
    records = read_manifest(manifest_path)
    labelled = [r for r in records if args.label_source in r.labels]
    if not labelled:
        raise MissingImage(f"no records carry a {args.label_source!r} label")
    features = np.array(
        [extract_features(_record_image(r, manifest_path)) for r in labelled]
    )
    labels = np.array(
        [1 if r.labels[args.label_source] == "unambiguous" else -1 for r in labelled]
    )
    target = min(args.target_dims, features.shape[1], len(labelled) - 1)
    pca = fit_pca(features, target=target)
    projected = np.array([project(pca, f) for f in features])
    grid = [float(v) for v in args.lambda_grid.split(",")]
    cv_log: list = []
    scorer = train_scorer(projected, labels, lambda_grid=grid, seed=args.seed, cv_log=cv_log)
    model = {
        "feature": "grad-hist-128",
        "pca": pca.to_json(),
        "scorer": scorer.to_json(),
        "seed": args.seed,
        "label_source": args.label_source,
        "samples": len(labelled),
    }
    Path(args.out).write_text(json.dumps(model, sort_keys=True) + "\n")
    print(f"wrote {args.out} (lambda {scorer.lam}, {len(labelled)} samples)")
    if args.report:
        rows = [
            {"lambda": lam, "mean_cv_ap": ap, "chosen": int(lam == scorer.lam)}
            for lam, ap in cv_log
        ]
        emit_report(rows, args.report, "csv")
        print(f"wrote {args.report}")
    return 0


def cmd_plan(args) -> int:
    records = read_manifest(args.manifest)
    known = {r.image_id for r in records}
    if args.strategy == "greedy":
        if not args.scores:
            raise MissingScore("greedy planning needs --scores")
        scores = ingest_scores(args.scores, known)
        missing = known - set(scores)
        if missing:
            raise MissingScore(f"{len(missing)} images have no score")
        plan = greedy_allocate(scores, budget=args.budget, extra=args.extra)
    else:
        scores = {}
        plan = random_allocate(sorted(known), budget=args.budget, seed=args.seed, extra=args.extra)
    rows = [
        {
            "strategy": plan.strategy,
            "budget": plan.budget,
            "extra": plan.extra,
            "rank": rank,
            "image_id": image_id,
            "score": scores.get(image_id, ""),
        }
        for rank, image_id in enumerate(plan.selected)
    ]
    if not rows:
        rows = [
            {
                "strategy": plan.strategy,
                "budget": plan.budget,
                "extra": plan.extra,
                "rank": "",
                "image_id": "",
                "score": "",
            }
        ]
    emit_report(rows, args.out, args.format)
    print(f"wrote {args.out} ({plan.strategy}, budget {plan.budget})")
    return 0


def _pools_or_die(manifest_path) -> dict:
    records = read_manifest(manifest_path)
    sets = annotation_sets(records)
    if not sets:
        raise MissingImage(f"{manifest_path}: no stored annotations to analyse")
    return sets


def cmd_simulate(args) -> int:
    sets = _pools_or_die(args.manifest)
    thresholds = _parse_thresholds(args.thresholds)
    rows = wp_sweep_table(sets, thresholds, mode=args.mode, measure=args.measure)
    emit_report(rows, args.out, args.format)
    print(f"wrote {args.out} ({len(rows)} thresholds, mode {args.mode})")
    return 0


def cmd_curve(args) -> int:
    sets = _pools_or_die(args.manifest)
    known = set(sets)
    measures = [REGION, BOUNDARY] if args.measure == "both" else [args.measure]
    wanted = [s.strip().replace("-", "_") for s in args.strategies.split(",") if s.strip()]
    if wanted == ["auto"]:
        wanted = ["perfect", "status_quo", "wp_bb", "wp_seg"]
        if args.scores:
            wanted.insert(0, "greedy")
        if args.subitizing:
            wanted.append("sos")
    thresholds = _parse_thresholds(args.thresholds)
    curves = []
    for measure in measures:
        for strategy in wanted:
            if strategy == "greedy":
                if not args.scores:
                    raise MissingScore("greedy curve needs --scores")
                scores = ingest_scores(args.scores, known)
                ordering = priority_from_scores({i: scores[i] for i in known})
                curves.append(
                    budget_diversity_curve([ordering], sets, args.extra, measure, "greedy")
                )
            elif strategy == "perfect":
                ordering = priority_perfect(sets, args.extra, measure)
                curves.append(
                    budget_diversity_curve([ordering], sets, args.extra, measure, "perfect")
                )
            elif strategy == "status_quo":
                seeds = [args.seed + k for k in range(args.seeds)]
                orderings = status_quo_orderings(sorted(known), seeds)
                curves.append(
                    budget_diversity_curve(
                        orderings, sets, args.extra, measure, "status_quo", seeds_used=len(seeds)
                    )
                )
            elif strategy == "sos":
                if not args.subitizing:
                    raise MissingScore("sos curve needs --subitizing")
                distributions = read_subitizing(args.subitizing, known)
                ordering = sos_priority_order(distributions)
                curves.append(
                    budget_diversity_curve([ordering], sets, args.extra, measure, "sos")
                )
            elif strategy in ("wp_bb", "wp_seg"):
                curves.append(
                    wp_curve(sets, thresholds, mode=strategy.split("_")[1], measure=measure)
                )
            else:
                raise ParseError(f"unknown strategy {strategy!r}")
    rows = [
        {
            "strategy": c.strategy,
            "measure": c.measure,
            "budget_fraction": x,
            "captured_fraction": y,
            "seeds_used": c.seeds_used,
        }
        for c in curves
        for x, y in c.points
    ]
    emit_report(rows, args.out, args.format)
    print(f"wrote {args.out} ({len(curves)} curves)")
    if args.figure:
        from .figures import save_diversity_figure

        fig_path = Path(args.out).with_suffix(".png")
        save_diversity_figure(curves, fig_path)
        print(f"wrote {fig_path}")
    return 0


def cmd_report(args) -> int:
    if args.store:
        from .service.store import TaskStore

        store = TaskStore(Path(args.store) / "log.jsonl")
        records = store.export_records()
    else:
        records = read_manifest(args.manifest)
    if args.kind == "diversity":
        sets = annotation_sets(records)
        if not sets:
            raise MissingImage("no stored annotations to analyse")
        rows = []
        for image_id in sorted(sets):
            for index, s in enumerate(per_annotation_diversity(sets[image_id])):
                rows.append(
                    {
                        "image_id": image_id,
                        "annotation_index": index,
                        "region_diversity": s.region,
                        "boundary_diversity": s.boundary if s.boundary is not None else "",
                    }
                )
        emit_report(rows, args.out, args.format)
    elif args.kind == "pr":
        if not args.scores:
            raise MissingScore("pr report needs --scores")
        labels = {
            r.image_id: r.labels[args.label_source]
            for r in records
            if args.label_source in r.labels
        }
        if not labels:
            raise MissingImage(f"no records carry a {args.label_source!r} label")
        scores = ingest_scores(args.scores, set(labels))
        curve = pr_curve({i: scores[i] for i in labels}, labels)
        rows = [
            {"recall": r, "precision": p, "average_precision": curve.average_precision}
            for r, p in curve.points
        ]
        emit_report(rows, args.out, args.format)
        if args.figure:
            from .figures import save_pr_figure

            fig_path = Path(args.out).with_suffix(".png")
            save_pr_figure({args.label_source: curve}, fig_path)
            print(f"wrote {fig_path}")
    elif args.kind == "agreement":
        judger = {
            r.image_id: r.labels["judgers"] for r in records if "judgers" in r.labels
        }
        sets = annotation_sets(records)
        drawer = {}
        for image_id, aset in sets.items():
            if image_id in judger and len(aset.masks) >= 2:
                drawer[image_id] = label_from_drawings(image_id, aset.masks).label
        shared = sorted(set(judger) & set(drawer))
        if not shared:
            raise MissingImage("no images carry both judger and drawer labels")
        matrix = agreement_matrix(
            {i: judger[i] for i in shared}, {i: drawer[i] for i in shared}
        )
        rows = [
            {
                "judger_label": j,
                "drawer_label": d,
                "fraction": matrix.fractions[(j, d)],
                "overall_agreement": matrix.overall_agreement,
            }
            for j in ("unambiguous", "ambiguous")
            for d in ("unambiguous", "ambiguous")
        ]
        emit_report(rows, args.out, args.format)
    else:
        raise ParseError(f"unknown report kind {args.kind!r}")
    print(f"wrote {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.server import create_app
    from .service.store import ServiceConfig, TaskStore, WorkerProfile

    store_dir = Path(args.store)
    store_dir.mkdir(parents=True, exist_ok=True)
    if args.config:
        config = ServiceConfig.load(args.config)
    else:
        config = ServiceConfig()
    if args.allow_anyone:
        config.default_profile = WorkerProfile(
            worker_id="*", completed_tasks=1000, approval_rate=1.0
        )
    if args.timeout is not None:
        config.assignment_timeout = args.timeout
    store = TaskStore(store_dir / "log.jsonl", config)
    app = create_app(store, ui_dir=args.ui)
    print(f"serving on http://{args.host}:{args.port} (store: {store_dir})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdseg",
        description="Segmentation-diversity measurement and annotation-redundancy allocation.",
    )
    parser.add_argument("--version", action="version", version=f"crowdseg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a manifest from an image directory")
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--source", default="local")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="write a synthetic fixture corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--images", type=int, default=40)
    p.add_argument("--ambiguous-frac", type=float, default=0.3)
    p.add_argument("--pool", type=int, default=5)
    p.add_argument("--size", type=int, default=48)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("score", help="produce an unambiguity score file")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", help="built-in classifier model JSON")
    p.add_argument("--external", help="externally computed score file to validate")
    p.add_argument("--detections", help="detection-window file (margin conversion)")
    p.add_argument("--subitizing", help="object-count distribution file (priority conversion)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("train", help="train the built-in ambiguity classifier")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="optional cross-validation report CSV")
    p.add_argument("--label-source", default="judgers", choices=["judgers", "drawers"])
    p.add_argument("--target-dims", type=int, default=100)
    p.add_argument(
        "--lambda-grid", default=",".join(str(v) for v in DEFAULT_LAMBDA_GRID)
    )
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("plan", help="allocate a redundancy budget")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--extra", type=int, default=4, help="redundant annotations per selected image (4 or 9 typical)")
    p.add_argument("--strategy", default="greedy", choices=["greedy", "random"])
    p.add_argument("--scores", help="score file (required for greedy)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="sweep agreement thresholds over stored pools")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", default="seg", choices=["bb", "seg"])
    p.add_argument("--thresholds", default="0:1:0.05")
    p.add_argument("--measure", default=REGION, choices=[REGION, BOUNDARY])
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("curve", help="budget-versus-diversity curves per strategy")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--extra", type=int, default=4)
    p.add_argument("--measure", default="both", choices=[REGION, BOUNDARY, "both"])
    p.add_argument("--strategies", default="auto")
    p.add_argument("--scores")
    p.add_argument("--subitizing")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--thresholds", default="0:1:0.05")
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.add_argument("--figure", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("serve", help="run the collection service")
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8777)
    p.add_argument("--config", help="worker roster JSON")
    p.add_argument("--timeout", type=float, help="assignment timeout in seconds")
    p.add_argument("--allow-anyone", action="store_true", help="treat unknown workers as qualified (demo mode)")
    p.add_argument("--ui", help="static frontend directory to mount at /")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="emit evaluation reports")
    p.add_argument("--kind", required=True, choices=["diversity", "pr", "agreement"])
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.add_argument("--store", help="service store directory (alternative to --manifest)")
    p.add_argument("--scores")
    p.add_argument("--label-source", default="judgers", choices=["judgers", "drawers"])
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.add_argument("--figure", action="store_true")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "report" and not (args.manifest or args.store):
        parser.error("report needs --manifest or --store")
    try:
        return args.func(args)
    except CrowdsegError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
