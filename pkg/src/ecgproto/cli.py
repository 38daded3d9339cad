"""Command-line interface: preprocess, train, project, fuse, eval, explain,
serve, and synthetic-corpus generation."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def _load_data(data_dir):
    from .records import load_dataset
    from .taxonomy import LabelTaxonomy

    data_dir = Path(data_dir)
    taxonomy = LabelTaxonomy.from_json((data_dir / "taxonomy.json").read_text("utf-8"))
    split = load_dataset(data_dir / "manifest.csv", data_dir / "signals", taxonomy)
    return split, taxonomy


def cmd_preprocess(args):
    from .filtering import highpass_filter
    from .records import load_dataset, save_dataset
    from .taxonomy import LabelTaxonomy, ptbxl_taxonomy

    if args.taxonomy:
        taxonomy = LabelTaxonomy.from_json(Path(args.taxonomy).read_text("utf-8"))
    else:
        taxonomy = ptbxl_taxonomy()
    split = load_dataset(args.manifest, args.signals, taxonomy)
    for rec in split.all_records():
        rec.signal = highpass_filter(rec.signal, zero_phase=args.zero_phase)
    save_dataset(split, args.out, taxonomy)
    print(f"preprocessed {len(split.all_records())} records -> {args.out}")


def cmd_synth(args):
    from .records import save_dataset
    from .synthetic import make_synthetic_split

    split, taxonomy = make_synthetic_split(
        n_train=args.n_train, n_val=args.n_val, n_test=args.n_test, seed=args.seed
    )
    save_dataset(split, args.out, taxonomy)
    print(f"wrote synthetic corpus ({len(split.all_records())} records) -> {args.out}")


def cmd_train(args):
    from .models import save_model
    from .pipeline import BRANCH_NAMES, train_branch
    from .synthetic import synthetic_train_config
    from .training import TrainConfig, run_metadata

    split, taxonomy = _load_data(args.data)
    branch = BRANCH_NAMES[args.branch]
    if args.config:
        cfg = TrainConfig.from_json(Path(args.config).read_text("utf-8"))
    elif args.preset == "synthetic":
        cfg = synthetic_train_config(args.branch, seed=args.seed)
    else:
        cfg = TrainConfig(branch=args.branch, seed=args.seed)
    model, result = train_branch(split, taxonomy, branch, cfg,
                                 cache_dir=Path(args.out) / "cache")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / f"{args.branch}.ckpt"
    save_model(ckpt, model, branch)
    (out / f"{args.branch}_run_meta.json").write_text(
        json.dumps(run_metadata(cfg, result), indent=2), encoding="utf-8"
    )
    print(f"{args.branch}: best val {result.best_val:.4f} "
          f"(epoch {result.best_epoch}, stopped: {result.stopped}) -> {ckpt}")


def cmd_project(args):
    from .models import load_model, save_model
    from .pipeline import BRANCH_NAMES
    from .records import branch_view
    from .taxonomy import Branch
    from .training import project_model, stack_records

    split, taxonomy = _load_data(args.data)
    model, meta = load_model(args.checkpoint)
    branch = Branch(meta["branch"])
    view = branch_view(split, branch, taxonomy)
    signals, labels, ids = stack_records(view.train)
    project_model(model, signals, labels, ids)
    out = args.out or args.checkpoint
    save_model(out, model, branch, extra_meta={"projected": True})
    print(f"projected {model.n_prototypes} prototypes -> {out}")


def cmd_fuse(args):
    from .models import load_model
    from .pipeline import BRANCH_FILES, fit_fusion_stage, save_fused
    from .taxonomy import Branch

    split, taxonomy = _load_data(args.data)
    models = {}
    model_dir = Path(args.model_dir)
    for branch, fname in BRANCH_FILES.items():
        path = model_dir / fname
        if path.exists():
            model, _ = load_model(path)
            models[branch] = model
    if not models:
        sys.exit(f"no branch checkpoints in {model_dir}")
    fused, fit = fit_fusion_stage(models, split, taxonomy,
                                  l1_lambda=args.l1, max_iters=args.max_iters)
    save_fused(args.out, fused, extra_meta={"l1_lambda": args.l1})
    print(f"fusion classifier fit ({fit.iters} iterations) -> {args.out}")


def cmd_eval(args):
    from .pipeline import evaluate_fused, load_fused

    split, taxonomy = _load_data(args.data)
    fused = load_fused(args.checkpoint)
    records = getattr(split, args.split)
    report = evaluate_fused(fused, records, n_resamples=args.resamples,
                            seed=args.seed, aggregation=args.aggregation)
    Path(args.out).write_text(report.to_json(), encoding="utf-8")
    print("\n".join(report.format_lines()))
    macro = "undefined" if report.macro_auroc is None else f"{report.macro_auroc:.4f}"
    print(f"macro-AUROC: {macro}")
    print(f"weighted AUROC: {report.weighted_auroc:.4f} "
          f"({report.weighted_ci[0]:.4f}, {report.weighted_ci[1]:.4f})")
    print(f"report -> {args.out}")


def cmd_explain(args):
    from .explain import explain
    from .pipeline import load_fused
    from .records import records_by_id
    from .render import RenderSpec, render

    split, taxonomy = _load_data(args.data)
    fused = load_fused(args.model_dir)
    by_id = records_by_id(split)
    if args.record not in by_id:
        sys.exit(f"unknown record id {args.record}")
    record = by_id[args.record]
    result = explain(fused, record, getattr(args, "class"), top_m=args.top)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "explanation.json").write_text(result.to_json(), encoding="utf-8")
    for entry in result.entries:
        window = entry.test_window_seconds
        spec = RenderSpec(
            highlight_seconds=window,
            cutout=window is not None,
            emphasize_rhythm_strip=entry.kind == "GLOBAL_1D",
            title=f"test {record.id} [{result.class_code}]",
        )
        render(record.signal, spec, out / f"rank{entry.rank}_test.svg")
        source = by_id.get(entry.source_record_id)
        if source is not None:
            src_spec = RenderSpec(
                highlight_seconds=(entry.source_window_seconds
                                   if entry.kind == "PARTIAL_2D" else None),
                cutout=entry.kind == "PARTIAL_2D",
                emphasize_rhythm_strip=entry.kind == "GLOBAL_1D",
                title=f"prototype {entry.prototype_id} [{entry.class_code}] "
                      f"from {entry.source_record_id}",
            )
            render(source.signal, src_spec, out / f"rank{entry.rank}_prototype.svg")
    print(f"top-{len(result.entries)} explanation for {record.id}/"
          f"{result.class_code} -> {out}")


def cmd_serve(args):
    import uvicorn

    from .models import load_model
    from .prototypes import load_bank
    from .records import records_by_id
    from .review_service import create_app

    split, taxonomy = _load_data(args.data)
    banks = []
    if args.model_dir:
        from .pipeline import BRANCH_FILES

        for fname in BRANCH_FILES.values():
            path = Path(args.model_dir) / fname
            if path.exists():
                model, _ = load_model(path)
                banks.append(model.bank_snapshot())
    for bank_path in args.bank or []:
        banks.append(load_bank(bank_path))
    if not banks:
        sys.exit("no banks given (use --bank or --model-dir)")
    app = create_app(banks, records_by_id(split), args.log)
    uvicorn.run(app, host=args.host, port=args.port)


def build_parser():
    parser = argparse.ArgumentParser(prog="ecgproto")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="filter raw records into the interchange format")
    p.add_argument("--manifest", required=True)
    p.add_argument("--signals", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--taxonomy", help="taxonomy JSON (default: the 71-code set)")
    p.add_argument("--zero-phase", action="store_true")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("synth", help="generate the synthetic 3-branch corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train", type=int, default=600)
    p.add_argument("--n-val", type=int, default=100)
    p.add_argument("--n-test", type=int, default=100)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train one prototype branch")
    p.add_argument("--branch", required=True, choices=["rhythm", "morph", "global"])
    p.add_argument("--config", help="TrainConfig JSON")
    p.add_argument("--preset", choices=["synthetic"], help="built-in config preset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("project", help="project a checkpoint's prototypes")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("fuse", help="fit the fusion classifier on frozen branches")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--l1", type=float, default=1e-4)
    p.add_argument("--max-iters", type=int, default=4000)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="evaluate a fused checkpoint")
    p.add_argument("--checkpoint", required=True, help="fused model directory")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--out", default="report.json")
    p.add_argument("--resamples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--aggregation", default="fusion", choices=["fusion", "macro"])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("explain", help="case-based explanation for one record")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--record", required=True)
    p.add_argument("--class", required=True)
    p.add_argument("--top", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("serve", help="run the prototype review service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--bank", action="append", help="bank file (repeatable)")
    p.add_argument("--model-dir", help="pull banks from branch checkpoints")
    p.add_argument("--data", required=True)
    p.add_argument("--log", default="ratings.ndjson")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
