"""End-to-end orchestration: train the three branches, fit the fusion and
branch-specific classifiers on frozen profiles, and evaluate checkpoints.

The fused artifact is a directory with one container checkpoint per branch
plus ``fusion.ckpt`` (classifier weights and the prototype-to-class map)
and ``taxonomy.json``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, IngestionError
from .evaluation import EvalReport, evaluate_scores
from .container import read_container, write_container
from .losses import jaccard_matrix_cached, jaccard_matrix
from .models import BranchModel, load_model, make_branch_model, profile_matrix, save_model
from .records import DatasetSplit, branch_view
from .taxonomy import Branch, LabelTaxonomy
from .training import (
    FusionResult,
    TrainConfig,
    TrainResult,
    fuse_similarities,
    fusion_class_of,
    joint_train_with_projection,
    on_class_mask,
    run_metadata,
    stack_records,
    train_fusion,
    warmup,
)

BRANCH_NAMES = {"rhythm": Branch.RHYTHM, "morph": Branch.MORPHOLOGY, "global": Branch.GLOBAL}
BRANCH_ORDER = [Branch.RHYTHM, Branch.MORPHOLOGY, Branch.GLOBAL]
BRANCH_FILES = {Branch.RHYTHM: "rhythm.ckpt", Branch.MORPHOLOGY: "morph.ckpt",
                Branch.GLOBAL: "global.ckpt"}


def train_branch(split: DatasetSplit, taxonomy: LabelTaxonomy, branch: Branch,
                 cfg: TrainConfig, cache_dir=None) -> tuple[BranchModel, TrainResult]:
    """Warm-up plus joint training with projection for one branch."""
    view = branch_view(split, branch, taxonomy)
    model = make_branch_model(
        branch, view.codes, variant=cfg.extractor, per_class=cfg.per_class,
        scale_a=cfg.scale_a, k_pool=cfg.k_pool, window=cfg.window,
        dropout=cfg.dropout, seed=cfg.seed,
    )
    train_labels = view.label_matrix("train")
    if cache_dir is not None:
        co = jaccard_matrix_cached(train_labels, model.class_of, view.codes, cache_dir)
    else:
        co = jaccard_matrix(train_labels, model.class_of)
    warm = warmup(model, view, cfg, co)
    result = joint_train_with_projection(model, view, cfg, co)
    result.warmup = warm
    return model, result


@dataclass
class FusedModel:
    """Three frozen branches plus the stage-3 fusion classifier."""

    branches: dict  # Branch -> BranchModel
    fusion_weights: np.ndarray  # (C_total, P_total)
    fusion_bias: np.ndarray
    taxonomy: LabelTaxonomy
    branch_heads: dict = field(default_factory=dict)  # Branch -> (W, b)

    def ordered_models(self) -> list[tuple[Branch, BranchModel]]:
        return [(b, self.branches[b]) for b in BRANCH_ORDER if b in self.branches]

    def banks(self):
        return [m.bank_snapshot() for _, m in self.ordered_models()]

    def profiles(self, records) -> np.ndarray:
        signals = np.stack([r.signal for r in records]).astype(np.float32)
        parts = {}
        for branch, model in self.ordered_models():
            parts[model.kind] = profile_matrix(model, signals)
        return fuse_similarities(parts, self.banks())

    def predict_logits(self, records) -> np.ndarray:
        return self.profiles(records) @ self.fusion_weights.T + self.fusion_bias

    def prototype_class_of(self) -> np.ndarray:
        return fusion_class_of(self.banks(), self.taxonomy)


def branch_profiles(models: dict, records) -> dict:
    signals = np.stack([r.signal for r in records]).astype(np.float32)
    return {branch: profile_matrix(model, signals) for branch, model in models.items()}


def fit_fusion_stage(models: dict, split: DatasetSplit, taxonomy: LabelTaxonomy,
                     l1_lambda: float = 1e-4, max_iters: int = 4000
                     ) -> tuple[FusedModel, FusionResult]:
    """Stage 3: freeze branches, fit fusion over concatenated profiles, and
    fit branch-specific classifiers on per-branch profiles the same way."""
    ordered = [(b, models[b]) for b in BRANCH_ORDER if b in models]
    banks = [m.bank_snapshot() for _, m in ordered]
    per_branch = branch_profiles(models, split.train)
    parts = {models[b].kind: per_branch[b] for b, _ in ordered}
    profiles = fuse_similarities(parts, banks)
    labels = split.label_matrix("train")
    class_of_global = fusion_class_of(banks, taxonomy)
    mask = on_class_mask(class_of_global, len(taxonomy))
    fusion = train_fusion(profiles, labels, mask, l1_lambda=l1_lambda, max_iters=max_iters)

    branch_heads = {}
    for branch, model in ordered:
        view_codes = model.class_codes
        idx = taxonomy.branch_indices(branch)
        branch_labels = labels[:, idx]
        branch_mask = on_class_mask(model.class_of, len(view_codes))
        fit = train_fusion(per_branch[branch], branch_labels, branch_mask,
                           l1_lambda=l1_lambda, max_iters=max_iters)
        branch_heads[branch] = (fit.weights, fit.bias)

    fused = FusedModel(
        branches=dict(models),
        fusion_weights=fusion.weights,
        fusion_bias=fusion.bias,
        taxonomy=taxonomy,
        branch_heads=branch_heads,
    )
    return fused, fusion


def macro_aggregated_scores(fused: FusedModel, records) -> np.ndarray:
    """Per-branch classifier logits scattered to the full label vector."""
    from .training import assemble_full_scores

    signals = np.stack([r.signal for r in records]).astype(np.float32)
    branch_scores = {}
    for branch, model in fused.ordered_models():
        w, b = fused.branch_heads[branch]
        branch_scores[branch] = profile_matrix(model, signals) @ w.T + b
    return assemble_full_scores(branch_scores, fused.taxonomy)


def evaluate_fused(fused: FusedModel, records, n_resamples: int = 10_000,
                   seed: int = 0, aggregation: str = "fusion") -> EvalReport:
    labels = np.stack([r.labels for r in records])
    if aggregation == "fusion":
        scores = fused.predict_logits(records)
    elif aggregation == "macro":
        scores = macro_aggregated_scores(fused, records)
    else:
        raise ConfigurationError(f"unknown aggregation {aggregation!r}")
    report = evaluate_scores(scores, labels, fused.taxonomy.codes,
                             n_resamples=n_resamples, seed=seed)
    report.extras["aggregation"] = aggregation
    return report


def save_fused(out_dir, fused: FusedModel, extra_meta: dict | None = None) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for branch, model in fused.ordered_models():
        save_model(out_dir / BRANCH_FILES[branch], model, branch)
    arrays = {"weights": fused.fusion_weights, "bias": fused.fusion_bias}
    for branch, (w, b) in fused.branch_heads.items():
        arrays[f"branch_head_w.{branch.value}"] = w
        arrays[f"branch_head_b.{branch.value}"] = b
    meta = {"prototype_class_of": fused.prototype_class_of().tolist()}
    meta.update(extra_meta or {})
    write_container(out_dir / "fusion.ckpt", arrays, meta)
    (out_dir / "taxonomy.json").write_text(fused.taxonomy.to_json(), encoding="utf-8")


def load_fused(model_dir) -> FusedModel:
    model_dir = Path(model_dir)
    if not (model_dir / "fusion.ckpt").exists():
        raise IngestionError(f"missing fusion checkpoint in {model_dir}")
    taxonomy = LabelTaxonomy.from_json(
        (model_dir / "taxonomy.json").read_text(encoding="utf-8")
    )
    branches = {}
    for branch, fname in BRANCH_FILES.items():
        path = model_dir / fname
        if path.exists():
            model, _ = load_model(path)
            branches[branch] = model
    if not branches:
        raise IngestionError(f"no branch checkpoints found in {model_dir}")
    arrays, _ = read_container(model_dir / "fusion.ckpt")
    branch_heads = {}
    for branch in branches:
        key = f"branch_head_w.{branch.value}"
        if key in arrays:
            branch_heads[branch] = (arrays[key], arrays[f"branch_head_b.{branch.value}"])
    return FusedModel(
        branches=branches,
        fusion_weights=arrays["weights"],
        fusion_bias=arrays["bias"],
        taxonomy=taxonomy,
        branch_heads=branch_heads,
    )


def write_run_metadata(out_dir, cfgs: dict, results: dict) -> None:
    payload = {
        name: run_metadata(cfg, results[name]) for name, cfg in cfgs.items()
        if name in results
    }
    (Path(out_dir) / "run_meta.json").write_text(
        json.dumps(payload, indent=2), encoding="utf-8"
    )
