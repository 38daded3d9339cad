"""Three-stage training: prototype warm-up, joint training with projection
cycles, and the frozen-branch classifier stage.

Joint epochs optimize the composite loss over all branch parameters.
Prototypes are projected onto real training patches every
``projection_every`` epochs and whenever the monitored validation metric
makes a new high; the checkpoint kept is always a projected model, chosen
by its post-projection validation score, so the returned artifact carries
complete provenance. Early stopping fires after ``patience`` consecutive
epochs without a new validation high. Stage 3 fits a linear classifier on
frozen, concatenated similarity profiles by proximal gradient descent with
the L1 penalty applied only to off-class weights, which is the exact
convex objective (no dedicated solver needed).
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .errors import ConfigurationError, DivergenceError
from .evaluation import defined_class_mean, per_class_auroc
from .losses import LossConfig, composite_loss, jaccard_matrix, make_class_weights
from .models import (
    BranchModel,
    extract_latents,
    logits_matrix,
    profile_matrix,
    state_checksum,
)
from .prototypes import KIND_ORDER, PrototypeBank, PrototypeKind, project_prototypes
from .records import DatasetSplit
from .taxonomy import LabelTaxonomy

SCHEDULERS = ("plateau", "cosine", "cyclic", "none")

# tuning sweep ranges used at full scale (not executed here):
#   lr and weight decay 1e-6..1e-2, dropout 1e-6..1e-2 (tuned value 0.3),
#   prototypes per class 1..20, stage-3 L1 penalty 1e-6..1e-2,
#   loss coefficients 1e-6..1e3


@dataclass
class TrainConfig:
    branch: str = "rhythm"            # rhythm | morph | global
    extractor: str = "tiny"           # tiny | resnet18
    per_class: int | None = None      # None -> kind default (5 / 18 / 7)
    scale_a: float | None = None      # None -> sqrt(D)
    k_pool: int = 5
    window: int = 3
    max_epochs: int = 200
    patience: int = 10
    batch_size: int = 32
    lr: float = 1e-3
    weight_decay: float = 1e-4
    dropout: float = 0.0
    scheduler: str = "plateau"
    scheduler_patience: int = 5
    warmup_epochs: int = 10           # 0 skips the warm-up stage
    projection_every: int = 10
    trainable: str = "all"            # all | head_only
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        if isinstance(self.loss, dict):
            self.loss = LossConfig(**self.loss)
        if self.patience >= self.max_epochs:
            raise ConfigurationError("patience must be smaller than max_epochs")
        if self.scheduler not in SCHEDULERS:
            raise ConfigurationError(f"scheduler must be one of {SCHEDULERS}")
        if self.trainable not in ("all", "head_only"):
            raise ConfigurationError("trainable must be 'all' or 'head_only'")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls(**json.loads(text))

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


class EarlyStopper:
    """Stop after `patience` consecutive epochs without a new metric high."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -np.inf
        self.stale = 0

    def update(self, metric: float | None) -> bool:
        value = -np.inf if metric is None else metric
        if value > self.best:
            self.best = value
            self.stale = 0
            return True
        self.stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.stale >= self.patience


def stack_records(records):
    signals = np.stack([r.signal for r in records]).astype(np.float32)
    labels = np.stack([r.labels for r in records]).astype(np.float32)
    ids = [r.id for r in records]
    return signals, labels, ids


def validation_metric(model: BranchModel, signals, labels) -> float | None:
    """Mean AUROC over the classes defined on this split."""
    logits = logits_matrix(model, signals)
    return defined_class_mean(per_class_auroc(logits, labels))


def project_model(model: BranchModel, signals, labels, ids, batch_size=64) -> bool:
    """Project the model's prototypes in place; True if any vector moved."""
    latents = extract_latents(model, signals, batch_size=batch_size)
    before = model.prototypes.detach().cpu().numpy().copy()
    projected = project_prototypes(model.bank_snapshot(), latents, labels, ids)
    model.install_bank(projected)
    return not np.array_equal(before, projected.vectors)


def _set_requires_grad(module, flag: bool):
    for p in module.parameters():
        p.requires_grad_(flag)


def freeze_for_head_only(model: BranchModel):
    _set_requires_grad(model.extractor, False)
    model.extractor.eval()
    model.prototypes.requires_grad_(False)


def _make_scheduler(cfg: TrainConfig, optimizer):
    if cfg.scheduler == "plateau":
        return torch.optim.lr_scheduler.ReduceLROnPlateau(
            optimizer, mode="max", patience=cfg.scheduler_patience
        )
    if cfg.scheduler == "cosine":
        return torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=cfg.max_epochs)
    if cfg.scheduler == "cyclic":
        return torch.optim.lr_scheduler.CyclicLR(
            optimizer, base_lr=cfg.lr / 10, max_lr=cfg.lr,
            step_size_up=max(1, cfg.max_epochs // 4), cycle_momentum=False
        )
    return None


def _train_one_epoch(model, signals, labels, co, cfg, class_weights, optimizer, gen):
    n = signals.shape[0]
    perm = torch.randperm(n, generator=gen).numpy()
    co_t = torch.as_tensor(co, dtype=torch.float32)
    w_t = None if class_weights is None else torch.as_tensor(class_weights, dtype=torch.float32)
    losses = []
    for start in range(0, n, cfg.batch_size):
        idx = perm[start : start + cfg.batch_size]
        x = model.input_tensor(signals[idx])
        y = torch.as_tensor(labels[idx])
        logits, scores = model(x)
        total, _ = composite_loss(
            logits, y, scores, model.prototypes, co_t,
            model.class_of, model.scale_a, cfg.loss, w_t,
        )
        if not torch.isfinite(total):
            raise DivergenceError("non-finite training loss")
        optimizer.zero_grad()
        total.backward()
        optimizer.step()
        losses.append(float(total.detach()))
    return float(np.mean(losses))


def warmup(model: BranchModel, split: DatasetSplit, cfg: TrainConfig,
           co: np.ndarray, class_weights=None) -> dict:
    """Train only the prototype vectors with backbone and head frozen.

    Optional: warmup_epochs == 0 records a skip in the run metadata.
    Emits a warning (not an error) if the training loss failed to decrease.
    """
    if cfg.warmup_epochs == 0:
        return {"skipped": True, "losses": []}
    signals, labels, _ = stack_records(split.train)
    _set_requires_grad(model.extractor, False)
    model.extractor.eval()
    for p in (model.head_w, model.head_b):
        p.requires_grad_(False)
    model.prototypes.requires_grad_(True)
    trainable = [p for p in model.parameters() if p.requires_grad]
    if not trainable:
        raise ConfigurationError("warm-up has nothing trainable")
    optimizer = torch.optim.Adam(trainable, lr=cfg.lr, weight_decay=cfg.weight_decay)
    gen = torch.Generator().manual_seed(cfg.seed)
    losses = [
        _train_one_epoch(model, signals, labels, co, cfg, class_weights, optimizer, gen)
        for _ in range(cfg.warmup_epochs)
    ]
    _set_requires_grad(model.extractor, True)
    model.extractor.train()
    for p in (model.head_w, model.head_b):
        p.requires_grad_(True)
    if len(losses) >= 2 and losses[-1] >= losses[0]:
        warnings.warn("warm-up did not lower the training loss", stacklevel=2)
    return {"skipped": False, "losses": losses}


@dataclass
class TrainResult:
    best_val: float
    best_epoch: int
    history: list[dict]
    projections: list[int]
    stopped: str
    warmup: dict = field(default_factory=dict)


def _snapshot(model: BranchModel, epoch: int, metric: float):
    return {
        "state": {k: v.detach().clone() for k, v in model.state_dict().items()},
        "provenance": list(model.provenance) if model.provenance else None,
        "epoch": epoch,
        "metric": metric,
    }


def _restore(model: BranchModel, snap) -> None:
    model.load_state_dict(snap["state"])
    model.provenance = snap["provenance"]


def joint_train_with_projection(model: BranchModel, split: DatasetSplit,
                                cfg: TrainConfig, co: np.ndarray | None = None,
                                class_weights=None) -> TrainResult:
    """Alternate joint epochs and projection; keep the best projected model.

    Projection runs every ``projection_every`` epochs and at every new high
    of the monitored validation metric; the checkpoint is replaced only when
    the post-projection validation metric improves on the best saved one.
    On divergence the last good checkpoint is restored.
    """
    torch.manual_seed(cfg.seed)
    train_signals, train_labels, train_ids = stack_records(split.train)
    val_signals, val_labels, _ = stack_records(split.val)
    if co is None:
        co = jaccard_matrix(train_labels, model.class_of)
    if cfg.trainable == "head_only":
        freeze_for_head_only(model)
    if class_weights is None and cfg.loss.class_weight_mode == "inverse_frequency":
        class_weights = make_class_weights(train_labels, "inverse_frequency")

    params = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    scheduler = _make_scheduler(cfg, optimizer)
    stopper = EarlyStopper(cfg.patience)
    gen = torch.Generator().manual_seed(cfg.seed + 1)

    best_saved = -np.inf
    snap = None
    history: list[dict] = []
    projections: list[int] = []
    stopped = "max_epochs"

    for epoch in range(1, cfg.max_epochs + 1):
        if cfg.trainable != "head_only":
            model.extractor.train()
        try:
            mean_loss = _train_one_epoch(
                model, train_signals, train_labels, co, cfg, class_weights,
                optimizer, gen,
            )
        except DivergenceError:
            if snap is None:
                raise
            stopped = "diverged"
            break
        val_metric = validation_metric(model, val_signals, val_labels)
        improved = stopper.update(val_metric)
        proj_metric = None
        if improved or epoch % cfg.projection_every == 0:
            moved = project_model(model, train_signals, train_labels, train_ids,
                                  batch_size=max(cfg.batch_size, 64))
            projections.append(epoch)
            if moved:
                optimizer.state.clear()  # moments are stale after the prototype jump
            proj_metric = validation_metric(model, val_signals, val_labels)
            value = -np.inf if proj_metric is None else proj_metric
            if value > best_saved:
                best_saved = value
                snap = _snapshot(model, epoch, value)
        history.append({
            "epoch": epoch,
            "train_loss": mean_loss,
            "val_metric": val_metric,
            "projected_val_metric": proj_metric,
            "lr": optimizer.param_groups[0]["lr"],
        })
        if scheduler is not None:
            if cfg.scheduler == "plateau":
                scheduler.step(-np.inf if val_metric is None else val_metric)
            else:
                scheduler.step()
        if stopper.should_stop:
            stopped = "early_stopping"
            break

    if snap is None:
        project_model(model, train_signals, train_labels, train_ids)
        metric = validation_metric(model, val_signals, val_labels)
        snap = _snapshot(model, len(history), -np.inf if metric is None else metric)
        best_saved = snap["metric"]
    _restore(model, snap)
    model.eval()
    return TrainResult(
        best_val=best_saved,
        best_epoch=snap["epoch"],
        history=history,
        projections=projections,
        stopped=stopped,
    )


def fuse_similarities(profiles_by_kind: dict, banks: list[PrototypeBank]) -> np.ndarray:
    """Concatenate per-branch profiles in the fixed 1D | 2D-partial | 2D-global
    order; the order and per-bank lengths are part of the file contract."""
    kinds = [b.kind for b in banks]
    if len(set(kinds)) != len(kinds):
        raise ConfigurationError("duplicate bank kinds")
    expected = [k for k in KIND_ORDER if k in kinds]
    if kinds != expected:
        raise ConfigurationError(
            f"banks must be ordered {[k.value for k in expected]}, got "
            f"{[k.value for k in kinds]}"
        )
    parts = []
    for bank in banks:
        if bank.kind not in profiles_by_kind:
            raise ConfigurationError(f"missing profile for {bank.kind.value}")
        part = np.asarray(profiles_by_kind[bank.kind])
        if part.shape[-1] != bank.n_prototypes:
            raise ConfigurationError(
                f"{bank.kind.value}: profile length {part.shape[-1]} vs "
                f"bank size {bank.n_prototypes}"
            )
        parts.append(part)
    return np.concatenate(parts, axis=-1)


def fusion_class_of(banks: list[PrototypeBank], taxonomy: LabelTaxonomy) -> np.ndarray:
    """Global taxonomy class index of every prototype, in fusion order."""
    out = []
    for bank in banks:
        for cls in bank.class_of:
            out.append(taxonomy.index_of[bank.class_codes[int(cls)]])
    return np.array(out, dtype=np.int64)


def on_class_mask(class_of_global: np.ndarray, n_classes: int) -> np.ndarray:
    mask = np.zeros((n_classes, len(class_of_global)), dtype=bool)
    mask[class_of_global, np.arange(len(class_of_global))] = True
    return mask


def _stable_bce(logits, targets):
    # softplus-based elementwise BCE, summed over classes, mean over samples
    per_elem = targets * np.logaddexp(0.0, -logits) + (1 - targets) * np.logaddexp(0.0, logits)
    return float(per_elem.sum() / logits.shape[0])


@dataclass
class FusionResult:
    weights: np.ndarray
    bias: np.ndarray
    objective: list[float]
    iters: int


def train_fusion(profiles: np.ndarray, labels: np.ndarray, mask: np.ndarray,
                 l1_lambda: float = 1e-4, max_iters: int = 4000,
                 tol: float = 1e-10) -> FusionResult:
    """Fit logits = W s + b by FISTA on BCE + l1 * sum of off-class |W|.

    The penalty excludes on-class weights (mask True) and the bias, so a
    large l1 drives off-class weights to exactly zero while leaving each
    class free to use its own prototypes. The objective is convex; proximal
    gradient descent reaches its optimum without a dedicated solver.
    """
    x = np.asarray(profiles, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n, p = x.shape
    c = y.shape[1]
    if mask.shape != (c, p):
        raise ConfigurationError(f"mask shape {mask.shape}, expected {(c, p)}")
    aug = np.hstack([x, np.ones((n, 1))])
    lipschitz = (np.linalg.norm(aug, ord=2) ** 2) / (4.0 * n)
    step = 1.0 / max(lipschitz, 1e-12)

    w = np.zeros((c, p))
    b = np.zeros(c)
    wy, by = w.copy(), b.copy()
    t_k = 1.0
    off = ~mask

    def objective(w_, b_):
        return _stable_bce(x @ w_.T + b_, y) + l1_lambda * np.abs(w_[off]).sum()

    obj_hist = [objective(w, b)]
    for it in range(max_iters):
        logits = x @ wy.T + by
        sig = 1.0 / (1.0 + np.exp(-np.clip(logits, -500, 500)))
        g = (sig - y) / n
        grad_w = g.T @ x
        grad_b = g.sum(axis=0)
        w_next = wy - step * grad_w
        b_next = by - step * grad_b
        thresh = step * l1_lambda
        off_vals = w_next[off]
        w_next[off] = np.sign(off_vals) * np.maximum(np.abs(off_vals) - thresh, 0.0)
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k)) / 2.0
        beta = (t_k - 1.0) / t_next
        wy = w_next + beta * (w_next - w)
        by = b_next + beta * (b_next - b)
        w, b, t_k = w_next, b_next, t_next
        obj_hist.append(objective(w, b))
        if abs(obj_hist[-2] - obj_hist[-1]) <= tol * max(1.0, abs(obj_hist[-1])):
            break
    return FusionResult(weights=w.astype(np.float32), bias=b.astype(np.float32),
                        objective=obj_hist, iters=len(obj_hist) - 1)


def assemble_full_scores(branch_scores: dict, taxonomy: LabelTaxonomy) -> np.ndarray:
    """Macro-aggregation baseline: place each branch's class scores at their
    taxonomy positions (label subsets are disjoint, so this is a scatter)."""
    n = next(iter(branch_scores.values())).shape[0]
    out = np.zeros((n, len(taxonomy)), dtype=np.float64)
    for branch, scores in branch_scores.items():
        idx = taxonomy.branch_indices(branch)
        if scores.shape[1] != len(idx):
            raise ConfigurationError(
                f"{branch.value}: {scores.shape[1]} score columns for "
                f"{len(idx)} branch classes"
            )
        out[:, idx] = scores
    return out


def run_metadata(cfg: TrainConfig, result: TrainResult) -> dict:
    return {
        "version": 1,
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "config": json.loads(cfg.to_json()),
        "warmup": result.warmup,
        "best_val": result.best_val,
        "best_epoch": result.best_epoch,
        "stopped": result.stopped,
        "projections": result.projections,
        "history": result.history,
    }
