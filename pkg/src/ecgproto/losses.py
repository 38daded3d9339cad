"""Composite training objective for multi-label prototype learning.

total = BCE + l_clst * clustering + l_sep * separation
            + l_div * orthogonality + l_cntrst * contrastive

Clustering pulls each sample toward some prototype of any of its positive
classes (an exact label match is not required); separation pushes it away
from prototypes of entirely absent classes; orthogonality penalizes
redundant prototype directions; and the contrastive term shapes
prototype-prototype geometry with a precomputed Jaccard co-occurrence
matrix, attracting prototype pairs of frequently co-occurring classes and
repelling pairs whose classes rarely share a record.

All terms are differentiable torch expressions, so gradients with respect
to prototypes and logits are exact.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .errors import ConfigurationError, DegenerateInputError

# defaults are the tuned full-scale coefficients
DEFAULT_LAMBDA_CLST = 0.004
DEFAULT_LAMBDA_SEP = 0.0004
DEFAULT_LAMBDA_DIV = 250.0
DEFAULT_LAMBDA_CNTRST = 300.0


@dataclass
class LossConfig:
    lambda_clst: float = DEFAULT_LAMBDA_CLST
    lambda_sep: float = DEFAULT_LAMBDA_SEP
    lambda_div: float = DEFAULT_LAMBDA_DIV
    lambda_cntrst: float = DEFAULT_LAMBDA_CNTRST
    class_weight_mode: str = "uniform"  # or "inverse_frequency"
    k_pool: int = 5

    def __post_init__(self):
        for name in ("lambda_clst", "lambda_sep", "lambda_div", "lambda_cntrst"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ConfigurationError(f"{name} must be finite and nonnegative")
        if self.class_weight_mode not in ("uniform", "inverse_frequency"):
            raise ConfigurationError(f"unknown class_weight_mode {self.class_weight_mode!r}")


def make_class_weights(labels: np.ndarray, mode: str = "uniform") -> np.ndarray:
    """Per-class BCE weights; inverse-frequency weights are normalized to mean 1."""
    n_classes = labels.shape[1]
    if mode == "uniform":
        return np.ones(n_classes, dtype=np.float64)
    counts = np.maximum(labels.sum(axis=0), 1.0)
    w = 1.0 / counts
    return (w / w.mean()).astype(np.float64)


def jaccard_matrix(train_labels: np.ndarray, class_of: np.ndarray) -> np.ndarray:
    """P x P co-occurrence matrix: Jaccard overlap of the positive-record sets
    of the two prototypes' classes, over the training labels.

    Pairs of classes with no positives at all get 0 with a warning; the
    diagonal is 1 by definition.
    """
    labels = np.asarray(train_labels, dtype=np.float64)
    class_of = np.asarray(class_of, dtype=np.int64)
    n_classes = labels.shape[1]
    counts = labels.sum(axis=0)                      # N_a
    both = labels.T @ labels                         # N_ab
    union = counts[:, None] + counts[None, :] - both
    class_j = np.zeros((n_classes, n_classes))
    nz = union > 0
    class_j[nz] = both[nz] / union[nz]
    empty_pairs = ~nz
    if empty_pairs.any():
        warnings.warn(
            f"{int(empty_pairs.sum())} class pairs have no positive records; "
            "their co-occurrence is set to 0",
            stacklevel=2,
        )
    c = class_j[np.ix_(class_of, class_of)]
    np.fill_diagonal(c, 1.0)
    return c


def jaccard_cache_key(train_labels, class_of, codes) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(train_labels, dtype=np.float32).tobytes())
    h.update(np.ascontiguousarray(class_of, dtype=np.int64).tobytes())
    h.update(json.dumps(list(codes)).encode())
    return h.hexdigest()[:16]


def jaccard_matrix_cached(train_labels, class_of, codes, cache_dir) -> np.ndarray:
    """Disk-cached co-occurrence matrix keyed by (labels, assignment, codes)."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"jaccard_{jaccard_cache_key(train_labels, class_of, codes)}.npy"
    if path.exists():
        return np.load(path)
    c = jaccard_matrix(train_labels, class_of)
    np.save(path, c)
    return c


def _as_tensor(x):
    return x if torch.is_tensor(x) else torch.as_tensor(np.asarray(x))


def bce_loss(logits, targets, class_weights=None) -> torch.Tensor:
    """Class-weighted multi-label BCE: sum over classes, mean over samples.

    Numerically stabilized via the log-sum-exp form, so saturated logits
    neither overflow nor produce NaNs.
    """
    logits = _as_tensor(logits)
    targets = _as_tensor(targets).to(logits.dtype)
    if not torch.isfinite(logits).all():
        raise DegenerateInputError("non-finite logits")
    if logits.shape != targets.shape:
        raise ConfigurationError(f"logits {tuple(logits.shape)} vs targets {tuple(targets.shape)}")
    if class_weights is None:
        w = torch.ones(logits.shape[1], dtype=logits.dtype)
    else:
        w = _as_tensor(class_weights).to(logits.dtype)
    per_elem = torch.nn.functional.binary_cross_entropy_with_logits(
        logits, targets, reduction="none"
    )
    return (per_elem * w).sum() / logits.shape[0]


def _positive_mask(labels, class_of) -> torch.Tensor:
    labels = _as_tensor(labels)
    class_of = _as_tensor(class_of).long()
    return labels[:, class_of] > 0.5


def clustering_loss(similarities, labels, class_of) -> torch.Tensor:
    """-mean over samples of the max similarity to any positive-class prototype.

    Samples whose label set matches no prototype class contribute 0.
    """
    s = _as_tensor(similarities)
    pos = _positive_mask(labels, class_of)
    neg_inf = torch.finfo(s.dtype).min
    masked = s.masked_fill(~pos, neg_inf)
    row_max = masked.max(dim=1).values
    has_pos = pos.any(dim=1)
    contrib = torch.where(has_pos, row_max, torch.zeros((), dtype=s.dtype))
    return -contrib.mean()


def separation_loss(similarities, labels, class_of) -> torch.Tensor:
    """+mean over samples of the max similarity to any absent-class prototype."""
    s = _as_tensor(similarities)
    neg = ~_positive_mask(labels, class_of)
    neg_inf = torch.finfo(s.dtype).min
    masked = s.masked_fill(~neg, neg_inf)
    row_max = masked.max(dim=1).values
    has_neg = neg.any(dim=1)
    contrib = torch.where(has_neg, row_max, torch.zeros((), dtype=s.dtype))
    return contrib.mean()


def orthogonality_loss(bank_vectors) -> torch.Tensor:
    """Squared Frobenius distance of the normalized Gram matrix from identity."""
    p = _as_tensor(bank_vectors)
    norms = p.norm(dim=1, keepdim=True)
    if (norms == 0).any():
        raise DegenerateInputError("zero-norm prototype row")
    p_hat = p / norms
    gram = p_hat @ p_hat.T
    eye = torch.eye(p.shape[0], dtype=p.dtype)
    return ((gram - eye) ** 2).sum()


def prototype_similarity_matrix(bank_vectors, a: float) -> torch.Tensor:
    p = _as_tensor(bank_vectors)
    norms = p.norm(dim=1, keepdim=True)
    if (norms == 0).any():
        raise DegenerateInputError("zero-norm prototype row")
    p_hat = p / norms
    return a * (p_hat @ p_hat.T)


def contrastive_loss(bank_vectors, co_occurrence, a: float) -> torch.Tensor:
    """Mean-difference contrastive objective over prototype pairs.

    The co-occurrence-weighted mean pairwise similarity is contrasted
    against the complement-weighted mean, diagonal excluded; a group with
    zero total weight contributes 0 to its side.
    """
    p = _as_tensor(bank_vectors)
    n = p.shape[0]
    if n < 2:
        raise ConfigurationError("contrastive loss needs at least two prototypes")
    c = _as_tensor(co_occurrence).to(p.dtype)
    if c.shape != (n, n):
        raise ConfigurationError(f"co-occurrence shape {tuple(c.shape)} vs P={n}")
    s = prototype_similarity_matrix(p, a)
    off = ~torch.eye(n, dtype=torch.bool)
    pos_w = c[off]
    neg_w = (1.0 - c)[off]
    s_off = s[off]
    zero = torch.zeros((), dtype=p.dtype)
    pos_term = (pos_w * s_off).sum() / pos_w.sum() if float(pos_w.sum()) > 0 else zero
    neg_term = (neg_w * s_off).sum() / neg_w.sum() if float(neg_w.sum()) > 0 else zero
    return -(pos_term - neg_term) / np.sqrt(n)


def total_loss(bce, clst, sep, div, cntrst, cfg: LossConfig) -> torch.Tensor:
    parts = [_as_tensor(t) for t in (bce, clst, sep, div, cntrst)]
    if not all(torch.isfinite(t).all() for t in parts):
        raise DegenerateInputError("non-finite loss part")
    bce, clst, sep, div, cntrst = parts
    return (bce + cfg.lambda_clst * clst + cfg.lambda_sep * sep
            + cfg.lambda_div * div + cfg.lambda_cntrst * cntrst)


def composite_loss(logits, targets, similarities, bank_vectors, co_occurrence,
                   class_of, scale_a, cfg: LossConfig, class_weights=None):
    """All five terms plus their weighted total, as (total, parts dict)."""
    parts = {
        "bce": bce_loss(logits, targets, class_weights),
        "clst": clustering_loss(similarities, targets, class_of),
        "sep": separation_loss(similarities, targets, class_of),
        "div": orthogonality_loss(bank_vectors),
        "cntrst": contrastive_loss(bank_vectors, co_occurrence, scale_a),
    }
    total = total_loss(parts["bce"], parts["clst"], parts["sep"],
                       parts["div"], parts["cntrst"], cfg)
    return total, parts
