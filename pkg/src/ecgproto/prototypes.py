"""Prototype banks: scaled-cosine similarity, sliding-window matching with
top-k pooling, and projection of prototypes onto real training latent patches.

Three prototype kinds exist. Global 1D prototypes match the pooled 512-vector
of the 1D branch; global 2D prototypes match the full flattened 512x1x32 map;
partial 2D prototypes span a 3-step latent window (~0.94 s of input) and slide
across all 30 time offsets, with the k highest window scores averaged into a
single score. Projection replaces each prototype with the most similar latent
patch drawn from training records carrying its class, recording provenance so
every downstream explanation is a real training segment by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import torch

from .container import read_container, write_container
from .errors import ConfigurationError, DegenerateInputError, ProjectionError
from .extractors import LATENT_CHANNELS, LATENT_TIME

DEFAULT_WINDOW = 3
DEFAULT_K_POOL = 5
NORM_EPS = 1e-12  # batched paths clamp norms; the scalar op raises instead


class PrototypeKind(str, Enum):
    GLOBAL_1D = "GLOBAL_1D"
    PARTIAL_2D = "PARTIAL_2D"
    GLOBAL_2D = "GLOBAL_2D"


KIND_ORDER = [PrototypeKind.GLOBAL_1D, PrototypeKind.PARTIAL_2D, PrototypeKind.GLOBAL_2D]


def latent_dim(kind: PrototypeKind, window: int = DEFAULT_WINDOW) -> int:
    if kind is PrototypeKind.GLOBAL_1D:
        return LATENT_CHANNELS
    if kind is PrototypeKind.PARTIAL_2D:
        return LATENT_CHANNELS * window
    return LATENT_CHANNELS * LATENT_TIME


@dataclass
class PrototypeBank:
    """P prototype vectors with class assignments and projection provenance."""

    vectors: np.ndarray            # (P, D) float32
    class_of: np.ndarray           # (P,) int, indices into class_codes
    kind: PrototypeKind
    class_codes: list[str]
    scale_a: float | None = None   # defaults to sqrt(D)
    window: int = DEFAULT_WINDOW   # latent steps spanned by PARTIAL_2D prototypes
    provenance: list[dict] | None = None  # per prototype: record_id, start, width

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        self.class_of = np.asarray(self.class_of, dtype=np.int64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != self.class_of.shape[0]:
            raise ConfigurationError("vectors and class_of disagree on P")
        expected = latent_dim(self.kind, self.window)
        if self.vectors.shape[1] != expected:
            raise ConfigurationError(
                f"{self.kind.value} prototypes need D={expected}, "
                f"got {self.vectors.shape[1]}"
            )
        if self.class_of.min(initial=0) < 0 or self.class_of.max(initial=0) >= len(self.class_codes):
            raise ConfigurationError("class_of index outside class_codes")
        missing = set(range(len(self.class_codes))) - set(self.class_of.tolist())
        if missing:
            names = [self.class_codes[i] for i in sorted(missing)]
            raise ConfigurationError(f"classes without prototypes: {names}")
        if self.scale_a is None:
            self.scale_a = float(np.sqrt(self.vectors.shape[1]))
        if self.scale_a <= 0:
            raise ConfigurationError("scale_a must be positive")

    @property
    def n_prototypes(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def is_projected(self) -> bool:
        return self.provenance is not None and all(p is not None for p in self.provenance)


def make_bank(kind: PrototypeKind, class_codes, per_class: int, seed: int = 0,
              window: int = DEFAULT_WINDOW, scale_a: float | None = None) -> PrototypeBank:
    """Random-initialized bank with per_class prototypes per class, class-major order."""
    n_classes = len(class_codes)
    d = latent_dim(kind, window)
    rng = np.random.default_rng(seed)
    vectors = rng.random((n_classes * per_class, d), dtype=np.float32)
    class_of = np.repeat(np.arange(n_classes), per_class)
    return PrototypeBank(vectors=vectors, class_of=class_of, kind=kind,
                         class_codes=list(class_codes), scale_a=scale_a, window=window)


def similarity(z, p, a: float) -> float:
    """Scaled cosine similarity <a*z/|z|, p/|p|>; symmetric and bounded by +-a."""
    z = np.asarray(z, dtype=np.float64).ravel()
    p = np.asarray(p, dtype=np.float64).ravel()
    if z.shape != p.shape:
        raise ConfigurationError(f"dimension mismatch {z.shape} vs {p.shape}")
    if a <= 0:
        raise ConfigurationError("scale a must be positive")
    nz = np.linalg.norm(z)
    np_ = np.linalg.norm(p)
    if nz == 0.0 or np_ == 0.0:
        raise DegenerateInputError("zero-norm vector has no direction")
    return float(a * np.dot(z / nz, p / np_))


def sliding_similarity(latent_map, prototype, a: float, window: int = DEFAULT_WINDOW):
    """Similarity of a partial prototype to every time-localized window.

    latent_map is (512, 1, T); returns T - window + 1 scores, stride 1.
    """
    latent_map = np.asarray(latent_map, dtype=np.float64)
    if latent_map.ndim != 3 or latent_map.shape[1] != 1:
        raise ConfigurationError(f"latent map must be (C, 1, T), got {latent_map.shape}")
    t_len = latent_map.shape[2]
    if window > t_len:
        raise ConfigurationError(f"window {window} wider than latent length {t_len}")
    return np.array([
        similarity(latent_map[:, :, t : t + window], prototype, a)
        for t in range(t_len - window + 1)
    ])


def topk_pool(scores, k: int) -> float:
    """Mean of the k largest scores; k larger than the vector is clamped."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.size == 0:
        raise ConfigurationError("cannot pool an empty score vector")
    if k <= 0:
        raise ConfigurationError("k must be positive")
    k = min(k, scores.size)
    top = np.sort(scores)[-k:]
    return float(np.mean(top))


def _norm_rows(x: torch.Tensor) -> torch.Tensor:
    return x / x.norm(dim=-1, keepdim=True).clamp_min(NORM_EPS)


def global_scores(latents: torch.Tensor, bank_vectors: torch.Tensor, a: float) -> torch.Tensor:
    """(B, D) x (P, D) -> (B, P) scaled cosines; zero-norm rows score 0."""
    return a * _norm_rows(latents) @ _norm_rows(bank_vectors).T


def window_matrix(maps: torch.Tensor, window: int) -> torch.Tensor:
    """(B, C, 1, T) -> (B, T-window+1, C*window), channel-major patch layout."""
    if maps.dim() != 4 or maps.shape[2] != 1:
        raise ConfigurationError(f"latent maps must be (B, C, 1, T), got {tuple(maps.shape)}")
    t_len = maps.shape[3]
    if window > t_len:
        raise ConfigurationError(f"window {window} wider than latent length {t_len}")
    x = maps.squeeze(2).unfold(dimension=2, size=window, step=1)  # B, C, W, window
    return x.permute(0, 2, 1, 3).reshape(maps.shape[0], t_len - window + 1, -1)


def partial_scores(maps: torch.Tensor, bank_vectors: torch.Tensor, a: float,
                   window: int, k: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-offset scores (B, W, P) and their top-k means (B, P)."""
    wins = _norm_rows(window_matrix(maps, window))
    per_offset = a * wins @ _norm_rows(bank_vectors).T
    k_eff = min(k, per_offset.shape[1])
    pooled = per_offset.topk(k_eff, dim=1).values.mean(dim=1)
    return per_offset, pooled


def bank_scores_torch(latents: torch.Tensor, bank: PrototypeBank,
                      vectors: torch.Tensor, k_pool: int) -> torch.Tensor:
    """Batched similarity scores for one bank; latents shaped per kind."""
    a = bank.scale_a
    if bank.kind is PrototypeKind.GLOBAL_1D:
        return global_scores(latents, vectors, a)
    if bank.kind is PrototypeKind.GLOBAL_2D:
        return global_scores(latents.reshape(latents.shape[0], -1), vectors, a)
    _, pooled = partial_scores(latents, vectors, a, bank.window, k_pool)
    return pooled


def bank_scores(latent, bank: PrototypeBank, k_pool: int = DEFAULT_K_POOL) -> np.ndarray:
    """Similarity scores of one record's latent against every prototype."""
    lat = torch.as_tensor(np.asarray(latent, dtype=np.float32)).unsqueeze(0)
    vec = torch.as_tensor(bank.vectors)
    with torch.no_grad():
        out = bank_scores_torch(lat, bank, vec, k_pool)
    return out.squeeze(0).numpy()


def similarity_profile(latents_by_kind: dict, banks: list[PrototypeBank],
                       k_pool: int = DEFAULT_K_POOL) -> np.ndarray:
    """Concatenated per-prototype scores over the given banks, in bank order."""
    parts = []
    for bank in banks:
        if bank.kind not in latents_by_kind:
            raise ConfigurationError(f"no latent provided for bank kind {bank.kind.value}")
        parts.append(bank_scores(latents_by_kind[bank.kind], bank, k_pool))
    return np.concatenate(parts)


def candidate_patches(latents: np.ndarray, kind: PrototypeKind,
                      window: int = DEFAULT_WINDOW) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """All projection candidates as rows, with (record index, start offset) keys.

    Global kinds yield one full-latent patch per record (offset 0); the
    partial kind yields every sliding window of every record.
    """
    latents = np.asarray(latents, dtype=np.float32)
    if kind is PrototypeKind.PARTIAL_2D:
        maps = torch.as_tensor(latents)
        wins = window_matrix(maps, window).numpy()
        n, w = wins.shape[0], wins.shape[1]
        keys = [(i, t) for i in range(n) for t in range(w)]
        return wins.reshape(n * w, -1), keys
    flat = latents.reshape(latents.shape[0], -1)
    return flat, [(i, 0) for i in range(flat.shape[0])]


def project_prototypes(bank: PrototypeBank, latents: np.ndarray, labels: np.ndarray,
                       record_ids: list[str]) -> PrototypeBank:
    """Replace each prototype with its most similar eligible training patch.

    Eligible patches come from records whose label set contains the
    prototype's class. Ties break to the lowest (record index, offset);
    zero-norm patches are never candidates. The returned bank carries full
    provenance and satisfies similarity(p_j, source patch) == a exactly.
    """
    labels = np.asarray(labels)
    if labels.shape[0] != len(record_ids):
        raise ConfigurationError("labels and record_ids disagree on N")
    patches, keys = candidate_patches(latents, bank.kind, bank.window)
    patches64 = patches.astype(np.float64)
    norms = np.linalg.norm(patches64, axis=1)
    record_idx = np.array([k[0] for k in keys])
    valid = norms > 0.0

    new_vectors = np.empty_like(bank.vectors)
    provenance: list[dict] = []
    width = bank.window if bank.kind is PrototypeKind.PARTIAL_2D else (
        1 if bank.kind is PrototypeKind.GLOBAL_1D else LATENT_TIME)
    normed = np.zeros_like(patches64)
    np.divide(patches64, norms[:, None], out=normed, where=valid[:, None])

    for j in range(bank.n_prototypes):
        cls = int(bank.class_of[j])
        eligible_records = np.flatnonzero(labels[:, cls] > 0.5)
        if eligible_records.size == 0:
            raise ProjectionError(
                f"class {bank.class_codes[cls]!r} has no positive training record"
            )
        mask = np.isin(record_idx, eligible_records) & valid
        if not mask.any():
            raise ProjectionError(
                f"class {bank.class_codes[cls]!r}: all eligible patches are zero-norm"
            )
        p = bank.vectors[j].astype(np.float64)
        p_norm = np.linalg.norm(p)
        if p_norm == 0.0:
            raise DegenerateInputError(f"prototype {j} is zero before projection")
        cos = normed[mask] @ (p / p_norm)
        local = int(np.argmax(cos))  # first max <=> lowest (record, offset)
        patch_row = np.flatnonzero(mask)[local]
        new_vectors[j] = patches[patch_row]
        rec_i, start = keys[patch_row]
        provenance.append({
            "record_id": record_ids[rec_i],
            "start": int(start),
            "width": int(width),
        })

    return PrototypeBank(
        vectors=new_vectors,
        class_of=bank.class_of.copy(),
        kind=bank.kind,
        class_codes=list(bank.class_codes),
        scale_a=bank.scale_a,
        window=bank.window,
        provenance=provenance,
    )


def save_bank(path, bank: PrototypeBank) -> None:
    meta = {
        "kind": bank.kind.value,
        "P": bank.n_prototypes,
        "D": bank.dim,
        "a": bank.scale_a,
        "window": bank.window,
        "class_codes": bank.class_codes,
        "class_of": bank.class_of.tolist(),
        "provenance": bank.provenance,
    }
    write_container(path, {"vectors": bank.vectors}, meta)


def load_bank(path) -> PrototypeBank:
    arrays, meta = read_container(path)
    return PrototypeBank(
        vectors=arrays["vectors"],
        class_of=np.array(meta["class_of"]),
        kind=PrototypeKind(meta["kind"]),
        class_codes=meta["class_codes"],
        scale_a=meta["a"],
        window=meta["window"],
        provenance=meta["provenance"],
    )
