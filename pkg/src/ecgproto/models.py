"""Branch models: a feature extractor, a prototype layer, and a linear head.

A branch's logits are W @ s + b where s is the per-prototype similarity
score vector of the input. The head is initialized with 1 on the entry of
each prototype's own class and -0.5 everywhere else. Checkpoints are the
single-file container format with every parameter as a named float32 array
and the bank/class metadata in the JSON header.
"""

from __future__ import annotations

import hashlib

import numpy as np
import torch
import torch.nn as nn

from .container import read_container, write_container
from .errors import ConfigurationError
from .extractors import build_extractor, load_weight_arrays
from .prototypes import (
    DEFAULT_K_POOL,
    PrototypeBank,
    PrototypeKind,
    bank_scores_torch,
)
from .taxonomy import Branch

BRANCH_KIND = {
    Branch.RHYTHM: PrototypeKind.GLOBAL_1D,
    Branch.MORPHOLOGY: PrototypeKind.PARTIAL_2D,
    Branch.GLOBAL: PrototypeKind.GLOBAL_2D,
}
BRANCH_DIM = {Branch.RHYTHM: "1d", Branch.MORPHOLOGY: "2d", Branch.GLOBAL: "2d"}
DEFAULT_PER_CLASS = {
    PrototypeKind.GLOBAL_1D: 5,
    PrototypeKind.PARTIAL_2D: 18,
    PrototypeKind.GLOBAL_2D: 7,
}


def init_classifier(class_of, n_classes: int) -> np.ndarray:
    """Head weights: 1 on a prototype's assigned class, -0.5 elsewhere."""
    class_of = np.asarray(class_of, dtype=np.int64)
    w = np.full((n_classes, len(class_of)), -0.5, dtype=np.float32)
    w[class_of, np.arange(len(class_of))] = 1.0
    return w


class BranchModel(nn.Module):
    """One prototype branch; forward returns (logits, similarity scores)."""

    def __init__(self, extractor: nn.Module, bank: PrototypeBank,
                 variant: str, k_pool: int = DEFAULT_K_POOL):
        super().__init__()
        self.extractor = extractor
        self.variant = variant
        self.kind = bank.kind
        self.class_codes = list(bank.class_codes)
        self.class_of = bank.class_of.copy()
        self.scale_a = float(bank.scale_a)
        self.window = bank.window
        self.k_pool = k_pool
        self.provenance = list(bank.provenance) if bank.provenance else None
        self.prototypes = nn.Parameter(torch.as_tensor(bank.vectors.copy()))
        n_classes = len(self.class_codes)
        self.head_w = nn.Parameter(
            torch.as_tensor(init_classifier(self.class_of, n_classes))
        )
        self.head_b = nn.Parameter(torch.zeros(n_classes))

    @property
    def n_prototypes(self) -> int:
        return self.prototypes.shape[0]

    def input_tensor(self, signals: np.ndarray) -> torch.Tensor:
        x = torch.as_tensor(np.asarray(signals, dtype=np.float32))
        if x.dim() == 2:
            x = x.unsqueeze(0)
        if self.kind is PrototypeKind.GLOBAL_1D:
            return x
        return x.unsqueeze(1)  # (B, 1, 12, 1000)

    def latents(self, x: torch.Tensor) -> torch.Tensor:
        return self.extractor(x)

    def scores_from_latents(self, latents: torch.Tensor) -> torch.Tensor:
        bank = self.bank_snapshot(detach=False)
        return bank_scores_torch(latents, bank, self.prototypes, self.k_pool)

    def forward(self, x: torch.Tensor):
        scores = self.scores_from_latents(self.latents(x))
        logits = scores @ self.head_w.T + self.head_b
        return logits, scores

    def bank_snapshot(self, detach: bool = True) -> PrototypeBank:
        vectors = self.prototypes.detach().cpu().numpy().copy() if detach \
            else self.prototypes.detach().cpu().numpy()
        return PrototypeBank(
            vectors=vectors,
            class_of=self.class_of.copy(),
            kind=self.kind,
            class_codes=list(self.class_codes),
            scale_a=self.scale_a,
            window=self.window,
            provenance=list(self.provenance) if self.provenance else None,
        )

    def install_bank(self, bank: PrototypeBank) -> None:
        if bank.vectors.shape != tuple(self.prototypes.shape):
            raise ConfigurationError("bank shape does not match model prototypes")
        with torch.no_grad():
            self.prototypes.copy_(torch.as_tensor(bank.vectors))
        self.provenance = list(bank.provenance) if bank.provenance else None


def make_branch_model(branch: Branch, class_codes, variant: str = "tiny",
                      per_class: int | None = None, scale_a: float | None = None,
                      k_pool: int = DEFAULT_K_POOL, window: int = 3,
                      dropout: float = 0.0, seed: int = 0) -> BranchModel:
    from .prototypes import make_bank

    kind = BRANCH_KIND[branch]
    if per_class is None:
        per_class = DEFAULT_PER_CLASS[kind]
    extractor = build_extractor(BRANCH_DIM[branch], variant, dropout=dropout)
    bank = make_bank(kind, class_codes, per_class, seed=seed, window=window,
                     scale_a=scale_a)
    return BranchModel(extractor, bank, variant=variant, k_pool=k_pool)


def batched(n: int, batch_size: int):
    for start in range(0, n, batch_size):
        yield slice(start, min(start + batch_size, n))


def extract_latents(model: BranchModel, signals: np.ndarray,
                    batch_size: int = 64) -> np.ndarray:
    """Eval-mode latents for a stack of signals, shaped per the branch kind."""
    was_training = model.training
    model.eval()
    outs = []
    with torch.no_grad():
        for sl in batched(signals.shape[0], batch_size):
            x = model.input_tensor(signals[sl])
            outs.append(model.latents(x).cpu().numpy())
    if was_training:
        model.train()
    return np.concatenate(outs, axis=0)


def profile_matrix(model: BranchModel, signals: np.ndarray,
                   batch_size: int = 64) -> np.ndarray:
    """Eval-mode similarity profiles (N, P) for a stack of signals."""
    was_training = model.training
    model.eval()
    outs = []
    with torch.no_grad():
        for sl in batched(signals.shape[0], batch_size):
            x = model.input_tensor(signals[sl])
            _, scores = model(x)
            outs.append(scores.cpu().numpy())
    if was_training:
        model.train()
    return np.concatenate(outs, axis=0)


def logits_matrix(model: BranchModel, signals: np.ndarray,
                  batch_size: int = 64) -> np.ndarray:
    was_training = model.training
    model.eval()
    outs = []
    with torch.no_grad():
        for sl in batched(signals.shape[0], batch_size):
            x = model.input_tensor(signals[sl])
            logits, _ = model(x)
            outs.append(logits.cpu().numpy())
    if was_training:
        model.train()
    return np.concatenate(outs, axis=0)


def state_checksum(tensors) -> str:
    """Hash of a parameter iterable; used to verify freeze contracts."""
    h = hashlib.sha256()
    for t in tensors:
        h.update(t.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def save_model(path, model: BranchModel, branch: Branch, extra_meta: dict | None = None):
    arrays = {"prototypes": model.prototypes.detach().cpu().numpy(),
              "head_w": model.head_w.detach().cpu().numpy(),
              "head_b": model.head_b.detach().cpu().numpy()}
    for name, tensor in model.extractor.state_dict().items():
        if torch.is_floating_point(tensor):
            arrays[f"extractor.{name}"] = tensor.detach().cpu().numpy()
    meta = {
        "kind": model.kind.value,
        "branch": branch.value,
        "variant": model.variant,
        "dim": BRANCH_DIM[branch],
        "class_codes": model.class_codes,
        "class_of": model.class_of.tolist(),
        "a": model.scale_a,
        "window": model.window,
        "k_pool": model.k_pool,
        "provenance": model.provenance,
    }
    meta.update(extra_meta or {})
    write_container(path, arrays, meta)


def load_model(path) -> tuple[BranchModel, dict]:
    arrays, meta = read_container(path)
    branch = Branch(meta["branch"])
    extractor = build_extractor(meta["dim"], meta["variant"])
    ext_arrays = {k[len("extractor."):]: v for k, v in arrays.items()
                  if k.startswith("extractor.")}
    load_weight_arrays(extractor, ext_arrays)
    bank = PrototypeBank(
        vectors=arrays["prototypes"],
        class_of=np.array(meta["class_of"]),
        kind=PrototypeKind(meta["kind"]),
        class_codes=meta["class_codes"],
        scale_a=meta["a"],
        window=meta["window"],
        provenance=meta["provenance"],
    )
    model = BranchModel(extractor, bank, variant=meta["variant"], k_pool=meta["k_pool"])
    with torch.no_grad():
        model.head_w.copy_(torch.as_tensor(arrays["head_w"]))
        model.head_b.copy_(torch.as_tensor(arrays["head_b"]))
    model.eval()
    return model, meta
