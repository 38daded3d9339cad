"""Case-based explanations: for a record and class, the most contributing
prototypes with their real source training segments.

Entries are ranked by contribution (similarity times the class head weight)
rather than raw similarity, since the classifier can down-weight a similar
but irrelevant prototype; the raw similarity is still reported. Every entry
resolves to projection provenance, so the explanation segment is a real
training patch by construction. Contributions plus the class bias sum to
the class logit.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import torch

from .errors import ConfigurationError
from .extractors import LATENT_TIME
from .prototypes import PrototypeKind, sliding_similarity
from .records import DURATION_S


def latent_window_to_seconds(offset: int, width: int = 3,
                             axis_len: int = LATENT_TIME) -> tuple[float, float]:
    """Linear map of a latent-step window to seconds of input."""
    if offset < 0 or width < 1 or offset + width > axis_len:
        raise ConfigurationError(
            f"window [{offset}, {offset + width}) outside latent axis 0..{axis_len}"
        )
    step = DURATION_S / axis_len
    return offset * step, (offset + width) * step


@dataclass
class ExplanationEntry:
    rank: int
    prototype_id: int            # index into the fused profile order
    kind: str
    class_code: str              # the prototype's own class
    similarity: float
    weight: float
    contribution: float
    source_record_id: str
    source_window_seconds: tuple[float, float]
    test_window_seconds: tuple[float, float] | None  # best match on the test record


@dataclass
class Explanation:
    test_id: str
    class_code: str
    class_logit: float
    bias: float
    entries: list[ExplanationEntry]

    def to_json(self) -> str:
        return json.dumps({
            "version": 1,
            "test_id": self.test_id,
            "class_code": self.class_code,
            "class_logit": self.class_logit,
            "bias": self.bias,
            "entries": [asdict(e) for e in self.entries],
        }, indent=2)


def explain(fused, record, class_code: str, top_m: int = 3) -> Explanation:
    """Top-m prototypes by contribution to the class logit for one record."""
    taxonomy = fused.taxonomy
    if class_code not in taxonomy.index_of:
        raise ConfigurationError(f"unknown class {class_code!r}")
    banks = fused.banks()
    for bank in banks:
        if not bank.is_projected():
            raise ConfigurationError(
                f"{bank.kind.value} bank has no provenance; explanations "
                "require projected prototypes"
            )
    profile = fused.profiles([record])[0].astype(np.float64)
    class_idx = taxonomy.index_of[class_code]
    weights = fused.fusion_weights[class_idx].astype(np.float64)
    bias = float(fused.fusion_bias[class_idx])
    contributions = profile * weights
    logit = float(contributions.sum() + bias)

    # per-bank bookkeeping: global prototype id -> (bank, local index)
    owners = []
    for bank in banks:
        owners.extend((bank, j) for j in range(bank.n_prototypes))

    order = np.argsort(-contributions, kind="stable")
    top_m = min(top_m, len(order))
    entries = []
    partial_latents = {}
    for rank, proto_id in enumerate(order[:top_m], start=1):
        bank, local = owners[proto_id]
        prov = bank.provenance[local]
        if bank.kind is PrototypeKind.PARTIAL_2D:
            src_window = latent_window_to_seconds(prov["start"], prov["width"])
            test_window = _best_match_window(fused, bank, local, record, partial_latents)
        elif bank.kind is PrototypeKind.GLOBAL_2D:
            src_window = latent_window_to_seconds(0, LATENT_TIME)
            test_window = None
        else:  # GLOBAL_1D: the pooled vector spans the whole record
            src_window = (0.0, DURATION_S)
            test_window = None
        entries.append(ExplanationEntry(
            rank=rank,
            prototype_id=int(proto_id),
            kind=bank.kind.value,
            class_code=bank.class_codes[int(bank.class_of[local])],
            similarity=float(profile[proto_id]),
            weight=float(weights[proto_id]),
            contribution=float(contributions[proto_id]),
            source_record_id=prov["record_id"],
            source_window_seconds=src_window,
            test_window_seconds=test_window,
        ))
    return Explanation(
        test_id=record.id,
        class_code=class_code,
        class_logit=logit,
        bias=bias,
        entries=entries,
    )


def _best_match_window(fused, bank, local: int, record, cache: dict):
    """Most activated sliding-window position of a partial prototype on the
    test record, in seconds."""
    from .taxonomy import Branch

    model = fused.branches[Branch.MORPHOLOGY]
    if "latent" not in cache:
        x = model.input_tensor(record.signal)
        model.eval()
        with torch.no_grad():
            cache["latent"] = model.latents(x).squeeze(0).numpy()
    scores = sliding_similarity(cache["latent"], bank.vectors[local],
                                bank.scale_a, bank.window)
    offset = int(np.argmax(scores))
    return latent_window_to_seconds(offset, bank.window)
