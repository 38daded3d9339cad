"""Diagnostic label taxonomy: code list plus the three-branch partition.

The canonical PTB-XL taxonomy groups the 71 SCP codes into a rhythm branch
(16 codes, long-range temporal patterns), a morphology branch (52 codes,
localized waveform shape), and a global branch (3 codes, diffuse full-record
abnormalities). Branch membership decides which prototype bank a class
belongs to.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import TaxonomyError


class Branch(str, Enum):
    RHYTHM = "RHYTHM"
    MORPHOLOGY = "MORPHOLOGY"
    GLOBAL = "GLOBAL"


RHYTHM_CODES = [
    "1AVB", "2AVB", "3AVB", "AFIB", "AFLT", "BIGU", "IVCD", "PACE",
    "PSVT", "SARRH", "SBRAD", "SR", "STACH", "SVARR", "SVTAC", "TRIGU",
]

MORPHOLOGY_CODES = [
    "ABQRS", "ALMI", "AMI", "ANEUR", "ASMI", "CLBBB", "CRBBB", "HVOLT",
    "ILBBB", "ILMI", "IMI", "INJAL", "INJAS", "INJIL", "INJIN", "INJLA",
    "INVT", "IPLMI", "IPMI", "IRBBB", "ISCAL", "ISCAN", "ISCAS", "ISCIL",
    "ISCIN", "ISCLA", "ISC_", "LAFB", "LAO/LAE", "LMI", "LNGQT", "LOWT",
    "LPFB", "LPR", "LVH", "LVOLT", "NDT", "NST_", "NT_", "PAC",
    "PMI", "PRC(S)", "PVC", "QWAVE", "RAO/RAE", "RVH", "SEHYP", "STD_",
    "STE_", "TAB_", "VCLVH", "WPW",
]

GLOBAL_CODES = ["DIG", "EL", "NORM"]

BRANCH_ORDER = [Branch.RHYTHM, Branch.MORPHOLOGY, Branch.GLOBAL]


@dataclass(frozen=True)
class LabelTaxonomy:
    """Ordered code list with a total, disjoint branch assignment.

    Codes are ordered rhythm first, then morphology, then global, so a
    branch restriction is a contiguous slice of the multi-hot vector.
    """

    codes: tuple[str, ...]
    branch_of: dict[str, Branch]
    index_of: dict[str, int] = field(init=False)

    def __post_init__(self):
        if len(set(self.codes)) != len(self.codes):
            raise TaxonomyError("duplicate codes in taxonomy")
        missing = [c for c in self.codes if c not in self.branch_of]
        if missing:
            raise TaxonomyError(f"codes without a branch: {missing}")
        extra = [c for c in self.branch_of if c not in self.codes]
        if extra:
            raise TaxonomyError(f"branch assignments for unknown codes: {extra}")
        object.__setattr__(self, "index_of", {c: i for i, c in enumerate(self.codes)})

    def __len__(self):
        return len(self.codes)

    def branch_codes(self, branch: Branch) -> list[str]:
        return [c for c in self.codes if self.branch_of[c] is branch]

    def branch_indices(self, branch: Branch) -> np.ndarray:
        return np.array(
            [i for i, c in enumerate(self.codes) if self.branch_of[c] is branch],
            dtype=np.int64,
        )

    def encode(self, present_codes) -> np.ndarray:
        """Multi-hot vector over the taxonomy order."""
        vec = np.zeros(len(self.codes), dtype=np.float32)
        for code in present_codes:
            if code not in self.index_of:
                raise TaxonomyError(f"unknown label code {code!r}")
            vec[self.index_of[code]] = 1.0
        return vec

    def to_json(self) -> str:
        rows = [
            {"code": c, "branch": self.branch_of[c].value, "index": i}
            for i, c in enumerate(self.codes)
        ]
        return json.dumps({"version": 1, "codes": rows}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "LabelTaxonomy":
        data = json.loads(text)
        rows = sorted(data["codes"], key=lambda r: r["index"])
        codes = tuple(r["code"] for r in rows)
        branch_of = {r["code"]: Branch(r["branch"]) for r in rows}
        return cls(codes=codes, branch_of=branch_of)


def make_taxonomy(rhythm, morphology, global_) -> LabelTaxonomy:
    codes = tuple(list(rhythm) + list(morphology) + list(global_))
    branch_of = {}
    for c in rhythm:
        branch_of[c] = Branch.RHYTHM
    for c in morphology:
        branch_of[c] = Branch.MORPHOLOGY
    for c in global_:
        branch_of[c] = Branch.GLOBAL
    return LabelTaxonomy(codes=codes, branch_of=branch_of)


def ptbxl_taxonomy() -> LabelTaxonomy:
    """The canonical 71-code taxonomy (16 rhythm / 52 morphology / 3 global)."""
    tax = make_taxonomy(RHYTHM_CODES, MORPHOLOGY_CODES, GLOBAL_CODES)
    counts = {
        Branch.RHYTHM: len(tax.branch_codes(Branch.RHYTHM)),
        Branch.MORPHOLOGY: len(tax.branch_codes(Branch.MORPHOLOGY)),
        Branch.GLOBAL: len(tax.branch_codes(Branch.GLOBAL)),
    }
    if counts != {Branch.RHYTHM: 16, Branch.MORPHOLOGY: 52, Branch.GLOBAL: 3}:
        raise TaxonomyError(f"canonical taxonomy has wrong branch sizes: {counts}")
    return tax
