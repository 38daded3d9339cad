"""ECG records, the fixed fold split, and the on-disk interchange format.

One record is a 12-lead, 10-second signal sampled at 100 Hz (12 x 1000
float32 matrix, millivolts) with a multi-hot label vector and a fold in
1..10. On disk a record is a headerless little-endian float32 file,
row-major (lead-major), listed by a UTF-8 CSV manifest with columns
``id,fold,codes`` where codes are semicolon-separated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IngestionError, ShapeError
from .taxonomy import Branch, LabelTaxonomy, make_taxonomy

N_LEADS = 12
N_SAMPLES = 1000
SAMPLE_RATE_HZ = 100.0
DURATION_S = N_SAMPLES / SAMPLE_RATE_HZ

TRAIN_FOLDS = frozenset(range(1, 9))
VAL_FOLD = 9
TEST_FOLD = 10

LEAD_NAMES = ["I", "II", "III", "aVR", "aVL", "aVF",
              "V1", "V2", "V3", "V4", "V5", "V6"]


@dataclass
class EcgRecord:
    id: str
    signal: np.ndarray  # (12, 1000) float32, mV
    labels: np.ndarray  # multi-hot over the taxonomy order
    fold: int

    def __post_init__(self):
        self.signal = np.asarray(self.signal, dtype=np.float32)
        if self.signal.shape != (N_LEADS, N_SAMPLES):
            raise ShapeError(
                f"record {self.id}: signal shape {self.signal.shape}, "
                f"expected ({N_LEADS}, {N_SAMPLES})"
            )
        self.labels = np.asarray(self.labels, dtype=np.float32)
        if self.labels.ndim != 1:
            raise ShapeError(f"record {self.id}: labels must be a vector")
        if not 1 <= self.fold <= 10:
            raise IngestionError(f"record {self.id}: fold {self.fold} outside 1..10")
        finite_per_lead = np.isfinite(self.signal).any(axis=1)
        if not finite_per_lead.all():
            bad = int(np.flatnonzero(~finite_per_lead)[0])
            raise IngestionError(f"record {self.id}: lead {bad} has no finite samples")


@dataclass
class DatasetSplit:
    """Records grouped by the fixed fold split (1-8 train, 9 val, 10 test)."""

    train: list[EcgRecord]
    val: list[EcgRecord]
    test: list[EcgRecord]
    codes: list[str] = field(default_factory=list)

    def all_records(self) -> list[EcgRecord]:
        return self.train + self.val + self.test

    def label_matrix(self, part: str) -> np.ndarray:
        recs = getattr(self, part)
        if not recs:
            return np.zeros((0, len(self.codes)), dtype=np.float32)
        return np.stack([r.labels for r in recs])


def split_by_fold(records, codes) -> DatasetSplit:
    split = DatasetSplit(train=[], val=[], test=[], codes=list(codes))
    for rec in records:
        if rec.fold in TRAIN_FOLDS:
            split.train.append(rec)
        elif rec.fold == VAL_FOLD:
            split.val.append(rec)
        elif rec.fold == TEST_FOLD:
            split.test.append(rec)
    return split


def load_dataset(manifest_path, signal_dir, taxonomy: LabelTaxonomy) -> DatasetSplit:
    """Read a manifest and its signal files into the fixed fold split."""
    manifest_path = Path(manifest_path)
    signal_dir = Path(signal_dir)
    records = []
    with open(manifest_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rec_id = row["id"]
            sig_path = signal_dir / f"{rec_id}.f32"
            if not sig_path.exists():
                raise IngestionError(f"record {rec_id}: missing signal file {sig_path}")
            raw = np.fromfile(sig_path, dtype="<f4")
            if raw.size != N_LEADS * N_SAMPLES:
                raise ShapeError(
                    f"record {rec_id}: {raw.size} samples in {sig_path}, "
                    f"expected {N_LEADS * N_SAMPLES}"
                )
            codes = [c for c in row["codes"].split(";") if c]
            labels = taxonomy.encode(codes)
            records.append(
                EcgRecord(
                    id=rec_id,
                    signal=raw.reshape(N_LEADS, N_SAMPLES),
                    labels=labels,
                    fold=int(row["fold"]),
                )
            )
    return split_by_fold(records, taxonomy.codes)


def save_dataset(split: DatasetSplit, out_dir, taxonomy: LabelTaxonomy | None = None) -> None:
    """Write records in the interchange format plus manifest (and taxonomy JSON)."""
    out_dir = Path(out_dir)
    sig_dir = out_dir / "signals"
    sig_dir.mkdir(parents=True, exist_ok=True)
    code_list = list(taxonomy.codes) if taxonomy is not None else split.codes
    with open(out_dir / "manifest.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "fold", "codes"])
        for rec in split.all_records():
            present = [code_list[i] for i in np.flatnonzero(rec.labels > 0.5)]
            writer.writerow([rec.id, rec.fold, ";".join(present)])
            np.ascontiguousarray(rec.signal, dtype="<f4").tofile(sig_dir / f"{rec.id}.f32")
    if taxonomy is not None:
        (out_dir / "taxonomy.json").write_text(taxonomy.to_json(), encoding="utf-8")


def branch_view(split: DatasetSplit, branch: Branch, taxonomy: LabelTaxonomy) -> DatasetSplit:
    """Restrict label vectors to one branch's codes; records are all retained."""
    idx = taxonomy.branch_indices(branch)
    codes = taxonomy.branch_codes(branch)

    def restrict(recs):
        return [
            EcgRecord(id=r.id, signal=r.signal, labels=r.labels[idx], fold=r.fold)
            for r in recs
        ]

    return DatasetSplit(
        train=restrict(split.train),
        val=restrict(split.val),
        test=restrict(split.test),
        codes=codes,
    )


def records_by_id(split: DatasetSplit) -> dict[str, EcgRecord]:
    return {r.id: r for r in split.all_records()}
