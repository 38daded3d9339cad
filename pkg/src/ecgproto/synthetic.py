"""Synthetic multi-label dataset with one class family per branch.

Rhythm classes are distinguished by oscillation frequency over the whole
record (fast vs slow, mutually exclusive); morphology classes are short
planted transients (a positive bump, a biphasic notch, a negative dip) on
characteristic lead groups, repeated a few times per positive record; the
global class is a large sub-band baseline wander across all leads for the
full duration. Label co-occurrence is built in: the notch frequently
accompanies the bump, while the dip never does, giving the contrastive
term a co-occurring and a disjoint class pair to separate.
"""

from __future__ import annotations

import numpy as np

from .filtering import highpass_filter
from .records import DatasetSplit, EcgRecord, split_by_fold
from .taxonomy import LabelTaxonomy, make_taxonomy

RHYTHM_CLASSES = ["RFAST", "RSLOW"]
MORPH_CLASSES = ["MSPIKE", "MNOTCH", "MDIP"]
GLOBAL_CLASSES = ["GWANDER"]

P_SPIKE = 0.45
P_NOTCH_GIVEN_SPIKE = 0.8
P_NOTCH_NO_SPIKE = 0.15
P_DIP_NO_SPIKE = 0.5  # never co-occurs with the spike
P_WANDER = 0.35

SPIKE_LEADS = np.arange(6, 10)
NOTCH_LEADS = np.arange(0, 3)
DIP_LEADS = np.arange(3, 6)


def synthetic_taxonomy() -> LabelTaxonomy:
    return make_taxonomy(RHYTHM_CLASSES, MORPH_CLASSES, GLOBAL_CLASSES)


def _transient_centers(rng, count):
    return rng.uniform(1.0, 9.0, size=count)


def _add_bump(sig, t, rng, leads, sign=1.0):
    for center in _transient_centers(rng, rng.integers(2, 5)):
        width = rng.uniform(0.10, 0.22)
        amp = sign * rng.uniform(1.6, 2.6)
        pulse = amp * np.exp(-0.5 * ((t - center) / width) ** 2)
        for lead in leads:
            sig[lead] += pulse * rng.uniform(0.8, 1.2)


def _add_notch(sig, t, rng, leads):
    # biphasic: derivative-of-Gaussian wave
    for center in _transient_centers(rng, rng.integers(2, 5)):
        width = rng.uniform(0.08, 0.16)
        amp = rng.uniform(1.6, 2.6)
        z = (t - center) / width
        pulse = -amp * z * np.exp(-0.5 * z**2)
        for lead in leads:
            sig[lead] += pulse * rng.uniform(0.8, 1.2)


def generate_record(rec_id: str, fold: int, rng, taxonomy: LabelTaxonomy,
                    filtered: bool = True) -> EcgRecord:
    t = np.arange(1000) / 100.0
    sig = 0.08 * rng.normal(size=(12, 1000))

    fast = rng.random() < 0.5
    freq = rng.uniform(7.0, 9.0) if fast else rng.uniform(1.8, 2.5)
    for lead in range(12):
        phase = rng.uniform(0, 2 * np.pi)
        sig[lead] += rng.uniform(0.6, 1.4) * np.sin(2 * np.pi * freq * t + phase)

    has_spike = rng.random() < P_SPIKE
    if has_spike:
        has_notch = rng.random() < P_NOTCH_GIVEN_SPIKE
        has_dip = False
    else:
        has_notch = rng.random() < P_NOTCH_NO_SPIKE
        has_dip = rng.random() < P_DIP_NO_SPIKE
    if has_spike:
        _add_bump(sig, t, rng, SPIKE_LEADS, sign=+1.0)
    if has_notch:
        _add_notch(sig, t, rng, NOTCH_LEADS)
    if has_dip:
        _add_bump(sig, t, rng, DIP_LEADS, sign=-1.0)

    has_wander = rng.random() < P_WANDER
    if has_wander:
        # phase-consistent pattern: case-based prototypes match directions,
        # not band energies, so the class must be a repeatable waveform
        wander_freq = rng.uniform(0.68, 0.72)  # partially passes the 0.5 Hz highpass
        for lead in range(12):
            sig[lead] += rng.uniform(1.5, 2.5) * np.sin(2 * np.pi * wander_freq * t)

    codes = []
    codes.append("RFAST" if fast else "RSLOW")
    if has_spike:
        codes.append("MSPIKE")
    if has_notch:
        codes.append("MNOTCH")
    if has_dip:
        codes.append("MDIP")
    if has_wander:
        codes.append("GWANDER")

    sig = sig.astype(np.float32)
    if filtered:
        sig = highpass_filter(sig)
    return EcgRecord(id=rec_id, signal=sig, labels=taxonomy.encode(codes), fold=fold)


def synthetic_train_config(branch: str, seed: int = 1) -> "TrainConfig":
    """Desk-scale training settings known to converge on this corpus in
    minutes on CPU. Loss coefficients are rescaled from the full-scale
    defaults because the tiny extractor and small banks change the relative
    magnitude of the geometry terms."""
    from .losses import LossConfig
    from .training import TrainConfig

    common = dict(extractor="tiny", per_class=4, batch_size=32, lr=1e-3,
                  warmup_epochs=2, projection_every=5, seed=seed)
    if branch == "rhythm":
        return TrainConfig(branch="rhythm", max_epochs=14, patience=6,
                           loss=LossConfig(lambda_clst=0.01, lambda_sep=0.001,
                                           lambda_div=1.0, lambda_cntrst=2.0),
                           **common)
    if branch == "morph":
        return TrainConfig(branch="morph", max_epochs=26, patience=8,
                           loss=LossConfig(lambda_clst=0.01, lambda_sep=0.001,
                                           lambda_div=1.0, lambda_cntrst=2.0),
                           **common)
    if branch == "global":
        return TrainConfig(branch="global", max_epochs=12, patience=6,
                           loss=LossConfig(lambda_clst=0.05, lambda_sep=0.05,
                                           lambda_div=1.0, lambda_cntrst=0.05),
                           **common)
    raise ValueError(f"unknown branch {branch!r}")


def make_synthetic_split(n_train: int = 600, n_val: int = 100, n_test: int = 100,
                         seed: int = 0, filtered: bool = True
                         ) -> tuple[DatasetSplit, LabelTaxonomy]:
    """Deterministic synthetic corpus with every class present in every part."""
    taxonomy = synthetic_taxonomy()
    rng = np.random.default_rng(seed)
    records = []
    total = n_train + n_val + n_test
    for i in range(total):
        if i < n_train:
            fold = (i % 8) + 1
        elif i < n_train + n_val:
            fold = 9
        else:
            fold = 10
        records.append(generate_record(f"synth{i:05d}", fold, rng, taxonomy, filtered))
    split = split_by_fold(records, taxonomy.codes)
    for part in ("train", "val", "test"):
        counts = split.label_matrix(part).sum(axis=0)
        if (counts == 0).any():
            missing = [taxonomy.codes[i] for i in np.flatnonzero(counts == 0)]
            raise RuntimeError(
                f"synthetic {part} split lost classes {missing}; use another seed"
            )
    return split, taxonomy
