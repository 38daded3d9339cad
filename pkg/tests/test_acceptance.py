"""Acceptance suite: one test per gating criterion, each printing a PASS line
with the measured figures (run with -s to see them).

The full-scale reference results (fusion macro-AUROC 0.9132, weighted
0.9066 [0.9000, 0.9128] on the complete 71-label corpus) are not gated
here; they need full-corpus training on GPU (scripts/run_ptbxl_full.py).
The desk-scale criteria below gate instead. The review-service round-trip
criterion for the browser UI lives in frontend/ (vitest); the service
itself is exercised over HTTP in tests/test_review_service.py, so this
suite runs with no frontend built.
"""

import time

import numpy as np
import pytest
import torch

from ecgproto.evaluation import (
    auroc,
    bootstrap_metrics,
    per_class_auroc,
    macro_auroc,
)
from ecgproto.losses import (
    LossConfig,
    bce_loss,
    clustering_loss,
    composite_loss,
    contrastive_loss,
    jaccard_matrix,
    orthogonality_loss,
    prototype_similarity_matrix,
    separation_loss,
)
from ecgproto.models import init_classifier, make_branch_model
from ecgproto.pipeline import evaluate_fused, fit_fusion_stage, train_branch
from ecgproto.prototypes import (
    PrototypeKind,
    candidate_patches,
    make_bank,
    project_prototypes,
    similarity,
    sliding_similarity,
    topk_pool,
)
from ecgproto.synthetic import make_synthetic_split, synthetic_train_config
from ecgproto.taxonomy import Branch
from ecgproto.training import on_class_mask, train_fusion
from oracles import (
    auroc_oracle,
    bce_oracle,
    clustering_oracle,
    contrastive_oracle,
    jaccard_oracle,
    orthogonality_oracle,
    separation_oracle,
)

RNG_SEED = 20240811


def rel_err(got, want):
    return abs(got - want) / max(1.0, abs(want))


def test_loss_oracle_equivalence():
    """Each loss term matches a brute-force double loop on >= 100 instances."""
    start = time.monotonic()
    rng = np.random.default_rng(RNG_SEED)
    n_instances = 120
    worst = 0.0
    for _ in range(n_instances):
        n = int(rng.integers(1, 9))
        c = int(rng.integers(1, 7))
        p = int(rng.integers(2, 13))
        d = int(rng.integers(2, 17))
        logits = rng.normal(scale=3, size=(n, c))
        labels = (rng.random((n, c)) < 0.45).astype(float)
        sims = rng.normal(scale=2, size=(n, p))
        vectors = rng.normal(size=(p, d))
        class_of = rng.integers(0, c, size=p)
        weights = rng.uniform(0.25, 4.0, size=c)
        a = float(rng.uniform(0.5, 8.0))
        co = jaccard_oracle(labels, class_of)
        pairs = [
            (float(bce_loss(logits, labels, weights)),
             bce_oracle(logits, labels, weights)),
            (float(clustering_loss(sims, labels, class_of)),
             clustering_oracle(sims, labels, class_of)),
            (float(separation_loss(sims, labels, class_of)),
             separation_oracle(sims, labels, class_of)),
            (float(orthogonality_loss(vectors)), orthogonality_oracle(vectors)),
            (float(contrastive_loss(vectors, co, a)),
             contrastive_oracle(vectors, co, a)),
        ]
        for got, want in pairs:
            err = rel_err(got, want)
            worst = max(worst, err)
            assert err <= 1e-6
    elapsed = time.monotonic() - start
    assert elapsed < 30.0
    print(f"\n[PASS] loss-oracle equivalence: {n_instances} instances, "
          f"worst rel err {worst:.2e}, {elapsed:.1f}s")


def test_gradient_checks():
    """Total-objective gradients vs central differences (step 1e-4, rel 1e-4)."""
    rng = np.random.default_rng(RNG_SEED + 1)
    worst = 0.0
    for trial in range(25):
        n = int(rng.integers(2, 7))
        c = int(rng.integers(2, 5))
        p = int(rng.integers(2, 9))
        d = int(rng.integers(3, 13))
        labels = torch.tensor((rng.random((n, c)) < 0.5).astype(float))
        class_of = rng.integers(0, c, size=p)
        latents = torch.tensor(rng.normal(size=(n, d)))
        co = torch.tensor(jaccard_oracle(labels.numpy(), class_of))
        cfg = LossConfig(
            lambda_clst=float(rng.uniform(0, 2)),
            lambda_sep=float(rng.uniform(0, 2)),
            lambda_div=float(rng.uniform(0, 2)),
            lambda_cntrst=float(rng.uniform(0, 2)),
        )
        a = float(rng.uniform(0.5, 4.0))
        logits0 = torch.tensor(rng.normal(size=(n, c)))
        protos0 = torch.tensor(rng.normal(size=(p, d)))

        def objective(logits, protos):
            z = latents / latents.norm(dim=1, keepdim=True)
            q = protos / protos.norm(dim=1, keepdim=True)
            total, _ = composite_loss(logits, labels, a * z @ q.T, protos, co,
                                      class_of, a, cfg)
            return total

        logits = logits0.clone().requires_grad_(True)
        protos = protos0.clone().requires_grad_(True)
        objective(logits, protos).backward()
        step = 1e-4
        for leaf, grad, which in ((logits, logits.grad, 0), (protos, protos.grad, 1)):
            fd = torch.zeros_like(leaf).reshape(-1)
            flat = leaf.detach().reshape(-1)
            for idx in range(flat.numel()):
                vals = []
                for sign in (+1, -1):
                    bumped = flat.clone()
                    bumped[idx] += sign * step
                    args = [logits0.clone(), protos0.clone()]
                    args[which] = bumped.reshape(leaf.shape)
                    vals.append(float(objective(*args)))
                fd[idx] = (vals[0] - vals[1]) / (2 * step)
            rel = float((grad.reshape(-1) - fd).abs().max()
                        / grad.abs().max().clamp_min(1e-8))
            worst = max(worst, rel)
            assert rel < 1e-4, f"trial {trial}: rel err {rel}"
    print(f"\n[PASS] gradient checks: 25 instances, worst rel err {worst:.2e}")


def test_projection_exactness():
    """Projected prototypes sit exactly on their source patches (sim == a
    within 1e-5) and agree with the exhaustive-scan argmax on toy sets."""
    rng = np.random.default_rng(RNG_SEED + 2)

    # global kind, 500 candidate patches
    latents = rng.normal(size=(500, 512)).astype(np.float32)
    labels = (rng.random((500, 3)) < 0.5).astype(np.float32)
    labels[:3] = np.eye(3)
    ids = [f"r{i}" for i in range(500)]
    bank = make_bank(PrototypeKind.GLOBAL_1D, ["a", "b", "c"], 3, seed=9)
    projected = project_prototypes(bank, latents, labels, ids)
    patches, _ = candidate_patches(latents, bank.kind)
    for j in range(bank.n_prototypes):
        cls = int(bank.class_of[j])
        best, best_s = None, -np.inf
        for i in range(len(patches)):
            if labels[i, cls] <= 0.5:
                continue
            s = similarity(patches[i], bank.vectors[j], bank.scale_a)
            if s > best_s + 1e-15:
                best, best_s = i, s
        assert projected.provenance[j]["record_id"] == ids[best]
        got = similarity(projected.vectors[j], patches[best], projected.scale_a)
        assert abs(got - projected.scale_a) <= 1e-5

    # partial kind: 16 records x 30 windows = 480 patches
    maps = rng.normal(size=(16, 512, 1, 32)).astype(np.float32)
    p_labels = np.ones((16, 1), dtype=np.float32)
    p_bank = make_bank(PrototypeKind.PARTIAL_2D, ["w"], 2, seed=10)
    p_projected = project_prototypes(p_bank, maps, p_labels, [f"m{i}" for i in range(16)])
    p_patches, p_keys = candidate_patches(maps, p_bank.kind)
    for j in range(p_bank.n_prototypes):
        sims = [similarity(pt, p_bank.vectors[j], p_bank.scale_a) for pt in p_patches]
        best = int(np.argmax(sims))
        rec_i, start = p_keys[best]
        assert p_projected.provenance[j] == {"record_id": f"m{rec_i}",
                                             "start": start, "width": 3}
    print("\n[PASS] projection exactness: sim == a within 1e-5; argmax matches "
          "exhaustive scan on 500- and 480-patch toy sets")


def test_similarity_and_pooling_oracles():
    """Scale invariance to 1e-9; top-k equals the sort oracle on 1000 random
    vectors; the 32-step map yields exactly 30 width-3 windows."""
    rng = np.random.default_rng(RNG_SEED + 3)
    for _ in range(200):
        z = rng.normal(size=32)
        p = rng.normal(size=32)
        c = float(rng.uniform(1e-6, 1e6))
        base = similarity(z, p, 3.0)
        assert abs(similarity(c * z, p, 3.0) - base) <= 1e-9 * max(1.0, abs(base))
        assert abs(similarity(z, c * p, 3.0) - base) <= 1e-9 * max(1.0, abs(base))

    for _ in range(1000):
        scores = rng.normal(size=int(rng.integers(1, 40)))
        k = int(rng.integers(1, 45))
        want = np.mean(sorted(scores, reverse=True)[: min(k, len(scores))])
        assert abs(topk_pool(scores, k) - want) <= 1e-9

    latent_map = rng.normal(size=(512, 1, 32))
    proto = rng.normal(size=512 * 3)
    assert sliding_similarity(latent_map, proto, 2.0).shape == (30,)
    print("\n[PASS] similarity/pooling oracles: scale invariance 1e-9; 1000 "
          "top-k vectors match sort oracle; 30 sliding windows for (32, 3)")


def test_jaccard_matrix_brute_force():
    """Matrix equals the double-loop count for N <= 64; symmetric, unit diag."""
    rng = np.random.default_rng(RNG_SEED + 4)
    for n in [1, 2, 7, 16, 33, 64, 64, 64]:
        c = int(rng.integers(1, 6))
        labels = (rng.random((n, c)) < 0.5).astype(float)
        class_of = rng.integers(0, c, size=int(rng.integers(2, 10)))
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            got = jaccard_matrix(labels, class_of)
        want = jaccard_oracle(labels, class_of)
        assert np.allclose(got, want, atol=1e-12)
        assert np.allclose(got, got.T)
        assert np.allclose(np.diag(got), 1.0)
    print("\n[PASS] jaccard matrix: equals brute force up to N=64; "
          "symmetric with unit diagonal")


def test_auroc_oracle_and_weighted_missing_class_rule():
    """AUROC equals the O(N^2) pairwise oracle (ties 0.5) up to N=200; the
    weighted metric survives 10,000 resamples of a set with a single-positive
    class while strict macro does not; runtime < 60 s."""
    start = time.monotonic()
    rng = np.random.default_rng(RNG_SEED + 5)
    for n in [2, 5, 20, 73, 200, 200]:
        ties = bool(rng.integers(0, 2))
        scores = (rng.integers(0, 5, size=n).astype(float) if ties
                  else rng.normal(size=n))
        labels = rng.integers(0, 2, size=n)
        got = auroc(scores, labels)
        want = auroc_oracle(scores.tolist(), labels.tolist())
        assert got == want

    n = 60
    labels = np.zeros((n, 3))
    labels[:, 0] = rng.integers(0, 2, size=n)
    labels[0, 0], labels[1, 0] = 1, 0
    labels[:, 1] = rng.integers(0, 2, size=n)
    labels[2, 1], labels[3, 1] = 1, 0
    labels[7, 2] = 1.0  # the single-positive class
    scores = labels + 0.4 * rng.normal(size=(n, 3))
    boot = bootstrap_metrics(scores, labels, n=10_000, seed=RNG_SEED)
    assert len(boot.weighted_values) == 10_000  # defined in every resample
    assert 0.0 < boot.macro_undefined_fraction < 1.0
    elapsed = time.monotonic() - start
    assert elapsed < 60.0
    print(f"\n[PASS] auroc oracles: exact match incl. ties up to N=200; weighted "
          f"defined in all 10000 resamples, macro undefined in "
          f"{boot.macro_undefined_fraction:.1%}; {elapsed:.1f}s")


@pytest.fixture(scope="module")
def full_pipeline():
    """The gating end-to-end run: 600/100/100 synthetic records, tiny
    extractors, all three stages, wall-clock limited."""
    start = time.monotonic()
    split, tax = make_synthetic_split(600, 100, 100, seed=0)
    models = {}
    for name, branch in [("rhythm", Branch.RHYTHM), ("morph", Branch.MORPHOLOGY),
                         ("global", Branch.GLOBAL)]:
        model, _ = train_branch(split, tax, branch, synthetic_train_config(name))
        models[branch] = model
    fused, _ = fit_fusion_stage(models, split, tax, l1_lambda=1e-4)
    elapsed = time.monotonic() - start
    return split, tax, fused, elapsed


def test_synthetic_end_to_end(full_pipeline):
    """Three-stage training on the 3-branch synthetic corpus reaches
    validation macro-AUROC >= 0.90 in under 10 minutes on CPU, and the
    contrastive term orders prototype geometry by co-occurrence."""
    split, tax, fused, elapsed = full_pipeline
    assert elapsed < 600.0, f"pipeline took {elapsed:.0f}s"
    val_scores = fused.predict_logits(split.val)
    val_macro = macro_auroc(per_class_auroc(val_scores, split.label_matrix("val")))
    assert val_macro is not None
    assert val_macro >= 0.90

    # co-occurring class pairs end up more similar than disjoint class pairs
    morph = fused.branches[Branch.MORPHOLOGY]
    bank_sims = prototype_similarity_matrix(
        morph.prototypes.detach(), morph.scale_a
    ).numpy()
    train_labels = split.label_matrix("train")[:, tax.branch_indices(Branch.MORPHOLOGY)]
    co = jaccard_matrix(train_labels, morph.class_of)
    n_p = len(morph.class_of)
    co_pairs, disjoint_pairs = [], []
    for i in range(n_p):
        for j in range(n_p):
            if i == j or morph.class_of[i] == morph.class_of[j]:
                continue
            (co_pairs if co[i, j] > 0 else disjoint_pairs).append(bank_sims[i, j])
    assert np.mean(co_pairs) > np.mean(disjoint_pairs)
    print(f"\n[PASS] synthetic end-to-end: val macro-AUROC {val_macro:.4f} >= 0.90 "
          f"in {elapsed:.0f}s; contrastive geometry {np.mean(co_pairs):.2f} > "
          f"{np.mean(disjoint_pairs):.2f} (co-occurring vs disjoint)")


def test_fusion_sparsity(full_pipeline):
    """l1=1e3 drives every off-class fusion weight to <= 1e-3 in magnitude
    while test macro-AUROC drops at most 0.05 versus l1=1e-4."""
    split, tax, fused, _ = full_pipeline
    profiles = fused.profiles(split.train)
    labels = split.label_matrix("train")
    mask = on_class_mask(fused.prototype_class_of(), len(tax))
    test_profiles = fused.profiles(split.test)
    test_labels = split.label_matrix("test")

    hard = train_fusion(profiles, labels, mask, l1_lambda=1e3, max_iters=6000)
    soft = train_fusion(profiles, labels, mask, l1_lambda=1e-4, max_iters=6000)
    max_off = float(np.abs(hard.weights[~mask]).max())
    assert max_off <= 1e-3
    assert float(np.abs(hard.weights[mask]).max()) > 1e-3  # on-class unpenalized

    hard_macro = macro_auroc(per_class_auroc(
        test_profiles @ hard.weights.T + hard.bias, test_labels))
    soft_macro = macro_auroc(per_class_auroc(
        test_profiles @ soft.weights.T + soft.bias, test_labels))
    drop = soft_macro - hard_macro
    assert drop <= 0.05
    print(f"\n[PASS] fusion sparsity: max off-class |w| = {max_off:.1e} <= 1e-3; "
          f"macro drop {drop:.4f} <= 0.05 ({hard_macro:.4f} vs {soft_macro:.4f})")


def test_classifier_init_rule():
    """Head init is exactly 1 on the assigned class and -0.5 elsewhere for
    arbitrary (C, P, assignment)."""
    rng = np.random.default_rng(RNG_SEED + 6)
    for _ in range(50):
        c = int(rng.integers(1, 12))
        p = int(rng.integers(1, 25))
        class_of = rng.integers(0, c, size=p)
        w = init_classifier(class_of, c)
        want = np.full((c, p), -0.5, dtype=np.float32)
        for j, cls in enumerate(class_of):
            want[cls, j] = 1.0
        assert np.array_equal(w, want)
    assert np.array_equal(init_classifier([0, 1], 2),
                          np.array([[1.0, -0.5], [-0.5, 1.0]], dtype=np.float32))
    print("\n[PASS] classifier init: 1 / -0.5 rule exact on 50 random shapes")


def test_explanation_integrity(full_pipeline):
    """Every explanation resolves to an existing training record with an
    in-range window, and contributions sum to the class logit within 1e-5."""
    from ecgproto.explain import explain

    split, tax, fused, _ = full_pipeline
    train_ids = {r.id for r in split.train}
    checked = 0
    for record in split.test[:5]:
        for code in tax.codes:
            result = explain(fused, record, code, top_m=10_000)
            total = sum(e.contribution for e in result.entries) + result.bias
            assert abs(total - result.class_logit) <= 1e-5
            for entry in result.entries:
                assert entry.source_record_id in train_ids
                lo, hi = entry.source_window_seconds
                assert 0.0 <= lo < hi <= 10.0
                if entry.test_window_seconds is not None:
                    t_lo, t_hi = entry.test_window_seconds
                    assert 0.0 <= t_lo < t_hi <= 10.0
            checked += 1
    print(f"\n[PASS] explanation integrity: {checked} explanations; provenance "
          "resolves and contributions sum to the logit within 1e-5")
