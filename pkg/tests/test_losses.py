import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from ecgproto.errors import ConfigurationError, DegenerateInputError
from ecgproto.losses import (
    LossConfig,
    bce_loss,
    clustering_loss,
    composite_loss,
    contrastive_loss,
    jaccard_matrix,
    jaccard_matrix_cached,
    make_class_weights,
    orthogonality_loss,
    separation_loss,
    total_loss,
)
from oracles import (
    bce_oracle,
    clustering_oracle,
    contrastive_oracle,
    jaccard_oracle,
    orthogonality_oracle,
    separation_oracle,
)


def unit_rows(*rows):
    out = np.array(rows, dtype=np.float64)
    return out / np.linalg.norm(out, axis=1, keepdims=True)


class TestBce:
    def test_logit_zero_positive(self):
        got = bce_loss(np.array([[0.0]]), np.array([[1.0]]))
        assert float(got) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_saturated_positive(self):
        got = bce_loss(np.array([[40.0]]), np.array([[1.0]]))
        assert 0.0 <= float(got) <= 1e-12

    def test_hand_pair(self):
        got = bce_loss(np.array([[2.0, -1.0]]), np.array([[1.0, 0.0]]))
        # softplus(-2) + softplus(-1) computed by hand
        assert float(got) == pytest.approx(0.12692801 + 0.31326169, abs=1e-6)

    def test_nonfinite_rejected(self):
        with pytest.raises(DegenerateInputError):
            bce_loss(np.array([[np.inf]]), np.array([[1.0]]))

    def test_extreme_logits_stay_finite(self):
        got = bce_loss(np.array([[500.0, -500.0]]), np.array([[0.0, 1.0]]))
        assert np.isfinite(float(got))


class TestClusteringSeparation:
    def test_clustering_hand(self):
        sims = np.array([[0.2, 0.8]])
        labels = np.array([[1.0]])
        assert float(clustering_loss(sims, labels, [0, 0])) == pytest.approx(-0.8)

    def test_clustering_empty_positive_set(self):
        sims = np.array([[0.9, 0.9]])
        labels = np.array([[0.0]])
        assert float(clustering_loss(sims, labels, [0, 0])) == 0.0

    def test_clustering_union_over_positive_classes(self):
        # positives {A, B}: the max runs over A- and B-prototypes together
        sims = np.array([[0.1, 0.7, 0.4]])
        labels = np.array([[1.0, 1.0, 0.0]])
        got = clustering_loss(sims, labels, [0, 1, 2])
        assert float(got) == pytest.approx(-0.7)

    def test_separation_hand(self):
        sims = np.array([[0.1, 0.5]])
        labels = np.array([[0.0, 1.0]])
        got = separation_loss(sims, labels, [0, 0])
        assert float(got) == pytest.approx(0.5)

    def test_separation_all_positive(self):
        sims = np.array([[0.9, 0.9]])
        labels = np.array([[1.0]])
        assert float(separation_loss(sims, labels, [0, 0])) == 0.0

    def test_separation_monotone_in_disjoint_sims(self):
        labels = np.array([[0.0, 1.0]])
        high = separation_loss(np.array([[0.5, 0.9]]), labels, [0, 1])
        low = separation_loss(np.array([[0.3, 0.9]]), labels, [0, 1])
        assert float(low) <= float(high)

    def test_single_label_reduction(self):
        # with exactly one label per record these equal the classic
        # exact-match clustering/separation formulation
        rng = np.random.default_rng(0)
        n, c, p = 12, 4, 9
        class_of = rng.integers(0, c, size=p)
        y = rng.integers(0, c, size=n)
        labels = np.zeros((n, c))
        labels[np.arange(n), y] = 1.0
        sims = rng.normal(size=(n, p))
        clst_exact = -np.mean([
            max(sims[i, j] for j in range(p) if class_of[j] == y[i])
            if any(class_of[j] == y[i] for j in range(p)) else 0.0
            for i in range(n)
        ])
        sep_exact = np.mean([
            max(sims[i, j] for j in range(p) if class_of[j] != y[i])
            if any(class_of[j] != y[i] for j in range(p)) else 0.0
            for i in range(n)
        ])
        assert float(clustering_loss(sims, labels, class_of)) == pytest.approx(clst_exact)
        assert float(separation_loss(sims, labels, class_of)) == pytest.approx(sep_exact)


class TestOrthogonality:
    def test_orthonormal_rows(self):
        vecs = np.eye(4)
        assert float(orthogonality_loss(vecs)) == pytest.approx(0.0, abs=1e-12)

    def test_two_identical_rows(self):
        vecs = np.array([[0.0, 1.0], [0.0, 1.0]])
        assert float(orthogonality_loss(vecs)) == pytest.approx(2.0, abs=1e-12)

    def test_single_prototype(self):
        assert float(orthogonality_loss(np.array([[3.0, 4.0]]))) == pytest.approx(0.0, abs=1e-12)

    def test_zero_row_rejected(self):
        with pytest.raises(DegenerateInputError):
            orthogonality_loss(np.array([[0.0, 0.0], [1.0, 0.0]]))


class TestContrastive:
    def test_cooccurring_pair(self):
        vecs = unit_rows([1, 0], [0.5, math.sqrt(0.75)])  # cosine 0.5
        c = np.array([[1.0, 1.0], [1.0, 1.0]])
        got = contrastive_loss(vecs, c, a=1.0)
        assert float(got) == pytest.approx(-0.5 / math.sqrt(2.0), abs=1e-9)

    def test_disjoint_pair(self):
        vecs = unit_rows([1, 0], [0.9, math.sqrt(1 - 0.81)])  # cosine 0.9
        c = np.array([[1.0, 0.0], [0.0, 1.0]])
        got = contrastive_loss(vecs, c, a=1.0)
        assert float(got) == pytest.approx(0.9 / math.sqrt(2.0), abs=1e-9)

    def test_equal_similarities_cancel(self):
        # three coplanar unit vectors at mutual cosine -1/2
        vecs = np.array([
            [1.0, 0.0],
            [-0.5, math.sqrt(0.75)],
            [-0.5, -math.sqrt(0.75)],
        ])
        c = np.array([
            [1.0, 1.0, 0.0],
            [1.0, 1.0, 0.3],
            [0.0, 0.3, 1.0],
        ])
        got = contrastive_loss(vecs, c, a=2.0)
        assert float(got) == pytest.approx(0.0, abs=1e-9)

    def test_single_prototype_rejected(self):
        with pytest.raises(ConfigurationError):
            contrastive_loss(np.array([[1.0, 0.0]]), np.array([[1.0]]), a=1.0)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        vecs = rng.normal(size=(7, 5))
        labels = (rng.random((20, 3)) < 0.5).astype(float)
        class_of = rng.integers(0, 3, size=7)
        c = jaccard_matrix(labels, class_of)
        base = float(contrastive_loss(vecs, c, a=3.0))
        perm = rng.permutation(7)
        got = float(contrastive_loss(vecs[perm], c[np.ix_(perm, perm)], a=3.0))
        assert got == pytest.approx(base, rel=1e-12)


class TestTotal:
    def test_zero_lambdas(self):
        cfg = LossConfig(lambda_clst=0, lambda_sep=0, lambda_div=0, lambda_cntrst=0)
        assert float(total_loss(1.25, 9, 9, 9, 9, cfg)) == pytest.approx(1.25)

    def test_default_coefficients_on_unit_parts(self):
        cfg = LossConfig()
        got = total_loss(1.0, 1.0, 1.0, 1.0, 1.0, cfg)
        assert float(got) == pytest.approx(551.0044, abs=1e-9)

    def test_linearity_in_lambda(self):
        base = LossConfig(lambda_div=2.0)
        double = LossConfig(lambda_div=4.0)
        lo = float(total_loss(0.0, 0.0, 0.0, 1.5, 0.0, base))
        hi = float(total_loss(0.0, 0.0, 0.0, 1.5, 0.0, double))
        assert hi == pytest.approx(2 * lo)


class TestJaccard:
    def test_same_class_is_one(self):
        labels = np.array([[1.0], [0.0], [1.0]])
        c = jaccard_matrix(labels, [0, 0])
        assert c[0, 1] == pytest.approx(1.0)
        assert c[0, 0] == pytest.approx(1.0)

    def test_disjoint_classes(self):
        labels = np.array([[1.0, 0.0], [0.0, 1.0]])
        c = jaccard_matrix(labels, [0, 1])
        assert c[0, 1] == pytest.approx(0.0)

    def test_hand_counts(self):
        # N_a=4, N_b=6, N_ab=2 -> 2 / 8
        labels = np.zeros((10, 2))
        labels[:4, 0] = 1
        labels[2:8, 1] = 1
        c = jaccard_matrix(labels, [0, 1])
        assert c[0, 1] == pytest.approx(0.25)

    def test_empty_pair_warns_and_zero(self):
        labels = np.zeros((4, 2))
        labels[0, 0] = 1
        with pytest.warns(UserWarning):
            c = jaccard_matrix(labels, [0, 1])
        assert c[0, 1] == 0.0
        assert c[1, 1] == 1.0  # diagonal pinned even for an empty class

    def test_symmetric_unit_diagonal(self):
        rng = np.random.default_rng(2)
        labels = (rng.random((30, 5)) < 0.4).astype(float)
        labels[0] = 1
        c = jaccard_matrix(labels, rng.integers(0, 5, size=11))
        assert np.allclose(c, c.T)
        assert np.allclose(np.diag(c), 1.0)

    @settings(max_examples=40, deadline=None)
    @given(
        n=st.integers(1, 64),
        n_classes=st.integers(1, 5),
        seed=st.integers(0, 2**31 - 1),
    )
    def test_matches_brute_force(self, n, n_classes, seed):
        rng = np.random.default_rng(seed)
        labels = (rng.random((n, n_classes)) < 0.5).astype(float)
        labels[0] = 1  # avoid all-empty warning noise
        class_of = rng.integers(0, n_classes, size=int(rng.integers(2, 9)))
        got = jaccard_matrix(labels, class_of)
        assert np.allclose(got, jaccard_oracle(labels, class_of), atol=1e-12)

    def test_disk_cache_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        labels = (rng.random((12, 3)) < 0.5).astype(float)
        labels[0] = 1
        class_of = np.array([0, 1, 2, 0])
        first = jaccard_matrix_cached(labels, class_of, ["a", "b", "c"], tmp_path)
        second = jaccard_matrix_cached(labels, class_of, ["a", "b", "c"], tmp_path)
        assert np.array_equal(first, second)
        assert len(list(tmp_path.glob("jaccard_*.npy"))) == 1


class TestOracleEquivalence:
    """Vectorized losses against the double-loop references on random instances."""

    def _instance(self, rng):
        n = int(rng.integers(1, 9))
        c = int(rng.integers(1, 7))
        p = int(rng.integers(2, 13))
        d = int(rng.integers(2, 17))
        return {
            "logits": rng.normal(scale=3, size=(n, c)),
            "labels": (rng.random((n, c)) < 0.45).astype(float),
            "sims": rng.normal(scale=2, size=(n, p)),
            "vectors": rng.normal(size=(p, d)),
            "class_of": rng.integers(0, c, size=p),
            "weights": rng.uniform(0.25, 4.0, size=c),
            "a": float(rng.uniform(0.5, 8.0)),
        }

    def test_all_terms_match(self):
        rng = np.random.default_rng(1234)
        for _ in range(120):
            inst = self._instance(rng)
            co = jaccard_oracle(inst["labels"], inst["class_of"])
            checks = [
                (bce_loss(inst["logits"], inst["labels"], inst["weights"]),
                 bce_oracle(inst["logits"], inst["labels"], inst["weights"])),
                (clustering_loss(inst["sims"], inst["labels"], inst["class_of"]),
                 clustering_oracle(inst["sims"], inst["labels"], inst["class_of"])),
                (separation_loss(inst["sims"], inst["labels"], inst["class_of"]),
                 separation_oracle(inst["sims"], inst["labels"], inst["class_of"])),
                (orthogonality_loss(inst["vectors"]),
                 orthogonality_oracle(inst["vectors"])),
                (contrastive_loss(inst["vectors"], co, inst["a"]),
                 contrastive_oracle(inst["vectors"], co, inst["a"])),
            ]
            for got, want in checks:
                assert float(got) == pytest.approx(want, rel=1e-6, abs=1e-9)


class TestGradients:
    def test_composite_gradients_match_finite_differences(self):
        torch.manual_seed(0)
        rng = np.random.default_rng(42)
        for trial in range(25):
            n = int(rng.integers(2, 7))
            c = int(rng.integers(2, 5))
            p = int(rng.integers(2, 9))
            d = int(rng.integers(3, 13))
            labels = (rng.random((n, c)) < 0.5).astype(float)
            class_of = rng.integers(0, c, size=p)
            latents = torch.tensor(rng.normal(size=(n, d)))
            co = torch.tensor(jaccard_oracle(labels, class_of))
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
                sims = a * z @ q.T
                total, _ = composite_loss(
                    logits, torch.tensor(labels), sims, protos, co,
                    class_of, a, cfg,
                )
                return total

            logits = logits0.clone().requires_grad_(True)
            protos = protos0.clone().requires_grad_(True)
            objective(logits, protos).backward()

            step = 1e-4
            for leaf, grad in ((logits, logits.grad), (protos, protos.grad)):
                fd = torch.zeros_like(leaf)
                flat = leaf.detach().clone().reshape(-1)
                for idx in range(flat.numel()):
                    for sign in (+1, -1):
                        bumped = flat.clone()
                        bumped[idx] += sign * step
                        args = [logits0.clone(), protos0.clone()]
                        which = 0 if leaf is logits else 1
                        args[which] = bumped.reshape(leaf.shape)
                        val = objective(*args)
                        fd.reshape(-1)[idx] += sign * float(val) / (2 * step)
                scale = grad.abs().max().clamp_min(1e-8)
                rel = (grad - fd).abs().max() / scale
                assert float(rel) < 1e-4, f"trial {trial}: rel err {float(rel)}"


def test_inverse_frequency_weights():
    labels = np.array([[1, 0], [1, 0], [1, 1], [1, 0]], dtype=float)
    w = make_class_weights(labels, "inverse_frequency")
    assert w.mean() == pytest.approx(1.0)
    assert w[1] > w[0]  # rarer class upweighted
