"""Independent brute-force reference implementations used as test oracles.

Everything here is written as plain double loops over samples, classes,
prototypes, or pairs, deliberately ignoring the vectorized production code
paths it is used to check.
"""

import math

import numpy as np


def sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def bce_oracle(logits, targets, weights=None):
    n, c = logits.shape
    if weights is None:
        weights = np.ones(c)
    total = 0.0
    for i in range(n):
        for j in range(c):
            p = sigmoid(float(logits[i, j]))
            y = float(targets[i, j])
            total += weights[j] * (y * math.log(p) + (1 - y) * math.log(1 - p))
    return -total / n


def clustering_oracle(similarities, labels, class_of):
    n = similarities.shape[0]
    total = 0.0
    for i in range(n):
        best = None
        for p, cls in enumerate(class_of):
            if labels[i, cls] > 0.5:
                s = float(similarities[i, p])
                best = s if best is None else max(best, s)
        total += 0.0 if best is None else best
    return -total / n


def separation_oracle(similarities, labels, class_of):
    n = similarities.shape[0]
    total = 0.0
    for i in range(n):
        best = None
        for p, cls in enumerate(class_of):
            if labels[i, cls] <= 0.5:
                s = float(similarities[i, p])
                best = s if best is None else max(best, s)
        total += 0.0 if best is None else best
    return total / n


def orthogonality_oracle(vectors):
    p = vectors.shape[0]
    unit = [vectors[i] / np.linalg.norm(vectors[i]) for i in range(p)]
    total = 0.0
    for i in range(p):
        for j in range(p):
            target = 1.0 if i == j else 0.0
            total += (float(np.dot(unit[i], unit[j])) - target) ** 2
    return total


def contrastive_oracle(vectors, co_occurrence, a):
    p = vectors.shape[0]
    unit = [vectors[i] / np.linalg.norm(vectors[i]) for i in range(p)]
    pos_num = pos_den = neg_num = neg_den = 0.0
    for i in range(p):
        for j in range(p):
            if i == j:
                continue
            s = a * float(np.dot(unit[i], unit[j]))
            cij = float(co_occurrence[i, j])
            pos_num += cij * s
            pos_den += cij
            neg_num += (1.0 - cij) * s
            neg_den += 1.0 - cij
    pos_term = pos_num / pos_den if pos_den > 0 else 0.0
    neg_term = neg_num / neg_den if neg_den > 0 else 0.0
    return -(pos_term - neg_term) / math.sqrt(p)


def jaccard_oracle(labels, class_of):
    n_prototypes = len(class_of)
    c = np.zeros((n_prototypes, n_prototypes))
    for i in range(n_prototypes):
        for j in range(n_prototypes):
            if i == j:
                c[i, j] = 1.0
                continue
            a_cls, b_cls = class_of[i], class_of[j]
            n_a = n_b = n_ab = 0
            for row in labels:
                pa = row[a_cls] > 0.5
                pb = row[b_cls] > 0.5
                n_a += pa
                n_b += pb
                n_ab += pa and pb
            union = n_a + n_b - n_ab
            c[i, j] = n_ab / union if union > 0 else 0.0
    return c


def auroc_oracle(scores, labels):
    """O(N^2) pairwise comparison with ties credited 0.5."""
    pos = [s for s, y in zip(scores, labels) if y > 0.5]
    neg = [s for s, y in zip(scores, labels) if y <= 0.5]
    if not pos or not neg:
        return None
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def weighted_auroc_oracle(per_class, positives):
    num = den = 0.0
    for auc, n in zip(per_class, positives):
        if auc is None:
            continue
        num += n * auc
        den += n
    if den == 0:
        raise ValueError("no defined classes")
    return num / den


def random_loss_instance(rng, n_max=8, c_max=6, p_max=12, d_max=16):
    """A random small multi-label instance for loss-oracle equivalence runs."""
    n = int(rng.integers(1, n_max + 1))
    c = int(rng.integers(1, c_max + 1))
    p = int(rng.integers(2, p_max + 1))
    d = int(rng.integers(2, d_max + 1))
    logits = rng.normal(scale=3.0, size=(n, c))
    labels = (rng.random((n, c)) < 0.45).astype(np.float64)
    class_of = rng.integers(0, c, size=p)
    sims = rng.normal(scale=2.0, size=(n, p))
    vectors = rng.normal(size=(p, d))
    weights = rng.uniform(0.25, 4.0, size=c)
    a = float(rng.uniform(0.5, 8.0))
    co = jaccard_oracle(labels, class_of)
    return dict(logits=logits, labels=labels, class_of=class_of, sims=sims,
                vectors=vectors, weights=weights, a=a, co=co)
