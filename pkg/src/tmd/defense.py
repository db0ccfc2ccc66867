"""Linear classification over embeddings and its projection defense.

The head is trained by full-batch softmax regression in float64 from a zero
start, so repeated runs on the same inputs give bitwise-identical weights.
The defended path projects every incoming row onto the learned manifold
before the head sees it; off-manifold inputs are pulled back toward the data
the head was fit on.

Also here: white-box constructions of off-manifold inputs for evaluating the
defense, including a boundary-aimed attack that pushes along the component of
the head's decision direction lying outside the plane between class means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bundle import ClassifierHead, ModelBundle
from .datastore import EmbeddingDataset, scale_matrix
from .errors import SpaceError, ValidationError
from .projection import ManifoldEvaluator
from .seeding import spawn_rng


def _check_rows_labels(rows: np.ndarray, labels: np.ndarray):
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int32)
    if rows.ndim != 2:
        raise ValidationError("rows must be a 2-D matrix")
    if labels.shape != (rows.shape[0],):
        raise ValidationError("labels must be one integer per row")
    return rows, labels


def train_head(ds: EmbeddingDataset, *, epochs: int = 200, lr: float = 0.5,
               l2: float = 0.0, seed: int = 0) -> ClassifierHead:
    """Full-batch softmax regression on a labeled dataset.

    The head's space comes from the dataset's scaled flag.  Zero-start
    full-batch descent makes the fit a pure function of the inputs; epochs=0
    returns the untouched zero head.  seed is accepted for interface
    stability but the fit draws no randomness.
    """
    del seed
    if ds.labels is None:
        raise ValidationError("training a head needs a labeled dataset")
    rows, labels = _check_rows_labels(ds.data, ds.labels)
    if epochs < 0 or lr <= 0 or l2 < 0:
        raise ValidationError("need epochs >= 0, lr > 0, l2 >= 0")
    classes = np.unique(labels)
    if classes.shape[0] < 2:
        raise ValidationError("need at least two classes to fit a head")
    ix = np.searchsorted(classes, labels)
    n, dim = rows.shape
    c = classes.shape[0]
    onehot = np.zeros((n, c))
    onehot[np.arange(n), ix] = 1.0
    w = np.zeros((c, dim))
    b = np.zeros(c)
    for _ in range(epochs):
        logits = rows @ w.T + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        err = p - onehot
        w -= lr * (err.T @ rows / n + l2 * w)
        b -= lr * err.mean(axis=0)
    space = "scaled" if ds.scaled else "raw"
    return ClassifierHead(weights=w.astype(np.float32), bias=b.astype(np.float32),
                          classes=classes.astype(np.int32), space=space)


def _as_matrix(t: np.ndarray, dim: int):
    rows = np.ascontiguousarray(t, dtype=np.float64)
    single = rows.ndim == 1
    if single:
        rows = rows[None, :]
    if rows.ndim != 2 or rows.shape[1] != dim:
        raise ValidationError(f"expected rows of width {dim}, got shape {t.shape}")
    return rows, single


def head_logits(t: np.ndarray, head: ClassifierHead) -> np.ndarray:
    rows, single = _as_matrix(t, head.dim)
    logits = rows @ head.weights.astype(np.float64).T + head.bias.astype(np.float64)
    return logits[0] if single else logits


def classify(t: np.ndarray, head: ClassifierHead):
    """Predicted class id(s); argmax ties go to the lowest class index.

    A single vector gives an int, a matrix gives one id per row.
    """
    rows, single = _as_matrix(t, head.dim)
    pred = head.classes[np.argmax(rows @ head.weights.astype(np.float64).T
                                  + head.bias.astype(np.float64), axis=1)]
    return int(pred[0]) if single else pred


def classify_defended(t: np.ndarray, head: ClassifierHead, bundle: ModelBundle,
                      k: int, seed: int, *, method: str = "sampling",
                      alpha: float = 0.1, n_steps: int = 10, reject: bool = True):
    """Project rows onto the manifold, then classify the projections.

    Rows must be in the head's space.  A raw-space head needs a bundle that
    carries the scaler used at training time; projection always happens in
    scaled space and raw rows travel through the scaler both ways.
    """
    rows, single = _as_matrix(t, head.dim)
    rows32 = rows.astype(np.float32)
    ev = ManifoldEvaluator.from_bundle(bundle)
    if head.space == "raw":
        if bundle.scaler is None:
            raise SpaceError("a raw-space head needs a bundle with a scaler")
        scaled = scale_matrix(rows32, bundle.scaler, "forward")
        res = ev.project(scaled, k, seed, method=method, alpha=alpha,
                         n_steps=n_steps, reject=reject)
        back = scale_matrix(res.projected, bundle.scaler, "inverse")
        pred = classify(back, head)
    else:
        res = ev.project(rows32, k, seed, method=method, alpha=alpha,
                         n_steps=n_steps, reject=reject)
        pred = classify(res.projected, head)
    return int(pred[0]) if single else pred


def accuracy(pred: np.ndarray, labels: np.ndarray) -> float:
    pred = np.asarray(pred)
    labels = np.asarray(labels)
    if pred.shape != labels.shape or pred.ndim != 1:
        raise ValidationError("accuracy needs matching 1-D predictions and labels")
    if pred.shape[0] == 0:
        raise ValidationError("accuracy of an empty set is undefined")
    return float((pred == labels).mean())


@dataclass
class AttackReport:
    """Adversarial rows plus bookkeeping on how the construction went."""

    rows: np.ndarray        # (n, dim) float32
    flipped: np.ndarray     # (n,) bool, head decision changed (undefended)
    perp_norms: np.ndarray  # (n,) float64, off-plane push magnitudes


def craft_boundary_attack(rows: np.ndarray, labels: np.ndarray, head: ClassifierHead,
                          *, cross_frac: float = 0.25, slack: float = 0.05,
                          max_perp: float | None = None, seed: int = 0) -> AttackReport:
    """Flip the head with mostly off-manifold movement.

    Per row, aim at the strongest rival class: take a capped step toward that
    class mean (cross_frac of the center gap), then push along the part of
    the head's decision direction orthogonal to the span of all class-mean
    offsets until the margin flips with the given slack.  That orthogonal
    part exists because a head fit on finite data never aligns exactly with
    the class geometry; a move along it leaves the data's span entirely, so
    the attacked point stays nearest to its own class region and a manifold
    projection should undo the push.  max_perp caps the push (rows that would
    need more keep the capped push and may not flip).
    """
    rows64, labels = _check_rows_labels(rows, labels)
    if rows64.shape[1] != head.dim:
        raise ValidationError("attack rows do not match the head dimension")
    if not (0 <= cross_frac < 1) or slack <= 0:
        raise ValidationError("need 0 <= cross_frac < 1 and slack > 0")
    classes = list(head.classes)
    present = np.unique(labels)
    means = {int(cl): rows64[labels == cl].mean(axis=0) for cl in present}
    for cl in present:
        if cl not in classes:
            raise ValidationError(f"label {cl} is not a head class")
    # orthonormal basis of the span of class-mean offsets
    mean_rows = np.stack([means[int(cl)] for cl in present])
    offsets = mean_rows[1:] - mean_rows[0]
    basis = np.linalg.qr(offsets.T)[0].T if len(offsets) else np.zeros((0, head.dim))

    def _off_span(v: np.ndarray) -> np.ndarray:
        return v - basis.T @ (basis @ v)

    logits = head_logits(rows64, head)
    w_all = head.weights.astype(np.float64)
    rng = spawn_rng(seed, "attack")
    out = rows64.copy()
    perp_norms = np.zeros(rows64.shape[0])
    for i in range(rows64.shape[0]):
        y_ix = classes.index(int(labels[i]))
        rival = np.argsort(logits[i])[::-1]
        t_ix = int(rival[0]) if int(rival[0]) != y_ix else int(rival[1])
        w = w_all[t_ix] - w_all[y_ix]
        margin = logits[i, y_ix] - logits[i, t_ix]

        u = means[int(head.classes[t_ix])] - means[int(labels[i])]
        nu = np.linalg.norm(u)
        cross = cross_frac * u

        w_perp = _off_span(w)
        np_norm = np.linalg.norm(w_perp)
        if np_norm < 1e-12:
            # degenerate geometry: no off-span component to exploit
            p_hat = _off_span(rng.standard_normal(head.dim))
            p_hat /= np.linalg.norm(p_hat)
            gain = w @ p_hat
            if abs(gain) < 1e-12:
                out[i] += cross
                continue
            if gain < 0:
                p_hat, gain = -p_hat, -gain
        else:
            p_hat = w_perp / np_norm
            gain = np_norm

        remaining = margin + slack - cross @ w
        c_perp = max(remaining / gain, 0.0)
        if max_perp is not None:
            c_perp = min(c_perp, max_perp)
        out[i] += cross + c_perp * p_hat
        perp_norms[i] = c_perp

    adv_pred = classify(out, head)
    flipped = adv_pred != labels
    return AttackReport(rows=out.astype(np.float32), flipped=flipped,
                        perp_norms=perp_norms)
