"""Digit-triggered entity-type classification.

A trigger token plus up to 20 preceding tokens (both channels merged in
end-time order) feed sparse 1/2/3-gram presence features, concatenated
with a dialog-state bit vector. A multinomial logistic-regression model
with L2 penalty maps each trigger to an entity type. Includes
uncertainty-aware self-training to grow the training set from unlabeled
calls.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, sparse

from .decoder import TimedWord
from .entities import EntityType

MODEL_VERSION = "liveredact-nlu-1"
HISTORY_LEN = 20
NGRAM_ORDERS = (1, 2, 3)

_TIME_BUCKETS_MS = (60_000.0, 180_000.0, 600_000.0)
_TIME_BUCKET_NAMES = ("lt60s", "60to180s", "180to600s", "gt600s")

#: Entity classes whose capture marks a payment as underway.
_PAYMENT_TYPES = frozenset({EntityType.CCNUM, EntityType.CVV, EntityType.EXPDATE})


@dataclass(frozen=True)
class DialogState:
    """Binary dialog features: conversation-time bucket, entities already
    captured this call, and transaction progress bits. Bits are monotone
    within a call."""

    time_bucket: int
    detected: frozenset[EntityType] = frozenset()
    payment_in_progress: bool = False
    payment_completed: bool = False

    @classmethod
    def at(cls, now_ms: float, detected: frozenset[EntityType] = frozenset()) -> "DialogState":
        bucket = sum(now_ms >= edge for edge in _TIME_BUCKETS_MS)
        seen_payment = detected & _PAYMENT_TYPES
        return cls(
            time_bucket=bucket,
            detected=detected,
            payment_in_progress=bool(seen_payment),
            payment_completed=seen_payment == _PAYMENT_TYPES,
        )

    def feature_names(self) -> list[str]:
        names = [f"ds:time:{_TIME_BUCKET_NAMES[self.time_bucket]}"]
        names.extend(f"ds:seen:{e.value}" for e in sorted(self.detected, key=lambda e: e.value))
        if self.payment_in_progress:
            names.append("ds:txn:in_progress")
        if self.payment_completed:
            names.append("ds:txn:completed")
        return names


def dialog_feature_names() -> list[str]:
    names = [f"ds:time:{n}" for n in _TIME_BUCKET_NAMES]
    names += [f"ds:seen:{e.value}" for e in EntityType]
    names += ["ds:txn:in_progress", "ds:txn:completed"]
    return names


@dataclass(frozen=True)
class NluContext:
    """One classification instance: the trigger token and its context."""

    trigger: str
    history: tuple[str, ...]
    dialog_state: DialogState

    def __post_init__(self) -> None:
        if len(self.history) > HISTORY_LEN:
            object.__setattr__(self, "history", self.history[-HISTORY_LEN:])


def window_ngrams(ctx: NluContext, orders: tuple[int, ...] = NGRAM_ORDERS) -> list[str]:
    window = list(ctx.history) + [ctx.trigger]
    feats: list[str] = []
    for n in orders:
        for i in range(len(window) - n + 1):
            feats.append(f"{n}:" + " ".join(window[i : i + n]))
    return feats


def build_vocabulary(
    contexts, min_freq: int = 2, orders: tuple[int, ...] = NGRAM_ORDERS
) -> dict[str, int]:
    """Fixed feature-id map: frequent n-grams, shared per-order OOV ids,
    and the dialog-state bits. Sorted assignment keeps ids deterministic."""
    counts: dict[str, int] = {}
    for ctx in contexts:
        for f in window_ngrams(ctx, orders):
            counts[f] = counts.get(f, 0) + 1
    vocab: dict[str, int] = {}
    for name in dialog_feature_names():
        vocab[name] = len(vocab)
    for n in orders:
        vocab[f"oov:{n}"] = len(vocab)
    for f in sorted(k for k, c in counts.items() if c >= min_freq):
        vocab[f] = len(vocab)
    return vocab


def extract_features(
    ctx: NluContext, vocab: dict[str, int], orders: tuple[int, ...] = NGRAM_ORDERS
) -> dict[int, float]:
    """Sparse presence features (all values 1.0); unseen n-grams collapse
    onto the shared OOV id of their order."""
    fv: dict[int, float] = {}
    for f in window_ngrams(ctx, orders):
        fid = vocab.get(f)
        if fid is None:
            fid = vocab[f"oov:{f[0]}"]
        fv[fid] = 1.0
    for name in ctx.dialog_state.feature_names():
        fv[vocab[name]] = 1.0
    return fv


@dataclass
class LogRegModel:
    vocabulary: dict[str, int]
    weights: np.ndarray  # (classes, features)
    biases: np.ndarray  # (classes,)
    l2_lambda: float
    classes: tuple[EntityType, ...] = tuple(EntityType)
    ngram_orders: tuple[int, ...] = NGRAM_ORDERS
    loss_history: list[float] = field(default_factory=list)

    @classmethod
    def zeros(cls, vocabulary: dict[str, int], l2_lambda: float = 0.0) -> "LogRegModel":
        c = len(EntityType)
        return cls(vocabulary, np.zeros((c, len(vocabulary))), np.zeros(c), l2_lambda)


def _dataset_matrix(dataset, n_features: int) -> tuple[sparse.csr_matrix, np.ndarray]:
    rows, cols, vals = [], [], []
    y = np.empty(len(dataset), dtype=np.int64)
    classes = tuple(EntityType)
    for r, (fv, label) in enumerate(dataset):
        y[r] = classes.index(label)
        for fid, val in fv.items():
            if not math.isfinite(val):
                raise ValueError(f"non-finite feature value {val} at id {fid}")
            rows.append(r)
            cols.append(fid)
            vals.append(val)
        rows.append(r)
        cols.append(n_features)  # intercept column, regularized like liblinear
        vals.append(1.0)
    x = sparse.csr_matrix((vals, (rows, cols)), shape=(len(dataset), n_features + 1))
    return x, y


def loss_and_grad(
    w_flat: np.ndarray, x: sparse.csr_matrix, y: np.ndarray, lam: float
) -> tuple[float, np.ndarray]:
    """Mean multinomial cross-entropy + (lam/2)*||W||^2 and its gradient.

    The penalty covers the intercept column as well, so a huge lam drives
    every score to zero and predictions to the uniform distribution.
    """
    n, f1 = x.shape
    c = len(EntityType)
    w = w_flat.reshape(c, f1)
    z = x @ w.T
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    loss = float(np.mean(lse - z[np.arange(n), y]) + 0.5 * lam * np.sum(w * w))
    p = np.exp(z - lse[:, None])
    p[np.arange(n), y] -= 1.0
    grad = (x.T @ p).T / n + lam * w
    return loss, np.asarray(grad).ravel()


def train(
    dataset,
    vocabulary: dict[str, int],
    l2_lambda: float = 1e-3,
    tol: float = 1e-6,
    max_iter: int = 1000,
) -> LogRegModel:
    """Fit the classifier to gradient-norm <= tol from a zero start.

    dataset: sequence of (feature dict, EntityType) pairs.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    n_features = len(vocabulary)
    x, y = _dataset_matrix(dataset, n_features)
    c = len(EntityType)
    history: list[float] = []

    def cb(w_flat: np.ndarray) -> None:
        history.append(loss_and_grad(w_flat, x, y, l2_lambda)[0])

    res = optimize.minimize(
        loss_and_grad,
        np.zeros(c * (n_features + 1)),
        args=(x, y, l2_lambda),
        jac=True,
        method="L-BFGS-B",
        callback=cb,
        options={"maxiter": max_iter, "ftol": 1e-14, "gtol": tol},
    )
    w = res.x.reshape(c, n_features + 1)
    model = LogRegModel(vocabulary, w[:, :n_features].copy(), w[:, n_features].copy(), l2_lambda)
    model.loss_history = history
    return model


def predict(model: LogRegModel, fv: dict[int, float]) -> tuple[EntityType, np.ndarray]:
    """Softmax over linear scores; ties break toward earlier class order."""
    scores = model.biases.astype(np.float64).copy()
    for fid, val in fv.items():
        scores += model.weights[:, fid] * val
    scores -= scores.max()
    probs = np.exp(scores)
    probs /= probs.sum()
    return model.classes[int(np.argmax(probs))], probs


def save_model(model: LogRegModel, path) -> None:
    doc = {
        "version": MODEL_VERSION,
        "classes": [c.value for c in model.classes],
        "ngram_orders": list(model.ngram_orders),
        "l2_lambda": model.l2_lambda,
        "vocabulary": model.vocabulary,
        "biases": model.biases.tolist(),
        "weights": model.weights.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path) -> LogRegModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"model version {doc.get('version')!r} does not match {MODEL_VERSION!r}")
    return LogRegModel(
        vocabulary=doc["vocabulary"],
        weights=np.asarray(doc["weights"], dtype=np.float64),
        biases=np.asarray(doc["biases"], dtype=np.float64),
        l2_lambda=doc["l2_lambda"],
        classes=tuple(EntityType[c] for c in doc["classes"]),
        ngram_orders=tuple(doc["ngram_orders"]),
    )


# ---------------------------------------------------------------------------
# uncertainty-aware self-training


@dataclass(frozen=True)
class AugmentedSample:
    context: NluContext
    label: EntityType
    provenance: str  # "easy" (pseudo-label) or "hard" (gold label)


@dataclass
class SelfTrainResult:
    samples: list[AugmentedSample]
    easy: int = 0
    hard_candidates: int = 0
    hard_kept: int = 0
    hard_skipped_no_gold: int = 0
    hard_dropped_cap: int = 0
    unused: int = 0


def entropy(probs: np.ndarray) -> float:
    p = probs[probs > 0]
    return float(-(p * np.log(p)).sum())


def self_train(
    teacher: LogRegModel,
    unlabeled,
    easy_conf: float = 0.9,
    hard_entropy: float = 1.2,
    hard_fraction: float = 0.25,
) -> SelfTrainResult:
    """Split a batch into easy (confident; teacher pseudo-label) and hard
    (high predictive entropy; gold label when available, else skipped)
    samples. Hard samples are capped at hard_fraction of the batch, kept
    in decreasing-entropy order.

    unlabeled: sequence of (NluContext, EntityType | None) pairs; the
    second element is the gold label when the corpus provides one.
    """
    items = list(unlabeled)
    result = SelfTrainResult(samples=[])
    hard_pool: list[tuple[float, int, NluContext, EntityType]] = []
    for idx, (ctx, gold) in enumerate(items):
        fv = extract_features(ctx, teacher.vocabulary, teacher.ngram_orders)
        label, probs = predict(teacher, fv)
        if float(probs.max()) >= easy_conf:
            result.samples.append(AugmentedSample(ctx, label, "easy"))
            result.easy += 1
        elif entropy(probs) >= hard_entropy:
            result.hard_candidates += 1
            if gold is None:
                result.hard_skipped_no_gold += 1
            else:
                hard_pool.append((entropy(probs), idx, ctx, gold))
        else:
            result.unused += 1

    cap = int(hard_fraction * len(items)) if hard_fraction < 1.0 else len(hard_pool)
    hard_pool.sort(key=lambda t: (-t[0], t[1]))
    for ent, _, ctx, gold in hard_pool[:cap]:
        result.samples.append(AugmentedSample(ctx, gold, "hard"))
        result.hard_kept += 1
    result.hard_dropped_cap = len(hard_pool) - min(cap, len(hard_pool))
    return result


# ---------------------------------------------------------------------------
# classifier front-ends used by the redactor


class TrainedClassifier:
    """LAR-facing wrapper over a trained model."""

    def __init__(self, model: LogRegModel):
        self.model = model

    def classify(
        self, trigger_word: TimedWord, history: tuple[str, ...], dialog: DialogState
    ) -> tuple[EntityType, np.ndarray]:
        ctx = NluContext(trigger_word.text, tuple(history), dialog)
        return predict(self.model, extract_features(ctx, self.model.vocabulary, self.model.ngram_orders))


class OracleClassifier:
    """Gold-type lookup by trigger time; the evaluation upper bound."""

    def __init__(self, spans: list[tuple[int, float, float, EntityType]]):
        self.spans = sorted(spans, key=lambda s: (s[0], s[1]))

    def classify(
        self, trigger_word: TimedWord, history: tuple[str, ...], dialog: DialogState
    ) -> tuple[EntityType, np.ndarray]:
        mid = (trigger_word.start_ms + trigger_word.end_ms) / 2.0
        label = EntityType.OTHER
        for ch, start, end, etype in self.spans:
            if ch == trigger_word.channel and start <= mid < end:
                label = etype
                break
        probs = np.zeros(len(EntityType))
        probs[list(EntityType).index(label)] = 1.0
        return label, probs
