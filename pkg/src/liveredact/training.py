"""Builds NLU training data from annotated call bundles.

Context construction mirrors the live redactor exactly: the trigger is
the first word of the annotated span, history is the 20 preceding tokens
from both channels merged in end-time order, and dialog-state bits are
derived from entities that finished earlier in the call. Keeping the two
paths identical is what lets a model trained on bundles run on decoded
hypotheses without feature drift.
"""

from __future__ import annotations

from .corpus import CallBundle
from .entities import EntityType
from .nlu import (
    DialogState,
    LogRegModel,
    NluContext,
    build_vocabulary,
    extract_features,
    train,
)


def contexts_from_bundle(bundle: CallBundle) -> list[tuple[NluContext, EntityType]]:
    merged = sorted((w for ws in bundle.words for w in ws), key=lambda w: (w.end_ms, w.channel))
    spans = []
    for ann in bundle.entities:
        start, end = bundle.entity_time_span(ann)
        spans.append((start, end, ann))
    spans.sort(key=lambda s: s[0])

    out: list[tuple[NluContext, EntityType]] = []
    for start, _end, ann in spans:
        trigger = bundle.words[ann.channel][ann.first_word]
        detected = frozenset(
            a.entity_type
            for s, e, a in spans
            if e < start and a.entity_type is not EntityType.OTHER
        )
        history = tuple(w.text for w in merged if w.end_ms <= trigger.start_ms)[-20:]
        ctx = NluContext(trigger.text, history, DialogState.at(trigger.start_ms, detected))
        out.append((ctx, ann.entity_type))
    return out


def contexts_from_corpus(bundles: list[CallBundle]) -> list[tuple[NluContext, EntityType]]:
    out: list[tuple[NluContext, EntityType]] = []
    for b in bundles:
        out.extend(contexts_from_bundle(b))
    return out


def train_from_corpus(
    bundles: list[CallBundle],
    l2_lambda: float = 1e-3,
    tol: float = 1e-6,
    min_freq: int = 2,
    ngram_orders: tuple[int, ...] = (1, 2, 3),
) -> LogRegModel:
    labeled = contexts_from_corpus(bundles)
    vocab = build_vocabulary((ctx for ctx, _ in labeled), min_freq=min_freq, orders=ngram_orders)
    dataset = [(extract_features(ctx, vocab, ngram_orders), label) for ctx, label in labeled]
    model = train(dataset, vocab, l2_lambda=l2_lambda, tol=tol)
    model.ngram_orders = ngram_orders
    return model


def retrain_with_augmentation(
    teacher: LogRegModel,
    base: list[tuple[NluContext, EntityType]],
    augmented: list[tuple[NluContext, EntityType]],
) -> LogRegModel:
    """Retrain on base plus augmentation, reusing the teacher's vocabulary."""
    dataset = [
        (extract_features(ctx, teacher.vocabulary, teacher.ngram_orders), label)
        for ctx, label in list(base) + list(augmented)
    ]
    model = train(dataset, teacher.vocabulary, l2_lambda=teacher.l2_lambda)
    model.ngram_orders = teacher.ngram_orders
    return model
