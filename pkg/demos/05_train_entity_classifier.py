#!/usr/bin/env python3
# Train the digit-triggered entity classifier on a synthetic corpus and
# inspect what the sparse n-gram + dialog-state features learn.

import numpy as np

from liveredact import EntityType, GenConfig, generate_corpus
from liveredact.nlu import DialogState, NluContext, extract_features, predict, self_train
from liveredact.training import contexts_from_corpus, train_from_corpus

train_bundles = generate_corpus(GenConfig(n_calls=300, seed=1))
model = train_from_corpus(train_bundles, l2_lambda=1e-3)
print(f"trained on {len(train_bundles)} calls, {len(model.vocabulary)} features, "
      f"{len(model.loss_history)} optimizer iterations")

# Probe the model with hand-built contexts.
probes = [
    ("four", "may i get the credit card number sure its".split()),
    ("three", "can you read me the cvv code from the back".split()),
    ("nine", "what is the billing zip code on the account".split()),
    ("three", "how many items would you like to order".split()),
]
for trigger, history in probes:
    ctx = NluContext(trigger, tuple(history), DialogState.at(90_000.0))
    label, probs = predict(model, extract_features(ctx, model.vocabulary))
    print(f"trigger {trigger!r} after {' '.join(history[-6:])!r:44s} -> {label.value} ({probs.max():.2f})")

# Uncertainty-aware self-training: confident samples get pseudo-labels, the
# most-uncertain get their gold labels (simulating annotation), capped.
extra = contexts_from_corpus(generate_corpus(GenConfig(n_calls=100, seed=2)))
result = self_train(model, extra, easy_conf=0.9, hard_entropy=1.2, hard_fraction=0.25)
print(f"\nself-training batch of {len(extra)}: easy={result.easy} "
      f"hard_kept={result.hard_kept} (candidates {result.hard_candidates}, "
      f"capped {result.hard_dropped_cap}) unused={result.unused}")
