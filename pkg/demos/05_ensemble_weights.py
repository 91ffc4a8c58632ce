"""Combining per-layer confidence scores with fitted weights.

Simulates three layers of unequal usefulness, fits logistic-regression
weights on a validation split, and compares the combined AUROC against the
individual layers.  The single-layer "simplified" mode needs no fitting at
all.
"""

import numpy as np

from oodkit import LayerScores, ScoreSet, auroc, combine, fit_weights, single_layer_weights

rng = np.random.default_rng(3)
layers = ("stage2", "stage3", "penultimate")
separations = (0.2, 0.8, 1.6)  # later layers separate better
n_val, n_test = 400, 1600

def draw(n):
    in_s = np.stack([rng.standard_normal(n) + s for s in separations])
    out_s = np.stack([rng.standard_normal(n) for _ in separations])
    return in_s, out_s

val_in, val_out = draw(n_val)
test_in, test_out = draw(n_test)

weights = fit_weights(LayerScores(layers, val_in), LayerScores(layers, val_out))
print("fitted weights:")
print(weights.to_json())
print()

for i, name in enumerate(layers):
    a = auroc(ScoreSet(test_in[i], test_out[i]))
    print(f"AUROC {name:12s} alone:    {a:6.2f}")

combined = ScoreSet(
    combine(LayerScores(layers, test_in), weights),
    combine(LayerScores(layers, test_out), weights),
)
print(f"AUROC weighted ensemble:   {auroc(combined):6.2f}")

simplified = single_layer_weights("penultimate")
last_only = ScoreSet(test_in[2], test_out[2])
print(f"AUROC simplified (last layer, no fitting): {auroc(last_only):6.2f}")
print()
print("The ensemble needs OoD validation data to fit its weights; the")
print("simplified last-layer mode is hyperparameter-free.")
