"""Uncertainty rises when the data drifts.

A small blobs classifier is trained two-phase; predictive entropy and
max disagreement are then measured on clean evaluation data, on inputs
with strong Gaussian noise, and on inputs with shuffled feature columns.
More ensemble members give a sharper separation between the three.
"""

from tinyde.data import (corrupt_gaussian, corrupt_permute_features,
                         synth_classification)
from tinyde.experiments import OOD_CLASSES, OOD_FEATURES, train_blob_classifier
from tinyde.uncertainty import max_disagreement, predictive_entropy

SEED = 0

eval_ds = synth_classification(512, SEED, n_classes=OOD_CLASSES,
                               n_features=OOD_FEATURES, sample_seed=SEED + 7919)
splits = {
    "in-distribution": eval_ds.X,
    "gaussian noise": corrupt_gaussian(eval_ds.X, 2.0, SEED + 13),
    "permuted features": corrupt_permute_features(eval_ds.X, SEED + 17),
}

for M in (1, 5, 10):
    model, _ = train_blob_classifier(M, SEED, epochs=80)
    print(f"\nM = {M}")
    for name, X in splits.items():
        _, probs = model.predict(X)
        ent = float(predictive_entropy(probs).mean())
        _, md = max_disagreement(probs)
        print(f"  {name:20s} entropy {ent:.3f}  disagreement {float(md.mean()):.3f}")
