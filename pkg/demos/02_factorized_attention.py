"""
Factors, attention maps, and padding
====================================

Enumerate the modality subsets a three-stream model attends over, run a
forward pass while capturing every attention map, and show that left
padding changes nothing.
"""

import numpy as np

from fmtnet.data import MultimodalBatch
from fmtnet.factors import enumerate_factors
from fmtnet.model import FmtConfig, ModalitySpec, build_model

# one factor per nonempty subset of {L, V, A}: 2^3 - 1 = 7
names = ["L", "V", "A"]
for f in enumerate_factors(3):
    print(f"factor {f.mask:03b} -> {f.name(names)}")

# a tiny model over three 4-dim streams
mods = tuple(ModalitySpec(n, 4, 6) for n in names)
config = FmtConfig(modalities=mods, d_y=1, label_kind="binary",
                   mtl_layers=1, fms_units=2)
model = build_model(config)
print("attentions per forward:", model.attention_count)

# two sequences, the first with two padded (all-zero) leading steps
rng = np.random.default_rng(1)
t = 6
mask = np.array([[False, False, True, True, True, True],
                 [True] * t])
feats = tuple(rng.standard_normal((2, t, 4)) * mask[:, :, None] for _ in mods)
batch = MultimodalBatch(tuple(names), feats, mask,
                        np.zeros((2, 1)), "binary")

capture = []
preds = model.forward(batch, capture=capture)
print("prediction shape:", preds.data.shape)

# every attention row is a distribution and padded keys get zero weight
name, probs, key_mask = capture[0]
print(f"first captured attention: {name}")
print("row sums:", probs.sum(axis=-1)[0, :3], "...")
print("weight on the padded keys of sequence 0:", probs[0, :, :2].max())

# prepending another all-zero step does not move the predictions
feats7 = tuple(np.concatenate([np.zeros((2, 1, 4)), f], axis=1) for f in feats)
mask7 = np.concatenate([np.zeros((2, 1), dtype=bool), mask], axis=1)
batch7 = MultimodalBatch(tuple(names), feats7, mask7,
                         np.zeros((2, 1)), "binary")
preds7 = model.forward(batch7)
print("max prediction change after extra padding:",
      np.abs(preds.data - preds7.data).max())
