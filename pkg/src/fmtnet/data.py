"""Multimodal sequence batches and synthetic task generators.

Sequences are left-padded to a common length and tracked by a boolean mask
(True marks real timesteps). The generators build three tasks whose labels
require, by construction, one, two, or all three modalities: a thresholded
channel sum, an XOR of two asynchronous event pulses, and the parity of
three pulse signs. Each also has a regression variant (the raw value rather
than its sign) so the continuous metrics have a native task.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

LABEL_KINDS = ("regression", "binary", "categorical")
TASKS = ("unimodal-sum", "bimodal-product", "trimodal-parity")


@dataclass
class MultimodalBatch:
    modality_names: tuple[str, ...]
    features: tuple[np.ndarray, ...]  # each (N, T, d_m) float64
    mask: np.ndarray                  # (N, T) bool, True = real timestep
    labels: np.ndarray                # (N, label_dim) float64
    label_kind: str
    num_classes: int | None = None

    def __post_init__(self):
        self.modality_names = tuple(self.modality_names)
        self.features = tuple(np.asarray(x, dtype=np.float64) for x in self.features)
        self.mask = np.asarray(self.mask, dtype=bool)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.label_kind not in LABEL_KINDS:
            raise ValueError(f"unknown label kind {self.label_kind!r}")
        if self.label_kind == "categorical" and not self.num_classes:
            raise ValueError("categorical labels need num_classes")
        n, t = self.mask.shape
        for name, x in zip(self.modality_names, self.features):
            if x.shape[:2] != (n, t):
                raise ValueError(f"modality {name}: shape {x.shape} vs mask {self.mask.shape}")
            if not np.all(x[~self.mask] == 0.0):
                raise ValueError(f"modality {name}: padded positions must be exact zeros")
        if self.labels.ndim != 2 or self.labels.shape[0] != n:
            raise ValueError(f"labels shape {self.labels.shape} does not match {n} samples")
        # left padding: within each row, False entries form a prefix
        if not np.all(self.mask[:, :-1] <= self.mask[:, 1:]):
            raise ValueError("mask is not left-padded")

    @property
    def n(self):
        return self.mask.shape[0]

    @property
    def seq_len(self):
        return self.mask.shape[1]

    @property
    def lengths(self):
        return self.mask.sum(axis=1)

    def output_dim(self):
        """Width of the model output appropriate for this label kind."""
        if self.label_kind == "categorical":
            return int(self.num_classes)
        return self.labels.shape[1]

    def feature(self, name):
        try:
            return self.features[self.modality_names.index(name)]
        except ValueError:
            raise KeyError(f"batch has no modality named {name!r}") from None

    def input_dim(self, name):
        return self.feature(name).shape[2]

    def subset(self, indices):
        indices = np.asarray(indices)
        return MultimodalBatch(
            self.modality_names,
            tuple(x[indices] for x in self.features),
            self.mask[indices],
            self.labels[indices],
            self.label_kind,
            self.num_classes,
        )

    def batches(self, batch_size, order=None):
        """Yield mini-batches, optionally in a caller-supplied sample order."""
        idx = np.arange(self.n) if order is None else np.asarray(order)
        for start in range(0, len(idx), batch_size):
            yield self.subset(idx[start:start + batch_size])


@dataclass(frozen=True)
class SyntheticTaskSpec:
    task: str
    num_samples: int
    seq_len: int
    dims: tuple[int, ...] = (4, 4, 4)
    noise_std: float = 0.1
    seed: int = 0
    regression: bool = False
    modality_names: tuple[str, ...] = ("L", "V", "A")

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if len(self.dims) != len(self.modality_names):
            raise ValueError("dims and modality_names must align")
        if self.seq_len < 2:
            raise ValueError("seq_len must be at least 2")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")


# --------------------------------------------------------------- label rules

def unimodal_sum_value(channel, mask):
    """Sum of a channel over real timesteps; the thresholded version is the label."""
    return (channel * mask).sum(axis=-1)


def xor_label(sign_a, sign_b):
    """1 when exactly one sign is negative."""
    return ((sign_a < 0) ^ (sign_b < 0)).astype(np.float64)


def parity_label(sign_a, sign_b, sign_c):
    """Count of negative signs mod 2."""
    neg = (sign_a < 0).astype(int) + (sign_b < 0).astype(int) + (sign_c < 0).astype(int)
    return (neg % 2).astype(np.float64)


# --------------------------------------------------------------- generation

def _base_arrays(spec, rng):
    n, t = spec.num_samples, spec.seq_len
    lengths = rng.integers(t // 2, t + 1, size=n)
    mask = np.zeros((n, t), dtype=bool)
    for i, ln in enumerate(lengths):
        mask[i, t - ln:] = True
    feats = []
    for d in spec.dims:
        x = rng.standard_normal((n, t, d)) * spec.noise_std
        x[~mask] = 0.0
        feats.append(x)
    return feats, mask, lengths


def _place_pulses(rng, feats, mask, lengths, modality_index):
    """Add a +/-1 pulse on channel 0 at one random real timestep per sample."""
    n, t = mask.shape
    first_real = t - lengths
    offsets = rng.integers(0, lengths)
    signs = rng.choice(np.array([-1.0, 1.0]), size=n)
    rows = np.arange(n)
    feats[modality_index][rows, first_real + offsets, 0] += signs
    return signs


def generate_dataset(spec):
    """Build the dataset described by `spec`, bitwise reproducible from its seed."""
    rng = np.random.default_rng(spec.seed)
    feats, mask, lengths = _base_arrays(spec, rng)

    if spec.task == "unimodal-sum":
        signal = rng.standard_normal((spec.num_samples, spec.seq_len)) * mask
        feats[0][:, :, 0] += signal
        value = unimodal_sum_value(signal, mask)
        labels = value if spec.regression else (value >= 0).astype(np.float64)
    elif spec.task == "bimodal-product":
        s0 = _place_pulses(rng, feats, mask, lengths, 0)
        s1 = _place_pulses(rng, feats, mask, lengths, 1)
        labels = s0 * s1 if spec.regression else xor_label(s0, s1)
    else:  # trimodal-parity
        s0 = _place_pulses(rng, feats, mask, lengths, 0)
        s1 = _place_pulses(rng, feats, mask, lengths, 1)
        s2 = _place_pulses(rng, feats, mask, lengths, 2)
        labels = s0 * s1 * s2 if spec.regression else parity_label(s0, s1, s2)

    return MultimodalBatch(
        spec.modality_names,
        tuple(feats),
        mask,
        labels.reshape(-1, 1),
        "regression" if spec.regression else "binary",
    )


def split(batch, ratios, seed):
    """Disjoint seed-deterministic shuffle split; ratios must sum to 1."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {sum(ratios)}")
    perm = np.random.default_rng(seed).permutation(batch.n)
    bounds = np.floor(np.cumsum(ratios) * batch.n + 0.5).astype(int)
    bounds[-1] = batch.n
    parts = []
    prev = 0
    for b in bounds:
        parts.append(batch.subset(perm[prev:b]))
        prev = b
    return tuple(parts)


def restrict_modalities(batch, names):
    """View of the batch containing only the named modalities."""
    keep = [batch.modality_names.index(n) for n in names]
    return replace(
        batch,
        modality_names=tuple(batch.modality_names[i] for i in keep),
        features=tuple(batch.features[i] for i in keep),
    )
