"""Modality subsets (factors) and ordered collections of them.

A factor is a nonempty subset of the model's modalities, stored as a bitmask
over modality indices. Each factor owns one self-attention whose feature
receptive field covers exactly those modalities.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations


@dataclass(frozen=True)
class Factor:
    """Nonempty subset of modality indices, as a bitmask."""

    mask: int

    def __post_init__(self):
        if self.mask <= 0:
            raise ValueError("a factor must contain at least one modality")

    def members(self):
        """Modality indices in ascending order."""
        out = []
        m, i = self.mask, 0
        while m:
            if m & 1:
                out.append(i)
            m >>= 1
            i += 1
        return tuple(out)

    @property
    def size(self):
        return bin(self.mask).count("1")

    def contains(self, modality_index):
        return bool(self.mask >> modality_index & 1)

    def name(self, modality_names):
        return "".join(modality_names[i] for i in self.members())

    @staticmethod
    def of(*indices):
        mask = 0
        for i in indices:
            mask |= 1 << i
        return Factor(mask)


@dataclass(frozen=True)
class FactorSet:
    """Ordered, duplicate-free collection of factors."""

    factors: tuple[Factor, ...]

    def __post_init__(self):
        masks = [f.mask for f in self.factors]
        if len(set(masks)) != len(masks):
            raise ValueError("duplicate factor in factor set")

    def __len__(self):
        return len(self.factors)

    def __iter__(self):
        return iter(self.factors)

    def containing(self, modality_index):
        return tuple(f for f in self.factors if f.contains(modality_index))

    def modalities(self):
        """Indices of modalities covered by at least one factor."""
        union = 0
        for f in self.factors:
            union |= f.mask
        return Factor(union).members() if union else ()

    def masks(self):
        return [f.mask for f in self.factors]

    @staticmethod
    def from_masks(masks):
        return FactorSet(tuple(Factor(int(m)) for m in masks))


def enumerate_factors(num_modalities):
    """All nonempty modality subsets, ordered by size then lexicographically."""
    if num_modalities < 1:
        raise ValueError("need at least one modality to enumerate factors")
    factors = []
    for size in range(1, num_modalities + 1):
        for combo in combinations(range(num_modalities), size):
            factors.append(Factor.of(*combo))
    return FactorSet(tuple(factors))


def fan_in(factor_set, modality_index):
    """Number of factors containing the modality; it must appear in at least one."""
    n = len(factor_set.containing(modality_index))
    if n == 0:
        raise ValueError(f"modality index {modality_index} appears in no factor")
    return n
