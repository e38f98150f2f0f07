"""Factorized multimodal transformer and an ordinary-transformer baseline.

The factorized model embeds each modality separately, adds sinusoidal
positional encodings, and stacks multimodal transformer layers. Each layer
holds U factorized self-attention units: one attention per factor (nonempty
modality subset), each restricted to that factor's feature slice but seeing
the full time range. A modality's fan_in attention outputs are merged by a
small conv net over the feature axis (S1), and the U unit outputs are merged
the same way (S2). A GRU reads the final sequence one timestep at a time and
the hidden state at the last step is mapped to the output.

The baseline shares the embedding and GRU head but replaces the factorized
units with H conventional full-width attention heads per layer.

Sequences are left-padded; with `mask_padding` on, padded keys are excluded
from every softmax and the GRU holds its state through padded steps, so
predictions are invariant to extra left padding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .factors import Factor, FactorSet, enumerate_factors, fan_in
from .tensor import (
    Parameter,
    Tensor,
    concat_lastdim,
    conv1d,
    dropout,
    layer_norm,
    masked_softmax,
    matmul,
    relu,
    reshape,
    sigmoid,
    slice_lastdim,
    stack_newdim,
    take_step,
    tanh,
    transpose_last2,
)


class ModelConfigError(ValueError):
    """Model configuration is internally inconsistent."""


class DegenerateSequenceError(ValueError):
    """A sequence in the batch has no real (unpadded) timesteps."""


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ModalitySpec:
    name: str
    input_dim: int
    embed_dim: int

    def __post_init__(self):
        if self.input_dim < 1 or self.embed_dim < 1:
            raise ModelConfigError(f"modality {self.name!r}: dims must be positive")


@dataclass(frozen=True)
class SummarizerConfig:
    """Conv stack over the feature axis; channel counts must end in 1."""

    channels: tuple[int, ...] = (1,)
    kernels: tuple[int, ...] = (5,)

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "kernels", tuple(int(k) for k in self.kernels))
        if len(self.channels) != len(self.kernels):
            raise ModelConfigError("summarizer channel and kernel lists must align")
        if not self.channels or self.channels[-1] != 1:
            raise ModelConfigError("summarizer channel counts must end in 1")
        if any(c < 1 for c in self.channels) or any(k < 1 for k in self.kernels):
            raise ModelConfigError("summarizer channels and kernels must be positive")

    def to_dict(self):
        return {"channels": list(self.channels), "kernels": list(self.kernels)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["channels"]), tuple(d["kernels"]))


class _DimsMixin:
    """Derived sizes shared by both model configs."""

    @property
    def e_x(self):
        return sum(s.embed_dim for s in self.modalities)

    @property
    def d_x(self):
        return sum(s.input_dim for s in self.modalities)

    @property
    def gru_size(self):
        return self.h_gru if self.h_gru is not None else self.e_x

    @property
    def ff_size(self):
        return self.h_ff if self.h_ff is not None else 2 * self.e_x


@dataclass(frozen=True)
class FmtConfig(_DimsMixin):
    modalities: tuple[ModalitySpec, ...]
    d_y: int
    label_kind: str = "regression"
    factor_masks: tuple[int, ...] | None = None  # None = all nonempty subsets
    mtl_layers: int = 2
    fms_units: int = 2
    s1: SummarizerConfig = field(default_factory=SummarizerConfig)
    s2: SummarizerConfig = field(default_factory=SummarizerConfig)
    h_gru: int | None = None  # None = e_x
    h_ff: int | None = None   # None = 2 * e_x
    dropout: float = 0.0
    positions: bool = True
    mask_padding: bool = True
    summarize_add: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "modalities", tuple(self.modalities))
        if not self.modalities:
            raise ModelConfigError("at least one modality is required")
        if self.d_y < 1:
            raise ModelConfigError("d_y must be positive")
        if self.mtl_layers < 0 or self.fms_units < 1:
            raise ModelConfigError("need mtl_layers >= 0 and fms_units >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ModelConfigError(f"dropout {self.dropout} outside [0, 1)")
        m = len(self.modalities)
        for f in self.factor_set:
            if max(f.members()) >= m:
                raise ModelConfigError(f"factor {f.mask:#x} references a missing modality")
        covered = set(self.factor_set.modalities())
        if covered != set(range(m)):
            missing = sorted(set(range(m)) - covered)
            names = ", ".join(self.modalities[i].name for i in missing)
            raise ModelConfigError(f"modalities outside every factor: {names}")

    @property
    def factor_set(self):
        if self.factor_masks is None:
            return enumerate_factors(len(self.modalities))
        return FactorSet.from_masks(self.factor_masks)

    def to_dict(self):
        return {
            "kind": "fmt",
            "modalities": [
                {"name": s.name, "input_dim": s.input_dim, "embed_dim": s.embed_dim}
                for s in self.modalities
            ],
            "d_y": self.d_y,
            "label_kind": self.label_kind,
            "factor_masks": list(self.factor_set.masks()),
            "mtl_layers": self.mtl_layers,
            "fms_units": self.fms_units,
            "s1": self.s1.to_dict(),
            "s2": self.s2.to_dict(),
            "h_gru": self.gru_size,
            "h_ff": self.ff_size,
            "dropout": self.dropout,
            "positions": self.positions,
            "mask_padding": self.mask_padding,
            "summarize_add": self.summarize_add,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            modalities=tuple(
                ModalitySpec(m["name"], m["input_dim"], m["embed_dim"])
                for m in d["modalities"]
            ),
            d_y=d["d_y"],
            label_kind=d.get("label_kind", "regression"),
            factor_masks=tuple(d["factor_masks"]) if d.get("factor_masks") else None,
            mtl_layers=d["mtl_layers"],
            fms_units=d["fms_units"],
            s1=SummarizerConfig.from_dict(d["s1"]),
            s2=SummarizerConfig.from_dict(d["s2"]),
            h_gru=d.get("h_gru"),
            h_ff=d.get("h_ff"),
            dropout=d.get("dropout", 0.0),
            positions=d.get("positions", True),
            mask_padding=d.get("mask_padding", True),
            summarize_add=d.get("summarize_add", False),
            seed=d.get("seed", 0),
        )


@dataclass(frozen=True)
class BaselineConfig(_DimsMixin):
    modalities: tuple[ModalitySpec, ...]
    d_y: int
    label_kind: str = "regression"
    heads: int = 1
    layers: int = 2
    h_gru: int | None = None
    h_ff: int | None = None
    dropout: float = 0.0
    positions: bool = True
    mask_padding: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "modalities", tuple(self.modalities))
        if not self.modalities:
            raise ModelConfigError("at least one modality is required")
        if self.heads < 1 or self.layers < 0 or self.d_y < 1:
            raise ModelConfigError("need heads >= 1, layers >= 0, d_y >= 1")

    def to_dict(self):
        return {
            "kind": "baseline",
            "modalities": [
                {"name": s.name, "input_dim": s.input_dim, "embed_dim": s.embed_dim}
                for s in self.modalities
            ],
            "d_y": self.d_y,
            "label_kind": self.label_kind,
            "heads": self.heads,
            "layers": self.layers,
            "h_gru": self.gru_size,
            "h_ff": self.ff_size,
            "dropout": self.dropout,
            "positions": self.positions,
            "mask_padding": self.mask_padding,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            modalities=tuple(
                ModalitySpec(m["name"], m["input_dim"], m["embed_dim"])
                for m in d["modalities"]
            ),
            d_y=d["d_y"],
            label_kind=d.get("label_kind", "regression"),
            heads=d["heads"],
            layers=d["layers"],
            h_gru=d.get("h_gru"),
            h_ff=d.get("h_ff"),
            dropout=d.get("dropout", 0.0),
            positions=d.get("positions", True),
            mask_padding=d.get("mask_padding", True),
            seed=d.get("seed", 0),
        )


def config_from_dict(d):
    kind = d.get("kind", "fmt")
    if kind == "fmt":
        return FmtConfig.from_dict(d)
    if kind == "baseline":
        return BaselineConfig.from_dict(d)
    raise ModelConfigError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# building blocks

def sinusoidal_encoding(length, dim):
    """Classic fixed positional table: sin on even columns, cos on odd."""
    pos = np.arange(length, dtype=np.float64)[:, None]
    i = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, 2.0 * np.floor(i / 2.0) / dim)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def _uniform_init(rng, fan, shape):
    bound = 1.0 / np.sqrt(fan)
    return rng.uniform(-bound, bound, shape)


class _Affine:
    def __init__(self, rng, params, name, d_in, d_out):
        self.w = Parameter(f"{name}.W", _uniform_init(rng, d_in, (d_in, d_out)))
        self.b = Parameter(f"{name}.b", np.zeros(d_out))
        params += [self.w, self.b]

    def __call__(self, x):
        return matmul(x, self.w.tensor) + self.b.tensor


class _LayerNorm:
    def __init__(self, params, name, dim):
        self.gain = Parameter(f"{name}.gain", np.ones(dim))
        self.bias = Parameter(f"{name}.bias", np.zeros(dim))
        params += [self.gain, self.bias]

    def __call__(self, x):
        return layer_norm(x, self.gain.tensor, self.bias.tensor)


class SummarizationNet:
    """Conv stack over the feature axis mapping (..., c_in, width) to (..., width).

    ReLU between layers, none after the last; the final channel count is 1
    and that axis is squeezed away.
    """

    def __init__(self, rng, params, name, c_in, cfg):
        self.layers = []
        prev = c_in
        for i, (c, k) in enumerate(zip(cfg.channels, cfg.kernels)):
            w = Parameter(f"{name}.conv{i}.W", _uniform_init(rng, prev * k, (c, prev, k)))
            b = Parameter(f"{name}.conv{i}.b", np.zeros((c, 1)))
            params += [w, b]
            self.layers.append((w, b))
            prev = c

    def __call__(self, x):
        h = x
        for i, (w, b) in enumerate(self.layers):
            h = conv1d(h, w.tensor) + b.tensor
            if i < len(self.layers) - 1:
                h = relu(h)
        out_shape = h.data.shape[:-2] + h.data.shape[-1:]
        return reshape(h, out_shape)


class FactorAttention:
    """Self-attention over one factor's feature slice, full time range."""

    def __init__(self, rng, params, name, e_f):
        self.name = name
        self.e_f = e_f
        self.q = _Affine(rng, params, f"{name}.q", e_f, e_f)
        self.k = _Affine(rng, params, f"{name}.k", e_f, e_f)
        self.v = _Affine(rng, params, f"{name}.v", e_f, e_f)
        self.norm = _LayerNorm(params, f"{name}.ln", e_f)

    def __call__(self, x_f, key_mask, capture=None):
        scores = matmul(self.q(x_f), transpose_last2(self.k(x_f))) * (1.0 / np.sqrt(self.e_f))
        smask = None if key_mask is None else key_mask[:, None, :]
        probs = masked_softmax(scores, mask=smask)
        if capture is not None:
            capture.append((self.name, probs.data, key_mask))
        return self.norm(matmul(probs, self.v(x_f)) + x_f)


class FmsUnit:
    """One factorized self-attention unit: per-factor attentions plus S1 merge."""

    def __init__(self, rng, params, name, config):
        self.factor_set = config.factor_set
        dims = [s.embed_dim for s in config.modalities]
        self.offsets = np.concatenate([[0], np.cumsum(dims)])
        self.dims = dims
        self.names = [s.name for s in config.modalities]
        self.summarize_add = config.summarize_add
        self.attentions = {}
        for f in self.factor_set:
            e_f = sum(dims[m] for m in f.members())
            fname = f.name(self.names)
            self.attentions[f] = FactorAttention(rng, params, f"{name}.attn.{fname}", e_f)
        self.s1 = {}
        if not config.summarize_add:
            for m, mod in enumerate(config.modalities):
                c_in = fan_in(self.factor_set, m)
                self.s1[m] = SummarizationNet(
                    rng, params, f"{name}.s1.{mod.name}", c_in, config.s1)

    def _factor_input(self, x, f):
        parts = [slice_lastdim(x, self.offsets[m], self.offsets[m + 1]) for m in f.members()]
        return parts[0] if len(parts) == 1 else concat_lastdim(parts)

    def __call__(self, x, key_mask, capture=None):
        outputs = {f: att(self._factor_input(x, f), key_mask, capture)
                   for f, att in self.attentions.items()}
        merged = []
        for m in range(len(self.dims)):
            slices = []
            for f in self.factor_set.containing(m):
                members = f.members()
                start = sum(self.dims[mm] for mm in members[:members.index(m)])
                slices.append(slice_lastdim(outputs[f], start, start + self.dims[m]))
            if self.summarize_add:
                total = slices[0]
                for s in slices[1:]:
                    total = total + s
                merged.append(total)
            else:
                merged.append(self.s1[m](stack_newdim(slices, axis=-2)))
        return concat_lastdim(merged) if len(merged) > 1 else merged[0]


class MtlLayer:
    """U FMS units, a shared FFN with post-norm, and the S2 merge across units."""

    def __init__(self, rng, params, name, config):
        self.units = [FmsUnit(rng, params, f"{name}.fms.{u}", config)
                      for u in range(config.fms_units)]
        e_x = config.e_x
        self.ffn1 = _Affine(rng, params, f"{name}.ffn.lin1", e_x, config.ff_size)
        self.ffn2 = _Affine(rng, params, f"{name}.ffn.lin2", config.ff_size, e_x)
        self.norm = _LayerNorm(params, f"{name}.ffn.ln", e_x)
        dims = [s.embed_dim for s in config.modalities]
        self.offsets = np.concatenate([[0], np.cumsum(dims)])
        self.dims = dims
        self.summarize_add = config.summarize_add
        self.s2 = {}
        if not config.summarize_add:
            for m, mod in enumerate(config.modalities):
                self.s2[m] = SummarizationNet(
                    rng, params, f"{name}.s2.{mod.name}", config.fms_units, config.s2)

    def __call__(self, x, key_mask, capture=None):
        outs = []
        for unit in self.units:
            u = unit(x, key_mask, capture)
            outs.append(self.norm(self.ffn2(relu(self.ffn1(u))) + u))
        merged = []
        for m in range(len(self.dims)):
            slices = [slice_lastdim(y, self.offsets[m], self.offsets[m + 1]) for y in outs]
            if self.summarize_add:
                total = slices[0]
                for s in slices[1:]:
                    total = total + s
                merged.append(total)
            else:
                merged.append(self.s2[m](stack_newdim(slices, axis=-2)))
        return concat_lastdim(merged) if len(merged) > 1 else merged[0]


class GruCell:
    def __init__(self, rng, params, name, d_in, d_hidden):
        self.d_hidden = d_hidden

        def mk(gate, fan, shape):
            return Parameter(f"{name}.{gate}", _uniform_init(rng, fan, shape))

        self.wxz = mk("update.Wx", d_in, (d_in, d_hidden))
        self.whz = mk("update.Wh", d_hidden, (d_hidden, d_hidden))
        self.bz = Parameter(f"{name}.update.b", np.zeros(d_hidden))
        self.wxr = mk("reset.Wx", d_in, (d_in, d_hidden))
        self.whr = mk("reset.Wh", d_hidden, (d_hidden, d_hidden))
        self.br = Parameter(f"{name}.reset.b", np.zeros(d_hidden))
        self.wxh = mk("cand.Wx", d_in, (d_in, d_hidden))
        self.whh = mk("cand.Wh", d_hidden, (d_hidden, d_hidden))
        self.bh = Parameter(f"{name}.cand.b", np.zeros(d_hidden))
        params += [self.wxz, self.whz, self.bz, self.wxr, self.whr, self.br,
                   self.wxh, self.whh, self.bh]

    def step(self, h, x_t):
        z = sigmoid(matmul(x_t, self.wxz.tensor) + matmul(h, self.whz.tensor) + self.bz.tensor)
        r = sigmoid(matmul(x_t, self.wxr.tensor) + matmul(h, self.whr.tensor) + self.br.tensor)
        cand = tanh(matmul(x_t, self.wxh.tensor)
                    + matmul(r * h, self.whh.tensor) + self.bh.tensor)
        return (1.0 - z) * h + z * cand


def gru_step(h, x_t, cell):
    """Single GRU update h' = (1-z) h + z h~ with update/reset/candidate gates."""
    return cell.step(h, x_t)


# ---------------------------------------------------------------------------
# models

class _SequenceModel:
    """Shared embedding front end and GRU prediction head."""

    def _init_head(self, rng, config):
        self.embeds = {
            s.name: _Affine(rng, self._params, f"embed.{s.name}", s.input_dim, s.embed_dim)
            for s in config.modalities
        }
        self.gru = GruCell(rng, self._params, "gru", config.e_x, config.gru_size)
        self.out = _Affine(rng, self._params, "out", config.gru_size, config.d_y)

    def parameters(self):
        return list(self._params)

    def param(self, name):
        for p in self._params:
            if p.name == name:
                return p
        raise KeyError(f"no parameter named {name!r}")

    def zero_grad(self):
        for p in self._params:
            p.zero_grad()

    def _check_batch(self, batch):
        for s in self.config.modalities:
            try:
                x = batch.feature(s.name)
            except KeyError:
                raise ModelConfigError(
                    f"batch is missing modality {s.name!r}") from None
            if x.shape[2] != s.input_dim:
                raise ModelConfigError(
                    f"modality {s.name!r}: batch dim {x.shape[2]} != configured {s.input_dim}")

    def _mask(self, batch):
        if not self.config.mask_padding:
            return None
        mask = np.asarray(batch.mask, dtype=bool)
        if not mask.any(axis=1).all():
            raise DegenerateSequenceError("a sequence has no real timesteps")
        return mask

    def embed(self, batch):
        """Per-modality affine + positional encoding, concatenated to width e_x.

        Positions count from each sequence's first real timestep so that the
        encoding a real timestep receives does not depend on how much padding
        sits to its left.
        """
        self._check_batch(batch)
        mask = self._mask(batch)
        n, t = batch.mask.shape
        if mask is None:
            pos = np.broadcast_to(np.arange(t), (n, t))
            live = np.ones((n, t, 1))
        else:
            first = t - mask.sum(axis=1)
            pos = np.clip(np.arange(t)[None, :] - first[:, None], 0, None)
            live = mask[:, :, None].astype(np.float64)
        parts = []
        for s in self.config.modalities:
            h = self.embeds[s.name](Tensor(batch.feature(s.name)))
            if self.config.positions:
                table = sinusoidal_encoding(t, s.embed_dim)
                h = h + Tensor(table[pos] * live)
            parts.append(h)
        return concat_lastdim(parts) if len(parts) > 1 else parts[0]

    def _head(self, x, mask):
        n, t, _ = x.data.shape
        h = Tensor(np.zeros((n, self.config.gru_size)))
        for step in range(t):
            nxt = self.gru.step(h, take_step(x, step))
            if mask is None:
                h = nxt
            else:
                # hold the state through padded steps so left padding is inert
                col = mask[:, step:step + 1].astype(np.float64)
                h = Tensor(col) * nxt + Tensor(1.0 - col) * h
        return self.out(h)

    def _dropout(self, x, training, rng):
        if not training or self.config.dropout <= 0.0:
            return x
        if rng is None:
            raise ValueError("training-mode forward needs an rng for dropout")
        return dropout(x, self.config.dropout, rng)

    def encode(self, batch, training=False, rng=None, capture=None):
        """Embedding plus the attention stack; returns the B x T x e_x sequence."""
        mask = self._mask(batch)
        x = self._dropout(self.embed(batch), training, rng)
        for k, layer in enumerate(self.layers):
            x = self._dropout(layer(x, mask, capture), training, rng)
            if not np.isfinite(x.data).all():
                raise ArithmeticError(f"non-finite activations after layer {k}")
        return x

    def forward(self, batch, training=False, rng=None, capture=None):
        x = self.encode(batch, training, rng, capture)
        return self._head(x, self._mask(batch))


class FmtModel(_SequenceModel):
    def __init__(self, config):
        self.config = config
        self._params = []
        rng = np.random.default_rng(config.seed)
        self._init_head(rng, config)
        self.layers = [MtlLayer(rng, self._params, f"mtl.{k}", config)
                       for k in range(config.mtl_layers)]
        names = [p.name for p in self._params]
        assert len(names) == len(set(names)), "duplicate parameter names"

    @property
    def attention_count(self):
        """Attentions per MTL layer: U x |factor set|."""
        return self.config.fms_units * len(self.config.factor_set)


class _BaselineLayer:
    """Standard post-norm transformer layer with H full-width heads."""

    def __init__(self, rng, params, name, config):
        e_x = config.e_x
        self.e_x = e_x
        self.heads = [
            (_Affine(rng, params, f"{name}.head.{h}.q", e_x, e_x),
             _Affine(rng, params, f"{name}.head.{h}.k", e_x, e_x),
             _Affine(rng, params, f"{name}.head.{h}.v", e_x, e_x))
            for h in range(config.heads)
        ]
        self.mix = _Affine(rng, params, f"{name}.mix", config.heads * e_x, e_x)
        self.norm1 = _LayerNorm(params, f"{name}.ln1", e_x)
        self.ffn1 = _Affine(rng, params, f"{name}.ffn.lin1", e_x, config.ff_size)
        self.ffn2 = _Affine(rng, params, f"{name}.ffn.lin2", config.ff_size, e_x)
        self.norm2 = _LayerNorm(params, f"{name}.ln2", e_x)

    def __call__(self, x, key_mask, capture=None):
        smask = None if key_mask is None else key_mask[:, None, :]
        outs = []
        for i, (q, k, v) in enumerate(self.heads):
            scores = matmul(q(x), transpose_last2(k(x))) * (1.0 / np.sqrt(self.e_x))
            probs = masked_softmax(scores, mask=smask)
            if capture is not None:
                capture.append((f"head.{i}", probs.data, key_mask))
            outs.append(matmul(probs, v(x)))
        mixed = self.mix(concat_lastdim(outs) if len(outs) > 1 else outs[0])
        a = self.norm1(mixed + x)
        return self.norm2(self.ffn2(relu(self.ffn1(a))) + a)


class BaselineTransformer(_SequenceModel):
    def __init__(self, config):
        self.config = config
        self._params = []
        rng = np.random.default_rng(config.seed)
        self._init_head(rng, config)
        self.layers = [_BaselineLayer(rng, self._params, f"otl.{k}", config)
                       for k in range(config.layers)]
        names = [p.name for p in self._params]
        assert len(names) == len(set(names)), "duplicate parameter names"

    @property
    def attention_count(self):
        return self.config.heads


def build_model(config):
    if isinstance(config, FmtConfig):
        return FmtModel(config)
    if isinstance(config, BaselineConfig):
        return BaselineTransformer(config)
    raise ModelConfigError(f"cannot build a model from {type(config).__name__}")


# ---------------------------------------------------------------------------
# factor ablations

ABLATION_MODES = ("drop-unimodal", "drop-bimodal", "drop-trimodal",
                  "only-modality", "summarize-by-addition")


def apply_factor_ablation(config, mode, modality=None):
    """Return a config with factors removed or summarization swapped for addition.

    `drop-*` removes all factors of that subset size; `only-modality` keeps a
    single modality and its unimodal factor; `summarize-by-addition` replaces
    the S1/S2 conv nets with channel-wise sums.
    """
    if not isinstance(config, FmtConfig):
        raise ModelConfigError("factor ablations apply to the factorized model only")
    if mode not in ABLATION_MODES:
        raise ModelConfigError(f"unknown ablation mode {mode!r}")
    if mode == "summarize-by-addition":
        return _replace(config, summarize_add=True)
    if mode == "only-modality":
        if modality is None:
            raise ModelConfigError("only-modality ablation needs a modality name")
        names = [s.name for s in config.modalities]
        if modality not in names:
            raise ModelConfigError(f"no modality named {modality!r}")
        keep = tuple(s for s in config.modalities if s.name == modality)
        return _replace(config, modalities=keep, factor_masks=(1,))
    size = {"drop-unimodal": 1, "drop-bimodal": 2, "drop-trimodal": 3}[mode]
    kept = tuple(f.mask for f in config.factor_set if f.size != size)
    if not kept:
        raise ModelConfigError(f"ablation {mode!r} empties the factor set")
    return _replace(config, factor_masks=kept)


def _replace(config, **changes):
    d = {k: getattr(config, k) for k in config.__dataclass_fields__}
    d.update(changes)
    return FmtConfig(**d)
