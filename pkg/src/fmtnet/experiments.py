"""Experiment procedures: ablations, sweeps, grid search, greedy factor search.

Every procedure trains independent models over a declared list of trials and
assembles a `ResultTable` in declared order, never completion order, so runs
are reproducible bit for bit regardless of worker count. Tables are written
as CSV plus a JSON mirror with identical values.
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .factors import Factor, FactorSet, enumerate_factors
from .model import (
    BaselineConfig,
    FmtConfig,
    ModalitySpec,
    SummarizerConfig,
    apply_factor_ablation,
    build_model,
    config_from_dict,
)
from .train import TrainConfig, eval_loss, evaluate, train


def config_hash(d):
    """Short stable digest of a JSON-serializable config."""
    blob = json.dumps(d, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:10]


# ---------------------------------------------------------------------------
# result tables

@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)

    def append(self, row):
        missing = [c for c in self.columns if c not in row]
        if missing:
            raise ValueError(f"row is missing columns {missing}")
        self.rows.append({c: row[c] for c in self.columns})

    def column(self, name):
        return [r[name] for r in self.rows]

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([_cell(r[c]) for c in self.columns])
        return path

    def write_json(self, path):
        with open(path, "w") as f:
            json.dump({"columns": self.columns, "rows": self.rows}, f,
                      indent=2, sort_keys=True)
            f.write("\n")
        return path

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as f:
            reader = csv.reader(f)
            columns = next(reader)
            rows = [
                {c: _parse_cell(v) for c, v in zip(columns, line)}
                for line in reader
            ]
        return cls(columns, rows)

    @classmethod
    def read_json(cls, path):
        with open(path) as f:
            d = json.load(f)
        return cls(d["columns"], d["rows"])


def _cell(v):
    if isinstance(v, float):
        return repr(v)  # round-trips exactly
    return v


def _parse_cell(s):
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


# ---------------------------------------------------------------------------
# single trials

def run_trial(job):
    """Train one model and evaluate it; the unit of work for parallel runs."""
    model = build_model(config_from_dict(job["model_config"]))
    tc = TrainConfig.from_dict(job["train_config"])
    history = train(model, job["train"], job["val"], tc)
    kind = tc.loss_kind or job["train"].label_kind
    result = {
        "epochs": len(history),
        "val_loss": min(h["val_loss"] for h in history),
    }
    test = job.get("test")
    if test is not None:
        result.update(evaluate(model, test))
        result["test_loss"] = eval_loss(model, test, kind)
    return result


def run_trials(jobs, jobs_limit=1):
    """Run trials, optionally across processes; results keep job order."""
    if jobs_limit <= 1 or len(jobs) <= 1:
        return [run_trial(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=jobs_limit) as pool:
        return list(pool.map(run_trial, jobs))


def _with_seed(config, seed):
    d = config.to_dict()
    d["seed"] = seed
    return d


# ---------------------------------------------------------------------------
# ablation suite

def ablation_variants(base):
    """The Table-4 variant list: full, factor drops, single modalities, addition."""
    variants = [("full", base)]
    for label, mode in (("UNI", "drop-unimodal"), ("BI", "drop-bimodal"),
                        ("TRI", "drop-trimodal")):
        variants.append((label, apply_factor_ablation(base, mode)))
    for spec in base.modalities:
        variants.append(
            (spec.name, apply_factor_ablation(base, "only-modality", modality=spec.name)))
    variants.append(("S", apply_factor_ablation(base, "summarize-by-addition")))
    return variants


def run_ablation_suite(base_config, datasets, train_config, seeds, jobs_limit=1):
    """Train every ablation variant under every seed; report means and stddevs."""
    tr, va, te = datasets
    variants = ablation_variants(base_config)
    jobs = [
        {"model_config": _with_seed(cfg, seed), "train_config": train_config.to_dict(),
         "train": tr, "val": va, "test": te}
        for _, cfg in variants
        for seed in seeds
    ]
    results = run_trials(jobs, jobs_limit)
    metric_names = sorted(k for k in results[0] if k not in ("epochs",))
    columns = ["variant", "factors", "seeds"]
    for name in metric_names:
        columns += [f"{name}_mean", f"{name}_std"]
    table = ResultTable(columns)
    for i, (label, cfg) in enumerate(variants):
        chunk = results[i * len(seeds):(i + 1) * len(seeds)]
        row = {"variant": label, "factors": len(cfg.factor_set), "seeds": len(seeds)}
        for name in metric_names:
            vals = np.array([r[name] for r in chunk], dtype=np.float64)
            row[f"{name}_mean"] = float(vals.mean())
            row[f"{name}_std"] = float(vals.std())
        table.append(row)
    return table


# ---------------------------------------------------------------------------
# sweeps

SWEEP_AXES = {
    "fms-units": (1, 2, 3, 4, 5, 6),
    "mtl-layers": (2, 3, 4, 5, 6, 7, 8),
    "baseline-heads": (1, 2, 3, 4, 5, 6, 7, 14, 21, 35),
}


def sweep(base_config, axis, datasets, train_config, seed=0, jobs_limit=1,
          values=None):
    """One train/evaluate run per axis value at a fixed seed."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {sorted(SWEEP_AXES)}")
    values = SWEEP_AXES[axis] if values is None else tuple(values)
    tr, va, te = datasets
    configs = []
    for v in values:
        if axis == "fms-units":
            cfg = _replace_fmt(base_config, fms_units=v)
        elif axis == "mtl-layers":
            cfg = _replace_fmt(base_config, mtl_layers=v)
        else:
            cfg = BaselineConfig(
                modalities=base_config.modalities, d_y=base_config.d_y,
                label_kind=base_config.label_kind, heads=v,
                layers=base_config.mtl_layers, h_gru=base_config.h_gru,
                h_ff=base_config.h_ff, dropout=base_config.dropout,
                positions=base_config.positions,
                mask_padding=base_config.mask_padding, seed=seed,
            )
        configs.append(cfg)
    jobs = [
        {"model_config": _with_seed(cfg, seed), "train_config": train_config.to_dict(),
         "train": tr, "val": va, "test": te}
        for cfg in configs
    ]
    results = run_trials(jobs, jobs_limit)
    metric_names = sorted(k for k in results[0] if k != "epochs")
    table = ResultTable([axis, "attentions"] + metric_names)
    for v, cfg, res in zip(values, configs, results):
        row = {axis: v, "attentions": build_attention_count(cfg)}
        row.update({k: res[k] for k in metric_names})
        table.append(row)
    return table


def build_attention_count(config):
    if isinstance(config, BaselineConfig):
        return config.heads
    return config.fms_units * len(config.factor_set)


def _replace_fmt(config, **changes):
    d = {k: getattr(config, k) for k in config.__dataclass_fields__}
    d.update(changes)
    return FmtConfig(**d)


# ---------------------------------------------------------------------------
# hyperparameter grid

GRID_LEARNING_RATES = (0.001, 0.0001)
GRID_MTL_LAYERS = (4, 6, 8)
GRID_FMS_UNITS = (4, 6)
GRID_EMBED_DIMS = (20, 40)
GRID_DROPOUTS = (0.0, 0.1)
SUMMARIZER_LAYER_CHOICES = (1, 2, 3)
SUMMARIZER_KERNEL_CHOICES = (2, 5, 10, 15, 20)
SUMMARIZER_HIDDEN_CHANNELS = 8


def default_grid():
    """The declared hyperparameter grid: 2 lr x 3 K x 2 U x 2 e_M x 2 dropout."""
    points = []
    for lr in GRID_LEARNING_RATES:
        for k in GRID_MTL_LAYERS:
            for u in GRID_FMS_UNITS:
                for e in GRID_EMBED_DIMS:
                    for p in GRID_DROPOUTS:
                        points.append({
                            "learning_rate": lr, "mtl_layers": k,
                            "fms_units": u, "embed_dim": e, "dropout": p,
                        })
    return points


def sample_summarizer_architectures(seed, count=5):
    """Draw `count` distinct conv architectures, seed-deterministic.

    Depth comes from {1,2,3}, each layer's kernel from {2,5,10,15,20};
    hidden layers use a fixed channel width, the last layer maps to 1.
    """
    rng = np.random.default_rng(seed)
    seen = []
    while len(seen) < count:
        depth = int(rng.choice(SUMMARIZER_LAYER_CHOICES))
        kernels = tuple(int(rng.choice(SUMMARIZER_KERNEL_CHOICES))
                        for _ in range(depth))
        if kernels in seen:
            continue
        seen.append(kernels)
    archs = []
    for kernels in seen:
        channels = (SUMMARIZER_HIDDEN_CHANNELS,) * (len(kernels) - 1) + (1,)
        archs.append({"channels": list(channels), "kernels": list(kernels)})
    return archs


def grid_search(space, base_config, datasets, train_config, seed=0, jobs_limit=1):
    """Train every grid point; select by validation loss; log every trial."""
    if not space:
        raise ValueError("grid search space is empty")
    tr, va, te = datasets
    configs, jobs = [], []
    for point in space:
        cfg = _config_from_point(base_config, point)
        tc = TrainConfig.from_dict({**train_config.to_dict(),
                                    "learning_rate": point.get(
                                        "learning_rate", train_config.learning_rate)})
        configs.append((point, cfg, tc))
        jobs.append({"model_config": _with_seed(cfg, seed),
                     "train_config": tc.to_dict(), "train": tr, "val": va, "test": te})
    results = run_trials(jobs, jobs_limit)
    point_keys = sorted({k for point, _, _ in configs for k in point})
    metric_names = sorted(k for k in results[0] if k != "epochs")
    table = ResultTable(["trial", "config_hash"] + point_keys + metric_names)
    for i, ((point, cfg, tc), res) in enumerate(zip(configs, results)):
        row = {"trial": i,
               "config_hash": config_hash({"model": _with_seed(cfg, seed),
                                           "train": tc.to_dict()})}
        for k in point_keys:
            row[k] = _grid_cell(point.get(k))
        row.update({k: res[k] for k in metric_names})
        table.append(row)
    best_i = int(np.argmin([r["val_loss"] for r in results]))
    return configs[best_i][1], configs[best_i][2], table


def _grid_cell(v):
    if isinstance(v, dict):
        return json.dumps(v, sort_keys=True)
    return "" if v is None else v


def _config_from_point(base, point):
    changes = {}
    if "mtl_layers" in point:
        changes["mtl_layers"] = point["mtl_layers"]
    if "fms_units" in point:
        changes["fms_units"] = point["fms_units"]
    if "dropout" in point:
        changes["dropout"] = point["dropout"]
    if "embed_dim" in point:
        changes["modalities"] = tuple(
            ModalitySpec(s.name, s.input_dim, point["embed_dim"])
            for s in base.modalities)
        changes["h_gru"] = None
        changes["h_ff"] = None
    if "summarizer" in point:
        arch = SummarizerConfig.from_dict(point["summarizer"])
        changes["s1"] = arch
        changes["s2"] = arch
    return _replace_fmt(base, **changes)


# ---------------------------------------------------------------------------
# greedy factor search

def _remap_factors(masks, modality_indices):
    """Rewrite factor masks over the full modality list onto a reduced list."""
    pos = {m: i for i, m in enumerate(modality_indices)}
    remapped = []
    for mask in masks:
        new = 0
        for m in Factor(mask).members():
            new |= 1 << pos[m]
        remapped.append(new)
    return tuple(remapped)


def restricted_config(base, masks):
    """Config over exactly the modalities covered by `masks`; others dropped."""
    covered = sorted(set().union(*(Factor(m).members() for m in masks)))
    mods = tuple(base.modalities[i] for i in covered)
    return _replace_fmt(base, modalities=mods,
                        factor_masks=_remap_factors(masks, covered))


def greedy_factor_search(base_config, datasets, train_config, budget,
                         seed=0, jobs_limit=1):
    """Stepwise factor addition: greedily grow the factor set by validation loss.

    Each round trains one model per candidate factor appended to the current
    set; the best candidate is kept. Stops at `budget` factors or as soon as
    no candidate improves the previous round's loss. Modalities outside the
    chosen set are excluded from the model input, so partial sets are legal.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    m = len(base_config.modalities)
    all_masks = [f.mask for f in enumerate_factors(m)]
    if budget > len(all_masks):
        warnings.warn(f"budget {budget} exceeds {len(all_masks)} possible factors; clamped")
        budget = len(all_masks)
    tr, va, _ = datasets
    chosen = []
    best_loss = np.inf
    trace = []
    while len(chosen) < budget:
        candidates = [mk for mk in all_masks if mk not in chosen]
        jobs = []
        for mk in candidates:
            cfg = restricted_config(base_config, chosen + [mk])
            jobs.append({"model_config": _with_seed(cfg, seed),
                         "train_config": train_config.to_dict(),
                         "train": tr, "val": va})
        results = run_trials(jobs, jobs_limit)
        losses = [r["val_loss"] for r in results]
        best_i = int(np.argmin(losses))
        round_record = {
            "round": len(trace),
            "candidates": {Factor(mk).name([s.name for s in base_config.modalities]):
                           losses[i] for i, mk in enumerate(candidates)},
            "chosen": Factor(candidates[best_i]).name(
                [s.name for s in base_config.modalities]),
            "val_loss": losses[best_i],
        }
        if losses[best_i] >= best_loss:
            break
        best_loss = losses[best_i]
        chosen.append(candidates[best_i])
        trace.append(round_record)
    return FactorSet.from_masks(sorted(chosen, key=lambda mk: (bin(mk).count("1"), mk))), trace
