"""Command-line interface.

Subcommands cover dataset generation, training, evaluation, gradient
verification, and the experiment suites (ablation, sweeps, greedy factor
search, grid search). Every run writes one JSON manifest recording the
command, the fully resolved configuration, the seed, the code version, a
dataset digest, the wall-clock duration, and the produced files. Progress
goes to standard error; result paths go to standard output.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 runtime or data error. The ``FMT_SEED`` environment variable
overrides ``--seed`` when the flag is absent.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, load_run_config
from .data import (
    TASKS,
    MultimodalBatch,
    SyntheticTaskSpec,
    generate_dataset,
    split,
)
from .dataio import DataFormatError, load_dataset, save_dataset
from .experiments import (
    SWEEP_AXES,
    ResultTable,
    config_hash,
    default_grid,
    greedy_factor_search,
    grid_search,
    run_ablation_suite,
    sample_summarizer_architectures,
    sweep,
)
from .factors import Factor
from .gradcheck import grad_check, output_probe
from .model import (
    DegenerateSequenceError,
    FmtConfig,
    ModalitySpec,
    ModelConfigError,
    build_model,
)
from .tensor import ShapeError, gradient_fault
from .train import TrainConfigError, eval_loss, evaluate, train

GRADCHECK_TOLERANCE = 1e-4


# ---------------------------------------------------------------------------
# small shared pieces

def _progress(msg):
    print(msg, file=sys.stderr)


def _fail(code, msg):
    print(f"error: {msg}", file=sys.stderr)
    return code


def _resolve_seed(flag_value, default=0):
    if flag_value is not None:
        return flag_value
    env = os.environ.get("FMT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"FMT_SEED must be an integer, got {env!r}") from None
    return default


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _modality_names(count):
    base = ("L", "V", "A")
    return base[:count] + tuple(f"M{i}" for i in range(len(base), count))


def _dataset_digest(dataset_dir):
    """Digest of the dataset payload files, independent of manifests nearby."""
    h = hashlib.sha256()
    for p in sorted(Path(dataset_dir).iterdir()):
        if p.suffix in (".f64", ".u32") or p.name == "meta.json":
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()[:16]


def _write_manifest(out_dir, stem, *, command, config, seed, dataset_hash,
                    outputs, started, result=None):
    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "code_version": __version__,
        "dataset_hash": dataset_hash,
        "duration_seconds": round(time.monotonic() - started, 3),
        "outputs": [str(p) for p in outputs],
    }
    if result is not None:
        doc["result"] = result
    path = Path(out_dir) / f"{stem}.manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _write_table(table, out_dir, stem):
    return [table.write_csv(Path(out_dir) / f"{stem}.csv"),
            table.write_json(Path(out_dir) / f"{stem}.json")]


def _emit(paths):
    for p in paths:
        print(p)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_splits(args, seed):
    batch = load_dataset(args.data)
    ratios = args.split
    if abs(sum(ratios) - 1.0) > 1e-9 or len(ratios) != 3:
        raise ConfigError(f"--split needs three ratios summing to 1, got {ratios}")
    return split(batch, ratios, seed=seed)


def _run_config(args, seed):
    run = load_run_config(args.config).with_seed(
        seed if args.seed is not None or "FMT_SEED" in os.environ else None)
    return run


# ---------------------------------------------------------------------------
# commands

def cmd_gen_data(args, started):
    seed = _resolve_seed(args.seed)
    names = _modality_names(len(args.dims))
    try:
        spec = SyntheticTaskSpec(
            task=args.task, num_samples=args.n, seq_len=args.seq_len,
            dims=args.dims, noise_std=args.noise, seed=seed,
            regression=args.regression, modality_names=names)
    except ValueError as e:
        return _fail(2, e)
    out = _out_dir(args)
    _progress(f"[gen-data] {args.task}: {args.n} samples, T={args.seq_len} -> {out}")
    batch = generate_dataset(spec)
    save_dataset(batch, out)
    resolved = {
        "task": spec.task, "num_samples": spec.num_samples,
        "seq_len": spec.seq_len, "dims": list(spec.dims),
        "noise_std": spec.noise_std, "seed": spec.seed,
        "regression": spec.regression, "modality_names": list(names),
    }
    stem = f"gen-data_{config_hash(resolved)}_seed{seed}"
    _write_manifest(out, stem, command="gen-data", config=resolved, seed=seed,
                    dataset_hash=_dataset_digest(out), outputs=[out],
                    started=started)
    print(out)
    return 0


def cmd_train(args, started):
    seed = _resolve_seed(args.seed)
    run = _run_config(args, seed)
    data = load_dataset(args.data)
    if args.val_data:
        train_batch, val_batch = data, load_dataset(args.val_data)
    else:
        train_batch, val_batch = split(data, (1 - args.val_frac, args.val_frac),
                                       seed=run.train.seed)
    out = _out_dir(args)
    stem = f"train_{config_hash(run.to_dict())}_seed{run.train.seed}"
    _progress(f"[train] {train_batch.n} train / {val_batch.n} val samples, "
              f"up to {run.train.max_epochs} epochs")
    model = build_model(run.model)
    history = train(model, train_batch, val_batch, run.train)
    ckpt = out / f"{stem}.ckpt"
    save_checkpoint(model, ckpt)
    table = ResultTable(["epoch", "train_loss", "val_loss", "steps"])
    for record in history:
        table.append(record)
    outputs = [ckpt] + _write_table(table, out, f"{stem}.history")
    best = min(r["val_loss"] for r in history)
    _progress(f"[train] best validation loss {best:.6f} "
              f"after {len(history)} epochs")
    digest = _dataset_digest(args.data)
    if args.val_data:
        digest = {"train": digest, "val": _dataset_digest(args.val_data)}
    _write_manifest(out, stem, command="train", config=run.to_dict(),
                    seed=run.train.seed, dataset_hash=digest,
                    outputs=outputs, started=started,
                    result={"best_val_loss": best, "epochs": len(history)})
    _emit(outputs)
    return 0


def cmd_eval(args, started):
    seed = _resolve_seed(args.seed)
    if args.config:
        load_run_config(args.config)  # validated for early failure only
    model = load_checkpoint(args.checkpoint)
    batch = load_dataset(args.data)
    _progress(f"[eval] {batch.n} samples from {args.data}")
    metrics = evaluate(model, batch)
    kind = model.config.label_kind
    metrics["loss"] = eval_loss(model, batch, kind)
    metrics["n"] = batch.n
    table = ResultTable(sorted(metrics))
    table.append(metrics)
    out = _out_dir(args)
    stem = f"eval_{config_hash(model.config.to_dict())}_seed{seed}"
    outputs = _write_table(table, out, stem)
    _write_manifest(out, stem, command="eval", config=model.config.to_dict(),
                    seed=seed, dataset_hash=_dataset_digest(args.data),
                    outputs=outputs, started=started, result=metrics)
    _emit(outputs)
    return 0


def _tiny_gradcheck_config():
    mods = tuple(ModalitySpec(n, 3, 4) for n in ("L", "V", "A"))
    return FmtConfig(modalities=mods, d_y=2, mtl_layers=2, fms_units=2)


def _gradcheck_batch(config, seed):
    rng = np.random.default_rng(seed)
    b, t = 2, 5
    lengths = np.array([3, t])
    mask = np.arange(t)[None, :] >= (t - lengths[:, None])
    feats = tuple(rng.standard_normal((b, t, s.input_dim)) * mask[:, :, None]
                  for s in config.modalities)
    names = tuple(s.name for s in config.modalities)
    return MultimodalBatch(names, feats, mask,
                           np.zeros((b, config.d_y)), "regression")


def cmd_gradcheck(args, started):
    seed = _resolve_seed(args.seed)
    if args.samples < 1:
        return _fail(2, "--samples must be at least 1")
    if args.config:
        cfg = load_run_config(args.config).model
    else:
        cfg = _tiny_gradcheck_config()
    model = build_model(cfg)
    batch = _gradcheck_batch(cfg, seed)
    loss_fn = output_probe(model, batch, seed=seed)
    _progress(f"[gradcheck] {sum(p.data.size for p in model.parameters())} "
              f"parameter coordinates, eps={args.eps}, {args.samples} samples each")
    if args.inject_fault:
        with gradient_fault(2.0):
            err = grad_check(loss_fn, model.parameters(), eps=args.eps,
                             samples_per_param=args.samples, seed=seed)
    else:
        err = grad_check(loss_fn, model.parameters(), eps=args.eps,
                         samples_per_param=args.samples, seed=seed)
    ok = err < GRADCHECK_TOLERANCE
    print(f"max relative error {err:.6e}")
    out = _out_dir(args)
    stem = f"gradcheck_{config_hash(cfg.to_dict())}_seed{seed}"
    _write_manifest(out, stem, command="gradcheck", config=cfg.to_dict(),
                    seed=seed, dataset_hash=None, outputs=[], started=started,
                    result={"max_relative_error": err,
                            "tolerance": GRADCHECK_TOLERANCE,
                            "fault_injected": bool(args.inject_fault),
                            "passed": ok})
    return 0 if ok else 1


def _require_fmt(cfg, command):
    if not isinstance(cfg, FmtConfig):
        raise ConfigError(f"{command} needs a model of kind 'fmt'")


def cmd_ablate(args, started):
    seed = _resolve_seed(args.seed)
    run = _run_config(args, seed)
    _require_fmt(run.model, "ablate")
    datasets = _load_splits(args, run.train.seed)
    _progress(f"[ablate] 8 variants x {len(args.seeds)} seeds, jobs={args.jobs}")
    table = run_ablation_suite(run.model, datasets, run.train,
                               seeds=list(args.seeds), jobs_limit=args.jobs)
    out = _out_dir(args)
    stem = f"ablate_{config_hash(run.to_dict())}_seed{run.train.seed}"
    outputs = _write_table(table, out, stem)
    _write_manifest(out, stem, command="ablate", config=run.to_dict(),
                    seed=run.train.seed, dataset_hash=_dataset_digest(args.data),
                    outputs=outputs, started=started,
                    result={"seeds": list(args.seeds)})
    _emit(outputs)
    return 0


def cmd_sweep(args, started):
    seed = _resolve_seed(args.seed)
    run = _run_config(args, seed)
    _require_fmt(run.model, "sweep")
    datasets = _load_splits(args, run.train.seed)
    values = args.values if args.values else SWEEP_AXES[args.axis]
    _progress(f"[sweep] axis {args.axis}: {len(values)} values, jobs={args.jobs}")
    table = sweep(run.model, args.axis, datasets, run.train,
                  seed=run.train.seed, jobs_limit=args.jobs, values=values)
    out = _out_dir(args)
    stem = (f"sweep-{args.axis}_{config_hash(run.to_dict())}"
            f"_seed{run.train.seed}")
    outputs = _write_table(table, out, stem)
    _write_manifest(out, stem, command="sweep", config=run.to_dict(),
                    seed=run.train.seed, dataset_hash=_dataset_digest(args.data),
                    outputs=outputs, started=started,
                    result={"axis": args.axis, "values": list(values)})
    _emit(outputs)
    return 0


def cmd_factor_search(args, started):
    seed = _resolve_seed(args.seed)
    run = _run_config(args, seed)
    _require_fmt(run.model, "factor-search")
    datasets = _load_splits(args, run.train.seed)
    budget = args.budget if args.budget else len(run.model.factor_set)
    if budget < 1:
        return _fail(2, "--budget must be at least 1")
    _progress(f"[factor-search] budget {budget}, jobs={args.jobs}")
    chosen, trace = greedy_factor_search(run.model, datasets, run.train,
                                         budget, seed=run.train.seed,
                                         jobs_limit=args.jobs)
    table = ResultTable(["round", "chosen", "val_loss", "candidates"])
    for record in trace:
        table.append({"round": record["round"], "chosen": record["chosen"],
                      "val_loss": record["val_loss"],
                      "candidates": json.dumps(record["candidates"],
                                               sort_keys=True)})
    out = _out_dir(args)
    stem = f"factor-search_{config_hash(run.to_dict())}_seed{run.train.seed}"
    outputs = _write_table(table, out, stem)
    names = [s.name for s in run.model.modalities]
    chosen_doc = {"factor_masks": list(chosen.masks()),
                  "factors": [Factor(mk).name(names) for mk in chosen.masks()]}
    chosen_path = out / f"{stem}.chosen.json"
    chosen_path.write_text(json.dumps(chosen_doc, indent=2, sort_keys=True) + "\n")
    outputs.append(chosen_path)
    _write_manifest(out, stem, command="factor-search", config=run.to_dict(),
                    seed=run.train.seed, dataset_hash=_dataset_digest(args.data),
                    outputs=outputs, started=started, result=chosen_doc)
    _emit(outputs)
    return 0


def cmd_grid(args, started):
    seed = _resolve_seed(args.seed)
    run = _run_config(args, seed)
    _require_fmt(run.model, "grid")
    datasets = _load_splits(args, run.train.seed)
    space = default_grid()
    if args.trials is not None:
        space = space[:args.trials]
    if args.summarizers:
        space = space + [{"summarizer": arch} for arch in
                         sample_summarizer_architectures(run.train.seed,
                                                         args.summarizers)]
    _progress(f"[grid] {len(space)} trials, jobs={args.jobs}")
    best_cfg, best_tc, table = grid_search(space, run.model, datasets,
                                           run.train, seed=run.train.seed,
                                           jobs_limit=args.jobs)
    out = _out_dir(args)
    stem = f"grid_{config_hash(run.to_dict())}_seed{run.train.seed}"
    outputs = _write_table(table, out, stem)
    best_doc = {"model": best_cfg.to_dict(), "train": best_tc.to_dict()}
    best_path = out / f"{stem}.best.json"
    best_path.write_text(json.dumps(best_doc, indent=2, sort_keys=True) + "\n")
    outputs.append(best_path)
    _write_manifest(out, stem, command="grid", config=run.to_dict(),
                    seed=run.train.seed, dataset_hash=_dataset_digest(args.data),
                    outputs=outputs, started=started,
                    result={"trials": len(space)})
    _emit(outputs)
    return 0


# ---------------------------------------------------------------------------
# parser

def _add_seed_out(p, out_default="runs"):
    p.add_argument("--seed", type=int, default=None,
                   help="seed (FMT_SEED env applies when the flag is absent)")
    p.add_argument("--out", default=out_default, help="output directory")


def _add_suite_flags(p):
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--split", type=_float_list, default=(0.8, 0.1, 0.1),
                   help="train,val,test ratios (default 0.8,0.1,0.1)")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel trials (default 1)")
    _add_seed_out(p)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fmtnet",
        description="Factorized multimodal transformer: data generation, "
                    "training, evaluation, and experiment suites.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset directory")
    p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--n", type=int, default=1000, help="number of samples")
    p.add_argument("--seq-len", type=int, default=20)
    p.add_argument("--dims", type=_int_list, default=(4, 4, 4),
                   help="comma-separated feature dims, one per modality")
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--regression", action="store_true",
                   help="continuous labels instead of class labels")
    p.add_argument("--seed", type=int, default=None,
                   help="seed (FMT_SEED env applies when the flag is absent)")
    p.add_argument("--out", required=True, help="dataset directory to create")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--val-data", help="validation dataset directory")
    p.add_argument("--val-frac", type=float, default=0.1,
                   help="validation fraction when --val-data is absent")
    _add_seed_out(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", help="optional run configuration to validate")
    _add_seed_out(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck",
                       help="verify analytic gradients by finite differences")
    p.add_argument("--config", help="run configuration (default: tiny model)")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--samples", type=int, default=3,
                   help="coordinates sampled per parameter")
    p.add_argument("--inject-fault", action="store_true",
                   help="corrupt one op's gradient; the check must then fail")
    _add_seed_out(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="run the factorization ablation table")
    _add_suite_flags(p)
    p.add_argument("--seeds", type=_int_list, default=(0, 1, 2),
                   help="comma-separated training seeds")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="sweep one architecture axis")
    _add_suite_flags(p)
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p.add_argument("--values", type=_int_list, default=None,
                   help="override the default axis values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("factor-search",
                       help="greedy stepwise factor selection")
    _add_suite_flags(p)
    p.add_argument("--budget", type=int, default=None,
                   help="max factors to select (default: all)")
    p.set_defaults(func=cmd_factor_search)

    p = sub.add_parser("grid", help="hyperparameter grid search")
    _add_suite_flags(p)
    p.add_argument("--trials", type=int, default=None,
                   help="limit to the first N grid points")
    p.add_argument("--summarizers", type=int, default=0,
                   help="also try N sampled summarizer architectures")
    p.set_defaults(func=cmd_grid)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else int(e.code)
    started = time.monotonic()
    try:
        return args.func(args, started)
    except (ConfigError, TrainConfigError) as e:
        return _fail(2, e)
    except (DataFormatError, CheckpointError, ModelConfigError,
            DegenerateSequenceError, ShapeError) as e:
        return _fail(3, e)
    except (ArithmeticError, OSError, ValueError) as e:
        return _fail(3, e)


if __name__ == "__main__":
    sys.exit(main())
