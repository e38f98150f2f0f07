"""Acceptance suite: one test per claim the package stands on.

Run with ``pytest tests/test_acceptance.py -v`` for one pass/fail line per
criterion. The two criteria that train real models (5 and 7) use settings
frozen after a single calibration pass on 2026-08-14 (one CPU core); the
measured numbers are recorded in comments next to each test.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from fmtnet.cli import main
from fmtnet.data import (
    MultimodalBatch,
    SyntheticTaskSpec,
    generate_dataset,
    restrict_modalities,
    split,
)
from fmtnet.experiments import (
    SWEEP_AXES,
    ResultTable,
    greedy_factor_search,
    run_ablation_suite,
    run_trials,
    sweep,
)
from fmtnet.factors import enumerate_factors, fan_in
from fmtnet.gradcheck import grad_check, output_probe
from fmtnet.metrics import ba_nonneg, ba_posneg, bucket, mae, pearson_corr
from fmtnet.model import (
    FmtConfig,
    ModalitySpec,
    SummarizerConfig,
    apply_factor_ablation,
    build_model,
)
from fmtnet.tensor import gradient_fault
from fmtnet.train import TrainConfig


def _report(n, detail):
    print(f"criterion {n}: PASS - {detail}")


def make_batch(rng, dims, t, n=2, names=("L", "V", "A"), ragged=True):
    lengths = rng.integers(max(1, t // 2), t + 1, size=n) if ragged \
        else np.full(n, t)
    mask = np.arange(t)[None, :] >= (t - lengths[:, None])
    feats = tuple(rng.standard_normal((n, t, d)) * mask[:, :, None]
                  for d in dims)
    return MultimodalBatch(tuple(names[:len(dims)]), feats, mask,
                           np.zeros((n, 1)), "regression")


# ---------------------------------------------------------------------------
# 1. gradient correctness on the tiny config, plus the negative control

def test_criterion_1_gradient_correctness():
    started = time.monotonic()
    mods = tuple(ModalitySpec(n, 3, 4) for n in ("L", "V", "A"))
    config = FmtConfig(modalities=mods, d_y=2, mtl_layers=2, fms_units=2,
                       seed=0)
    assert len(config.factor_set) == 7
    model = build_model(config)
    rng = np.random.default_rng(0)
    batch = make_batch(rng, (3, 3, 3), t=5, n=2)
    loss_fn = output_probe(model, batch, seed=0)

    err = grad_check(loss_fn, model.parameters(), eps=1e-5)
    assert err < 1e-4, f"max relative error {err:.3e}"

    with gradient_fault(2.0):
        fault_err = grad_check(loss_fn, model.parameters(), eps=1e-5)
    assert fault_err > 0.3, f"fault not detected: {fault_err:.3e}"

    elapsed = time.monotonic() - started
    assert elapsed < 120
    _report(1, f"max rel err {err:.2e}, fault control {fault_err:.2f}, "
               f"{elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 2. factor combinatorics and the 42-attention layer

def test_criterion_2_factor_combinatorics():
    for m in range(1, 7):
        factors = enumerate_factors(m)
        assert len(factors) == 2 ** m - 1
        for i in range(m):
            assert fan_in(factors, i) == 2 ** (m - 1)

    mods = tuple(ModalitySpec(n, 2, 3) for n in ("L", "V", "A"))
    config = FmtConfig(modalities=mods, d_y=1, mtl_layers=1, fms_units=6,
                       s1=SummarizerConfig((1,), (2,)),
                       s2=SummarizerConfig((1,), (2,)), seed=0)
    model = build_model(config)
    assert model.attention_count == 42
    capture = []
    model.forward(make_batch(np.random.default_rng(1), (2, 2, 2), t=4),
                  capture=capture)
    assert len(capture) == 42
    _report(2, "2^M-1 factors and fan-in 2^(M-1) for M in 1..6; "
               "6 units x 7 factors ran 42 attentions")


# ---------------------------------------------------------------------------
# 3. attention normalization, permutation equivariance, padding invariance

def _random_tiny(rng, positions=True):
    m = int(rng.integers(1, 4))
    dims = tuple(int(rng.integers(1, 4)) for _ in range(m))
    mods = tuple(ModalitySpec(n, d, int(rng.integers(2, 5)))
                 for n, d in zip(("L", "V", "A"), dims))
    config = FmtConfig(modalities=mods, d_y=1, mtl_layers=1, fms_units=1,
                       s1=SummarizerConfig((1,), (2,)),
                       s2=SummarizerConfig((1,), (2,)),
                       positions=positions, seed=int(rng.integers(1 << 31)))
    return build_model(config), dims


def test_criterion_3_normalization_100_instances():
    worst = 0.0
    for i in range(100):
        rng = np.random.default_rng(1000 + i)
        model, dims = _random_tiny(rng)
        batch = make_batch(rng, dims, t=int(rng.integers(2, 7)))
        capture = []
        model.forward(batch, capture=capture)
        assert capture
        for _, probs, key_mask in capture:
            worst = max(worst, np.abs(probs.sum(axis=-1) - 1.0).max())
            pad_weight = np.abs(probs * ~key_mask[:, None, :]).max()
            assert pad_weight == 0.0
    assert worst < 1e-12, f"row sum off by {worst:.2e}"
    _report(3.1, f"attention rows sum to 1 within {worst:.1e} "
                 f"on 100 instances; padded keys get exactly zero")


def test_criterion_3_permutation_equivariance_100_instances():
    worst = 0.0
    for i in range(100):
        rng = np.random.default_rng(2000 + i)
        model, dims = _random_tiny(rng, positions=False)
        t = int(rng.integers(2, 7))
        batch = make_batch(rng, dims, t=t, ragged=False)
        perm = rng.permutation(t)
        permuted = MultimodalBatch(
            batch.modality_names,
            tuple(f[:, perm, :] for f in batch.features),
            batch.mask[:, perm], batch.labels, batch.label_kind)
        out = model.encode(batch).data
        out_perm = model.encode(permuted).data
        worst = max(worst, np.abs(out[:, perm, :] - out_perm).max())
    assert worst < 1e-8, f"equivariance off by {worst:.2e}"
    _report(3.2, f"time permutation commutes with encode within {worst:.1e} "
                 f"on 100 instances (positions off)")


def test_criterion_3_padding_invariance_100_instances():
    worst = 0.0
    for i in range(100):
        rng = np.random.default_rng(3000 + i)
        model, dims = _random_tiny(rng)
        batch = make_batch(rng, dims, t=int(rng.integers(2, 6)))
        extra = int(rng.integers(1, 4))
        n, t = batch.mask.shape
        padded = MultimodalBatch(
            batch.modality_names,
            tuple(np.concatenate([np.zeros((n, extra, f.shape[2])), f], axis=1)
                  for f in batch.features),
            np.concatenate([np.zeros((n, extra), dtype=bool), batch.mask],
                           axis=1),
            batch.labels, batch.label_kind)
        a = model.forward(batch).data
        b = model.forward(padded).data
        worst = max(worst, np.abs(a - b).max())
    assert worst < 1e-8, f"padding moved predictions by {worst:.2e}"
    _report(3.3, f"extra left padding moves predictions by at most "
                 f"{worst:.1e} on 100 instances")


# ---------------------------------------------------------------------------
# 4. overfit sanity within 500 Adam steps

def test_criterion_4_overfit_sanity():
    started = time.monotonic()
    spec = SyntheticTaskSpec("bimodal-product", num_samples=8, seq_len=5,
                             dims=(2, 2, 2), seed=0)
    batch = generate_dataset(spec)
    mods = tuple(ModalitySpec(n, 2, 4) for n in ("L", "V", "A"))
    config = FmtConfig(modalities=mods, d_y=1, label_kind="binary",
                       mtl_layers=2, fms_units=2,
                       s1=SummarizerConfig((1,), (2,)),
                       s2=SummarizerConfig((1,), (2,)), seed=0)
    model = build_model(config)
    tc = TrainConfig(learning_rate=0.01, max_epochs=200, batch_size=4,
                     patience=200)
    from fmtnet.train import train
    history = train(model, batch, batch, tc)
    hit = next((h for h in history if h["train_loss"] < 0.01), None)
    assert hit is not None, "training loss never fell below 0.01"
    assert hit["steps"] <= 500, f"took {hit['steps']} steps"
    elapsed = time.monotonic() - started
    assert elapsed < 300
    _report(4, f"loss {hit['train_loss']:.4f} at step {hit['steps']}, "
               f"{elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 5. factorization ablation ordering on three-way parity
#
# Frozen after one calibration pass (2026-08-14, single core):
#   data  trimodal-parity N=1000 T=20 dims=(3,3,3) noise 0.1 seed 0,
#         split (0.7, 0.1, 0.2) seed 0
#   model e_M=8, K=1 layer, U=2 units, default kernel-5 summarizers
#   train lr=0.003, batch 16, max 120 epochs, patience 40, seeds {0,1,2}
# Calibration measured: full 1.000/1.000/1.000 (mean 1.000);
# unimodal-only 0.525/1.000/0.540 (mean 0.688; cross-modal fusion can
# still trickle through the shared feedforward and the recurrent head,
# so one seed escapes chance); gap 31 points. Single-modality means
# 0.520 / 0.508 / 0.518. About six minutes on one core.

def _parity_setup():
    spec = SyntheticTaskSpec("trimodal-parity", num_samples=1000, seq_len=20,
                             dims=(3, 3, 3), seed=0)
    datasets = split(generate_dataset(spec), (0.7, 0.1, 0.2), seed=0)
    mods = tuple(ModalitySpec(n, 3, 8) for n in ("L", "V", "A"))
    base = FmtConfig(modalities=mods, d_y=1, label_kind="binary",
                     mtl_layers=1, fms_units=2, seed=0)
    tc = TrainConfig(learning_rate=0.003, max_epochs=120, batch_size=16,
                     patience=40)
    return datasets, base, tc


def _mean_accuracy(config, datasets, tc, seeds):
    tr, va, te = datasets
    names = [m.name for m in config.modalities]
    if len(names) < 3:
        tr, va, te = (restrict_modalities(b, names) for b in (tr, va, te))
    jobs = [{"model_config": {**config.to_dict(), "seed": s},
             "train_config": tc.to_dict(), "train": tr, "val": va, "test": te}
            for s in seeds]
    return float(np.mean([r["Accuracy"] for r in run_trials(jobs, 1)]))


def test_criterion_5_ablation_ordering():
    started = time.monotonic()
    datasets, base, tc = _parity_setup()
    seeds = [0, 1, 2]
    uni = apply_factor_ablation(apply_factor_ablation(base, "drop-trimodal"),
                                "drop-bimodal")
    full_acc = _mean_accuracy(base, datasets, tc, seeds)
    uni_acc = _mean_accuracy(uni, datasets, tc, seeds)
    singles = {name: _mean_accuracy(
        apply_factor_ablation(base, "only-modality", name), datasets, tc, seeds)
        for name in ("L", "V", "A")}

    assert full_acc - uni_acc >= 0.15, \
        f"full {full_acc:.3f} vs unimodal-only {uni_acc:.3f}"
    for name, acc in singles.items():
        assert abs(acc - 0.5) <= 0.05, f"only-{name} at {acc:.3f}"
    elapsed = time.monotonic() - started
    assert elapsed < 3600
    _report(5, f"full {full_acc:.3f}, unimodal-only {uni_acc:.3f} "
               f"(gap {100 * (full_acc - uni_acc):.0f} pts), singles "
               + ", ".join(f"{k} {v:.3f}" for k, v in singles.items())
               + f", {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 6. harness shapes: 8 ablation rows; 6/7/10 sweep rows; bitwise reruns

def _tiny_suite_setup():
    spec = SyntheticTaskSpec("bimodal-product", num_samples=24, seq_len=4,
                             dims=(2, 2, 2), seed=0)
    datasets = split(generate_dataset(spec), (0.5, 0.25, 0.25), seed=0)
    mods = tuple(ModalitySpec(n, 2, 2) for n in ("L", "V", "A"))
    base = FmtConfig(modalities=mods, d_y=1, label_kind="binary",
                     mtl_layers=1, fms_units=1,
                     s1=SummarizerConfig((1,), (2,)),
                     s2=SummarizerConfig((1,), (2,)), seed=0)
    tc = TrainConfig(learning_rate=0.001, max_epochs=1, batch_size=8,
                     patience=1)
    return datasets, base, tc


def test_criterion_6_harness_shapes(tmp_path):
    datasets, base, tc = _tiny_suite_setup()

    ablation = run_ablation_suite(base, datasets, tc, seeds=[0])
    assert ablation.column("variant") == \
        ["full", "UNI", "BI", "TRI", "L", "V", "A", "S"]

    row_counts = {}
    for axis, expected in (("fms-units", 6), ("mtl-layers", 7),
                           ("baseline-heads", 10)):
        table = sweep(base, axis, datasets, tc)
        row_counts[axis] = len(table.rows)
        assert len(table.rows) == expected
        assert len(SWEEP_AXES[axis]) == expected
        csv_path = table.write_csv(tmp_path / f"{axis}.csv")
        json_path = table.write_json(tmp_path / f"{axis}.json")
        assert ResultTable.read_csv(csv_path).rows == table.rows
        assert ResultTable.read_json(json_path).rows == table.rows

    again = run_ablation_suite(base, datasets, tc, seeds=[0])
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    ablation.write_csv(p1)
    again.write_csv(p2)
    assert p1.read_bytes() == p2.read_bytes()
    _report(6, f"ablate 8 rows; sweeps {row_counts}; tables parse and "
               f"reruns are bitwise identical")


# ---------------------------------------------------------------------------
# 7. greedy factor search finds the label-carrying modality
#
# Frozen after one calibration pass (2026-08-14, single core):
#   data  unimodal-sum N=600 T=12 dims=(4,4,4) seed 0 (label from L),
#         split (0.7, 0.15, 0.15) seed 0
#   model e_M=6, K=1, U=1; train lr=0.003, batch 32, 12 epochs
# Calibration measured first factors LA / LV / LVA for seeds 0 / 1 / 2
# (3/3 contain L); every L-containing candidate beat every L-free one
# by at least 3x in validation loss on all three seeds.

def test_criterion_7_greedy_search_finds_l():
    started = time.monotonic()
    spec = SyntheticTaskSpec("unimodal-sum", num_samples=600, seq_len=12,
                             dims=(4, 4, 4), seed=0)
    datasets = split(generate_dataset(spec), (0.7, 0.15, 0.15), seed=0)
    mods = tuple(ModalitySpec(n, 4, 6) for n in ("L", "V", "A"))
    base = FmtConfig(modalities=mods, d_y=1, label_kind="binary",
                     mtl_layers=1, fms_units=1, seed=0)
    tc = TrainConfig(learning_rate=0.003, max_epochs=12, batch_size=32,
                     patience=12)
    firsts = []
    for s in (0, 1, 2):
        chosen, trace = greedy_factor_search(base, datasets, tc, budget=1,
                                             seed=s)
        firsts.append(trace[0]["chosen"] if trace else "(none)")
    hits = sum("L" in f for f in firsts)
    assert hits >= 2, f"first factors {firsts}"
    elapsed = time.monotonic() - started
    assert elapsed < 1800
    _report(7, f"first factors {firsts} - {hits}/3 contain L, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 8. metric worked examples

def test_criterion_8_metric_examples():
    assert ba_nonneg(np.array([-0.5, 0.2]), np.array([-1.0, 0.0])) == 1.0
    assert ba_posneg(np.array([-0.5, 0.2]), np.array([-1.0, 0.0])) == 1.0
    with pytest.raises(ValueError):
        ba_posneg(np.array([1.0]), np.array([0.0]))
    assert bucket(np.array([2.4]), 7)[0] == 6
    assert mae(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    x = np.arange(10.0)
    assert pearson_corr(x, 3 * x + 2) == pytest.approx(1.0, abs=1e-12)
    assert pearson_corr(x, np.full(10, 2.0)) == 0.0
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal(50), rng.standard_normal(50)
    assert ba_nonneg(np.tanh(a), b) == ba_nonneg(a, b)  # monotone-invariant
    assert abs(pearson_corr(2 * a + 1, b) - pearson_corr(a, b)) < 1e-10
    assert mae(a, b) == mae(b, a)
    _report(8, "worked examples and invariances hold exactly")


# ---------------------------------------------------------------------------
# 9. command determinism: identical inputs -> identical result files

def _run_cli(*argv):
    assert main([str(a) for a in argv]) == 0


def test_criterion_9_command_determinism(tmp_path, monkeypatch, capsys):
    monkeypatch.delenv("FMT_SEED", raising=False)
    cfg = tmp_path / "run.json"
    cfg.write_text("""{
      "model": {"modalities": [{"name": "L", "input_dim": 2},
                               {"name": "V", "input_dim": 2},
                               {"name": "A", "input_dim": 2}],
                "d_y": 1, "label_kind": "binary", "mtl_layers": 1,
                "fms_units": 1, "s1": {"channels": [1], "kernels": [2]},
                "s2": {"channels": [1], "kernels": [2]}},
      "train": {"max_epochs": 2, "batch_size": 8, "patience": 2}
    }""")
    checked = []
    for rerun in ("x", "y"):
        root = tmp_path / rerun
        data = root / "data"
        _run_cli("gen-data", "--task", "bimodal-product", "--n", 24,
                 "--seq-len", 4, "--dims", "2,2,2", "--seed", 0, "--out", data)
        _run_cli("train", "--data", data, "--config", cfg, "--out",
                 root / "runs")
        _run_cli("ablate", "--data", data, "--config", cfg, "--seeds", "0",
                 "--out", root / "runs")
        files = sorted(p for p in root.rglob("*")
                       if p.is_file() and not p.name.endswith("manifest.json"))
        checked.append({p.relative_to(root): p.read_bytes() for p in files})
    capsys.readouterr()
    assert list(checked[0]) == list(checked[1])
    assert checked[0] == checked[1]
    assert len(checked[0]) >= 10
    _report(9, f"{len(checked[0])} result files bitwise identical across "
               f"reruns of gen-data, train, ablate")
