"""Tests for synthetic task generation, batching, splits, and the file format."""

import json

import numpy as np
import pytest
from sklearn.linear_model import LogisticRegression

from fmtnet.data import (
    MultimodalBatch,
    SyntheticTaskSpec,
    generate_dataset,
    parity_label,
    restrict_modalities,
    split,
    unimodal_sum_value,
    xor_label,
)
from fmtnet.dataio import DataFormatError, load_dataset, read_array, save_dataset, write_array


def spec(task, n=200, t=20, seed=0, **kw):
    return SyntheticTaskSpec(task, num_samples=n, seq_len=t, seed=seed, **kw)


# ----------------------------------------------------------- label functions

def test_sum_label_all_positive_channel():
    mask = np.array([[False, True, True, True]])
    channel = np.ones((1, 4))
    assert unimodal_sum_value(channel, mask)[0] == pytest.approx(3.0)


def test_sum_label_ignores_padding():
    mask = np.array([[False, True, True]])
    channel = np.array([[100.0, 1.0, -2.0]])
    assert unimodal_sum_value(channel, mask)[0] == pytest.approx(-1.0)


def test_xor_label_table():
    plus, minus = np.array([1.0]), np.array([-1.0])
    assert xor_label(plus, plus)[0] == 0.0
    assert xor_label(plus, minus)[0] == 1.0
    assert xor_label(minus, plus)[0] == 1.0
    assert xor_label(minus, minus)[0] == 0.0


def test_parity_label_table():
    p, m = np.array([1.0]), np.array([-1.0])
    assert parity_label(p, p, p)[0] == 0.0
    assert parity_label(m, p, p)[0] == 1.0
    assert parity_label(m, m, p)[0] == 0.0
    assert parity_label(m, m, m)[0] == 1.0


# -------------------------------------------------------------- batch shape

@pytest.mark.parametrize("task", ["unimodal-sum", "bimodal-product", "trimodal-parity"])
def test_batch_invariants(task):
    b = generate_dataset(spec(task))
    assert b.n == 200 and b.seq_len == 20
    assert b.modality_names == ("L", "V", "A")
    for x in b.features:
        assert x.shape == (200, 20, 4) and x.dtype == np.float64
        assert np.all(x[~b.mask] == 0.0)
    # left padding: real timesteps form a suffix
    assert np.all(b.mask[:, :-1] <= b.mask[:, 1:])
    assert b.lengths.min() >= 10 and b.lengths.max() <= 20
    assert set(np.unique(b.labels)) <= {0.0, 1.0}


def test_generation_deterministic():
    a = generate_dataset(spec("bimodal-product", seed=7))
    b = generate_dataset(spec("bimodal-product", seed=7))
    for xa, xb in zip(a.features, b.features):
        assert np.array_equal(xa, xb)
    assert np.array_equal(a.labels, b.labels)
    c = generate_dataset(spec("bimodal-product", seed=8))
    assert not np.array_equal(a.labels, c.labels) or not np.array_equal(
        a.features[0], c.features[0]
    )


@pytest.mark.parametrize("task", ["unimodal-sum", "bimodal-product", "trimodal-parity"])
def test_label_balance(task):
    b = generate_dataset(spec(task, n=2000, seed=3))
    rate = b.labels.mean()
    assert 0.45 <= rate <= 0.55


def test_regression_variant():
    b = generate_dataset(spec("bimodal-product", regression=True))
    assert b.label_kind == "regression"
    assert set(np.unique(b.labels)) == {-1.0, 1.0}
    u = generate_dataset(spec("unimodal-sum", regression=True, seed=2))
    assert np.std(u.labels) > 0.5


def test_pulses_land_on_real_timesteps():
    b = generate_dataset(spec("trimodal-parity", noise_std=0.0, n=500))
    for x in b.features:
        # exactly one +/-1 pulse per sample on channel 0, nothing elsewhere
        assert np.all(np.abs(x[:, :, 0]).sum(axis=1) == 1.0)
        assert np.all(x[:, :, 1:] == 0.0)
        assert np.all(x[~b.mask] == 0.0)


def test_noise_scale():
    b = generate_dataset(spec("trimodal-parity", n=500, noise_std=0.3, seed=1))
    resid = b.features[2][:, :, 1:]  # pulse-free channels
    assert np.std(resid[b.mask]) == pytest.approx(0.3, rel=0.05)


def test_batch_rejects_bad_padding():
    mask = np.array([[True, False, True]])  # hole in the middle
    x = np.zeros((1, 3, 2))
    with pytest.raises(ValueError, match="left-padded"):
        MultimodalBatch(("L",), (x,), mask, np.zeros((1, 1)), "binary")


def test_batch_rejects_nonzero_padding():
    mask = np.array([[False, True, True]])
    x = np.ones((1, 3, 2))
    with pytest.raises(ValueError, match="exact zeros"):
        MultimodalBatch(("L",), (x,), mask, np.zeros((1, 1)), "binary")


def test_feature_lookup_names_missing_modality():
    b = generate_dataset(spec("unimodal-sum", n=4))
    with pytest.raises(KeyError, match="audio"):
        b.feature("audio")


def test_subset_and_batches():
    b = generate_dataset(spec("unimodal-sum", n=10))
    sub = b.subset([3, 1, 4])
    assert sub.n == 3
    assert np.array_equal(sub.labels[0], b.labels[3])
    chunks = list(b.batches(4))
    assert [c.n for c in chunks] == [4, 4, 2]
    total = np.concatenate([c.labels for c in chunks])
    assert np.array_equal(total, b.labels)


def test_restrict_modalities():
    b = generate_dataset(spec("trimodal-parity", n=6))
    r = restrict_modalities(b, ("V",))
    assert r.modality_names == ("V",)
    assert np.array_equal(r.feature("V"), b.feature("V"))
    assert np.array_equal(r.labels, b.labels)


# ------------------------------------------------------------------- splits

def test_split_sizes_exact():
    b = generate_dataset(spec("unimodal-sum", n=100))
    tr, va, te = split(b, (0.8, 0.1, 0.1), seed=0)
    assert (tr.n, va.n, te.n) == (80, 10, 10)


def test_split_disjoint_and_deterministic():
    b = generate_dataset(spec("unimodal-sum", n=50, seed=5))
    b = MultimodalBatch(
        b.modality_names, b.features, b.mask,
        np.arange(50, dtype=np.float64).reshape(-1, 1), "regression",
    )
    tr, va, te = split(b, (0.6, 0.2, 0.2), seed=1)
    ids = np.concatenate([tr.labels, va.labels, te.labels]).ravel()
    assert sorted(ids) == list(range(50))
    tr2, _, _ = split(b, (0.6, 0.2, 0.2), seed=1)
    assert np.array_equal(tr.labels, tr2.labels)
    tr3, _, _ = split(b, (0.6, 0.2, 0.2), seed=2)
    assert not np.array_equal(tr.labels, tr3.labels)


def test_split_rejects_bad_ratios():
    b = generate_dataset(spec("unimodal-sum", n=10))
    with pytest.raises(ValueError, match="sum to 1"):
        split(b, (0.5, 0.2), seed=0)


# ---------------------------------------------------------- linear probes

def _mean_pool(batch, names):
    cols = []
    for name in names:
        x = batch.feature(name)
        pooled = x.sum(axis=1) / batch.lengths[:, None]
        cols.append(pooled)
    return np.concatenate(cols, axis=1)


def probe_accuracy(batch, names):
    feats = _mean_pool(batch, names)
    y = batch.labels.ravel()
    n = batch.n // 2
    clf = LogisticRegression(max_iter=1000).fit(feats[:n], y[:n])
    return clf.score(feats[n:], y[n:])


def test_bimodal_product_defeats_single_modality_probe():
    b = generate_dataset(spec("bimodal-product", n=2000, seed=11))
    assert probe_accuracy(b, ("L",)) <= 0.55
    assert probe_accuracy(b, ("V",)) <= 0.55


def test_trimodal_parity_defeats_bimodal_probes():
    b = generate_dataset(spec("trimodal-parity", n=2000, seed=12))
    for pair in (("L", "V"), ("L", "A"), ("V", "A")):
        assert probe_accuracy(b, pair) <= 0.55


def test_unimodal_sum_is_solvable_from_first_modality():
    b = generate_dataset(spec("unimodal-sum", n=2000, seed=13))
    assert probe_accuracy(b, ("L",)) >= 0.9


# -------------------------------------------------------------- file format

def test_array_round_trip(tmp_path):
    arr = np.random.default_rng(0).standard_normal((3, 4, 5))
    write_array(tmp_path / "a.f64", arr)
    back = read_array(tmp_path / "a.f64")
    assert np.array_equal(arr, back) and back.dtype == np.float64


def test_array_header_layout(tmp_path):
    write_array(tmp_path / "a.f64", np.zeros((2, 3)))
    raw = (tmp_path / "a.f64").read_bytes()
    assert raw[:4] == b"FMTD"
    assert raw[4:8] == (1).to_bytes(4, "little")   # version
    assert raw[8:12] == (2).to_bytes(4, "little")  # rank
    assert raw[12:16] == bytes(4)                  # reserved
    assert raw[16:24] == (2).to_bytes(8, "little")
    assert raw[24:32] == (3).to_bytes(8, "little")
    assert len(raw) == 32 + 6 * 8


def test_lengths_are_uint32(tmp_path):
    write_array(tmp_path / "lengths.u32", np.array([3, 20], dtype=np.uint32))
    raw = (tmp_path / "lengths.u32").read_bytes()
    assert len(raw) == 16 + 8 + 2 * 4
    assert np.array_equal(read_array(tmp_path / "lengths.u32"), [3, 20])


def test_read_rejects_bad_magic(tmp_path):
    (tmp_path / "a.f64").write_bytes(b"NOPE" + bytes(28))
    with pytest.raises(DataFormatError, match="magic"):
        read_array(tmp_path / "a.f64")


def test_read_rejects_truncated_payload(tmp_path):
    write_array(tmp_path / "a.f64", np.zeros(4))
    raw = (tmp_path / "a.f64").read_bytes()
    (tmp_path / "a.f64").write_bytes(raw[:-8])
    with pytest.raises(DataFormatError, match="payload"):
        read_array(tmp_path / "a.f64")


def test_dataset_round_trip(tmp_path):
    b = generate_dataset(spec("trimodal-parity", n=20, seed=4))
    save_dataset(b, tmp_path / "ds")
    back = load_dataset(tmp_path / "ds")
    assert back.modality_names == b.modality_names
    for name in b.modality_names:
        assert np.array_equal(back.feature(name), b.feature(name))
    assert np.array_equal(back.labels, b.labels)
    assert np.array_equal(back.mask, b.mask)
    assert back.label_kind == "binary"


def test_save_is_bitwise_reproducible(tmp_path):
    b = generate_dataset(spec("bimodal-product", n=10, seed=9))
    save_dataset(b, tmp_path / "d1")
    save_dataset(b, tmp_path / "d2")
    for f in ("meta.json", "X_L.f64", "X_V.f64", "X_A.f64", "y.f64", "lengths.u32"):
        assert (tmp_path / "d1" / f).read_bytes() == (tmp_path / "d2" / f).read_bytes()


def test_load_names_missing_modality(tmp_path):
    b = generate_dataset(spec("unimodal-sum", n=5))
    d = save_dataset(b, tmp_path / "ds")
    (d / "X_V.f64").unlink()
    with pytest.raises(DataFormatError, match="modality 'V'"):
        load_dataset(d)


def test_load_names_dim_mismatch(tmp_path):
    b = generate_dataset(spec("unimodal-sum", n=5))
    d = save_dataset(b, tmp_path / "ds")
    meta = json.loads((d / "meta.json").read_text())
    meta["modalities"][1]["dim"] = 7
    (d / "meta.json").write_text(json.dumps(meta))
    with pytest.raises(DataFormatError, match="modality 'V'"):
        load_dataset(d)


def test_load_rejects_oversized_lengths(tmp_path):
    b = generate_dataset(spec("unimodal-sum", n=5, t=10))
    d = save_dataset(b, tmp_path / "ds")
    write_array(d / "lengths.u32", np.array([11, 5, 5, 5, 5], dtype=np.uint32))
    with pytest.raises(DataFormatError, match="lengths"):
        load_dataset(d)


def test_load_rejects_missing_meta(tmp_path):
    with pytest.raises(DataFormatError, match="meta.json"):
        load_dataset(tmp_path)
