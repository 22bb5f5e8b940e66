import dataclasses

import numpy as np
import pytest

from rnnblock.cells import CellKind
from rnnblock.model_io import (
    BadMagicError,
    RnnConfig,
    ShapeConsistencyError,
    TruncatedFileError,
    UnsupportedVersionError,
    count_params,
    generate_sequence,
    generate_weights,
    load_sequence,
    load_weights,
    preset_config,
    save_sequence,
    save_weights,
)

# independent SplitMix64 + uniform transform for recomputing generator output
_MASK = (1 << 64) - 1


def _sm64_next(state):
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def _uniform(raw):
    return ((raw >> 40) / 16777216.0) * 0.2 - 0.1


# ---------------------------------------------------------------------------
# configuration


def test_config_validation():
    with pytest.raises(ValueError):
        RnnConfig(CellKind.SRU, 4, 8)
    with pytest.raises(ValueError):
        RnnConfig(CellKind.LSTM, 0, 8)
    with pytest.raises(ValueError):
        RnnConfig(CellKind.LSTM, 4, 8, n_layers=0)
    with pytest.raises(ValueError):
        RnnConfig(CellKind.LSTM, 4, 8, precision="f16")
    cfg = RnnConfig(CellKind.LSTM, 4, 8, n_layers=2)
    assert cfg.layer_dims(0) == (4, 8)
    assert cfg.layer_dims(1) == (8, 8)


def test_presets():
    assert preset_config("lstm-small").d_h == 350
    assert preset_config("lstm-large").d_h == 700
    assert preset_config("sru-small").d_h == 512
    assert preset_config("sru-large").d_h == 1024
    assert preset_config("qrnn-small").kind is CellKind.QRNN
    assert preset_config("qrnn-large").d_h == 1024
    with pytest.raises(ValueError):
        preset_config("gru-small")


# ---------------------------------------------------------------------------
# parameter counting


def test_count_params_published_models():
    assert count_params(preset_config("lstm-small")) == 981_400
    assert count_params(preset_config("sru-small")) == 787_456
    assert count_params(preset_config("lstm-large")) == 3_922_800
    assert count_params(preset_config("sru-large")) == 3_147_776
    assert count_params(preset_config("qrnn-small")) == 6 * 512 * 512
    assert count_params(preset_config("qrnn-large")) == 6 * 1024 * 1024


def test_small_models_have_comparable_sizes():
    ratio = count_params(preset_config("lstm-small")) / count_params(preset_config("sru-small"))
    assert 0.8 <= ratio <= 1.3


def test_count_params_formulas():
    cfg = RnnConfig(CellKind.LSTM, 3, 5)
    assert count_params(cfg) == 4 * 5 * 3 + 4 * 25 + 4 * 5
    cfg = RnnConfig(CellKind.SRU, 7, 7)
    assert count_params(cfg) == 3 * 49 + 2 * 7
    cfg = RnnConfig(CellKind.QRNN, 3, 5, n_layers=2)
    assert count_params(cfg) == 6 * 5 * 3 + 6 * 5 * 5


# ---------------------------------------------------------------------------
# deterministic generation


def test_generate_weights_deterministic():
    cfg = RnnConfig(CellKind.LSTM, 6, 6, precision="f32")
    a = generate_weights(cfg, 42)
    b = generate_weights(cfg, 42)
    for la, lb in zip(a.layers, b.layers):
        for f in dataclasses.fields(la):
            assert getattr(la, f.name).tobytes() == getattr(lb, f.name).tobytes()


def test_generate_weights_seed_sensitivity():
    cfg = RnnConfig(CellKind.SRU, 8, 8)
    a = generate_weights(cfg, 1)
    b = generate_weights(cfg, 2)
    assert a.layers[0].w_cand[0, 0] != b.layers[0].w_cand[0, 0]


def test_generate_weights_first_element_from_prng_definition():
    cfg = RnnConfig(CellKind.SRU, 2, 2, precision="f64")
    ws = generate_weights(cfg, 1)
    _, raw = _sm64_next(1)
    assert ws.layers[0].w_cand[0, 0] == _uniform(raw)


def test_generate_weights_canonical_order():
    # SRU d=2: w_cand consumes raws 0..3 row-major, then w_forget,
    # w_highway, b_forget, b_highway
    cfg = RnnConfig(CellKind.SRU, 2, 2, precision="f64")
    ws = generate_weights(cfg, 7)
    state, vals = 7, []
    for _ in range(3 * 4 + 2 * 2):
        state, raw = _sm64_next(state)
        vals.append(_uniform(raw))
    w = ws.layers[0]
    flat = np.concatenate([w.w_cand.ravel(), w.w_forget.ravel(), w.w_highway.ravel(),
                           w.b_forget, w.b_highway])
    assert flat.tolist() == vals


def test_generate_weights_f32_is_cast_of_f64_values():
    cfg64 = RnnConfig(CellKind.QRNN, 3, 3, precision="f64")
    cfg32 = RnnConfig(CellKind.QRNN, 3, 3, precision="f32")
    w64 = generate_weights(cfg64, 5).layers[0].w_cand
    w32 = generate_weights(cfg32, 5).layers[0].w_cand
    assert (w32 == w64.astype(np.float32)).all()


def test_generate_sequence_shape_and_determinism():
    X = generate_sequence(1024, 512, 3)
    assert X.shape == (1024, 512)
    assert X.dtype == np.float32
    assert X.tobytes() == generate_sequence(1024, 512, 3).tobytes()
    _, raw = _sm64_next(3)
    assert X[0, 0] == np.float32(_uniform(raw))


def test_generate_sequence_validation():
    with pytest.raises(ValueError):
        generate_sequence(0, 4, 1)
    with pytest.raises(ValueError):
        generate_sequence(4, 4, 1, precision="f16")


# ---------------------------------------------------------------------------
# serialization


@pytest.mark.parametrize("kind,precision,layers", [
    (CellKind.LSTM, "f32", 1),
    (CellKind.SRU, "f64", 1),
    (CellKind.QRNN, "f32", 2),
])
def test_weight_round_trip_byte_identical(tmp_path, kind, precision, layers):
    cfg = RnnConfig(kind, 6, 6, n_layers=layers, precision=precision)
    ws = generate_weights(cfg, 11)
    p1 = tmp_path / "a.rnnw"
    p2 = tmp_path / "b.rnnw"
    save_weights(ws, p1)
    loaded = load_weights(p1)
    save_weights(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()
    for la, lb in zip(ws.layers, loaded.layers):
        for f in dataclasses.fields(la):
            assert getattr(la, f.name).tobytes() == getattr(lb, f.name).tobytes()


def test_weight_file_size_formula(tmp_path):
    ws = generate_weights(preset_config("sru-small"), 1)
    path = tmp_path / "w.rnnw"
    save_weights(ws, path)
    assert path.stat().st_size == 16 + 8 + 4 * 787_456


def test_weight_bad_magic(tmp_path):
    path = tmp_path / "w.rnnw"
    save_weights(generate_weights(RnnConfig(CellKind.SRU, 4, 4), 1), path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(BadMagicError):
        load_weights(path)


def test_weight_bad_version(tmp_path):
    path = tmp_path / "w.rnnw"
    save_weights(generate_weights(RnnConfig(CellKind.SRU, 4, 4), 1), path)
    raw = bytearray(path.read_bytes())
    raw[4] = 99
    path.write_bytes(bytes(raw))
    with pytest.raises(UnsupportedVersionError):
        load_weights(path)


def test_weight_truncation(tmp_path):
    path = tmp_path / "w.rnnw"
    save_weights(generate_weights(RnnConfig(CellKind.SRU, 4, 4), 1), path)
    data = path.read_bytes()
    path.write_bytes(data[:len(data) // 2])
    with pytest.raises(TruncatedFileError):
        load_weights(path)
    path.write_bytes(data[:10])  # inside the header
    with pytest.raises(TruncatedFileError):
        load_weights(path)


def test_weight_lying_header_does_not_allocate(tmp_path):
    # header advertises a gigantic layer over a tiny payload
    path = tmp_path / "w.rnnw"
    save_weights(generate_weights(RnnConfig(CellKind.SRU, 4, 4), 1), path)
    raw = bytearray(path.read_bytes())
    raw[16:24] = (2**31 - 1).to_bytes(4, "little") * 2
    path.write_bytes(bytes(raw))
    with pytest.raises((TruncatedFileError, ShapeConsistencyError)):
        load_weights(path)


def test_weight_trailing_garbage(tmp_path):
    path = tmp_path / "w.rnnw"
    save_weights(generate_weights(RnnConfig(CellKind.SRU, 4, 4), 1), path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(ShapeConsistencyError):
        load_weights(path)


def test_weight_bad_kind_code(tmp_path):
    path = tmp_path / "w.rnnw"
    save_weights(generate_weights(RnnConfig(CellKind.SRU, 4, 4), 1), path)
    raw = bytearray(path.read_bytes())
    raw[8] = 7
    path.write_bytes(bytes(raw))
    with pytest.raises(ShapeConsistencyError):
        load_weights(path)


@pytest.mark.parametrize("precision", ["f32", "f64"])
def test_sequence_round_trip(tmp_path, precision):
    X = generate_sequence(17, 5, 9, precision)
    path = tmp_path / "x.rnnx"
    save_sequence(X, path)
    Y = load_sequence(path)
    assert Y.dtype == X.dtype
    assert X.tobytes() == Y.tobytes()
    p2 = tmp_path / "y.rnnx"
    save_sequence(Y, p2)
    assert path.read_bytes() == p2.read_bytes()


def test_sequence_errors(tmp_path):
    path = tmp_path / "x.rnnx"
    save_sequence(generate_sequence(4, 4, 1), path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(BadMagicError):
        load_sequence(path)
    save_sequence(generate_sequence(4, 4, 1), path)
    data = path.read_bytes()
    path.write_bytes(data[:-3])
    with pytest.raises(TruncatedFileError):
        load_sequence(path)
