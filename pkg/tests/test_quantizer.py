import numpy as np
import pytest

from msnsim.errors import FormatError, NonFiniteWeight
from msnsim.quantizer import (
    QuantizedWeights,
    QuantSpec,
    dequantize,
    load_quantized,
    max_code,
    quantization_error_sup,
    quantize,
    save_quantized,
)


def test_levels_and_endpoints():
    assert [max_code(b) for b in (2, 3, 8, 16)] == [1, 3, 127, 32767]
    q = quantize([-1.0, 0.0, 1.0], 8)
    assert q.codes.tolist() == [-127, 0, 127]
    assert dequantize(q).tolist() == [-1.0, 0.0, 1.0]


def test_ties_round_away_from_zero():
    # 3 bits, scale 1.5: step 0.5, so 0.25 sits halfway between 0 and 1
    q = quantize([0.25, -0.25, 0.75, -0.75], 3, scale=1.5)
    assert q.codes.tolist() == [1, -1, 2, -2]


def test_clipping_and_zero_tensor():
    q = quantize([3.0, -3.0], 4, scale=1.0)
    assert q.codes.tolist() == [7, -7]
    z = quantize(np.zeros(5), 8)
    assert z.spec.scale == 1.0 and not z.codes.any()


def test_error_bound():
    w = np.random.default_rng(3).normal(size=5000)
    for bits in (3, 8, 16):
        q = quantize(w, bits)
        err = np.abs(dequantize(q) - w).max()
        assert err <= quantization_error_sup(bits, q.spec.scale) * (1 + 1e-12)


def test_validation():
    with pytest.raises(NonFiniteWeight):
        quantize([np.nan], 8)
    with pytest.raises(ValueError):
        QuantSpec(1, 1.0)
    with pytest.raises(ValueError):
        QuantSpec(8, 0.0)
    with pytest.raises(ValueError):
        QuantizedWeights(np.array([128]), QuantSpec(8, 1.0))


def test_container_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    layers = {"a": quantize(rng.normal(size=(3, 4)), 3), "b": quantize(rng.normal(size=7), 16)}
    save_quantized(tmp_path / "q.npz", layers)
    back = load_quantized(tmp_path / "q.npz")
    assert list(back) == ["a", "b"]
    for k in layers:
        assert back[k].spec == layers[k].spec
        assert np.array_equal(back[k].codes, layers[k].codes)
        assert np.array_equal(dequantize(back[k]), dequantize(layers[k]))
    np.savez(tmp_path / "other.npz", x=np.zeros(1))
    with pytest.raises(FormatError):
        load_quantized(tmp_path / "other.npz")
