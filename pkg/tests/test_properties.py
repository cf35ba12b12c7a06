import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from msnsim import energymodel as em
from msnsim.noisemodel import CircuitParams, integrate_rectangular
from msnsim.quantizer import dequantize, quantization_error_sup, quantize
from msnsim import rng

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_subnormal=False)


@given(arrays(np.float64, st.integers(1, 50), elements=finite), st.sampled_from([2, 3, 4, 8, 16]))
def test_quantizer_is_odd_bounded_and_idempotent(w, bits):
    q = quantize(w, bits)
    assert np.array_equal(quantize(-w, bits, q.spec.scale).codes, -q.codes)
    deq = dequantize(q)
    assert np.all(np.abs(deq - w) <= quantization_error_sup(bits, q.spec.scale) * (1 + 1e-9) + 1e-300)
    assert np.array_equal(quantize(deq, bits, q.spec.scale).codes, q.codes)


@given(st.floats(1e-13, 1e-6), st.floats(1.0, 1e4))
def test_noise_power_monotone_in_current(current, factor):
    lo = integrate_rectangular(CircuitParams(bias_current=current)).integrated_power_v2
    hi = integrate_rectangular(CircuitParams(bias_current=current * (1 + factor))).integrated_power_v2
    assert hi < lo


@given(st.floats(1e2, 1e11), st.sampled_from([3, 8]))
def test_energy_positive_and_digital_dearer(f, bits):
    p = em.calibrate()
    assert em.digital_power(f, p, bits) > em.analog_power(f, p, bits) > 0


@settings(max_examples=30)
@given(st.integers(0, 2**64 - 1), st.integers(0, 1000), st.integers(0, 200), st.integers(1, 40))
def test_normal_prefix_property(seed, stream, start, count):
    whole = rng.normal_block(seed, stream, [0], 0, start + count)[0]
    part = rng.normal_block(seed, stream, [0], 0, count, start=start)[0]
    assert np.array_equal(whole[start:], part)
