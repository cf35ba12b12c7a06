import numpy as np
import pytest

from msnsim import energymodel as em
from msnsim.errors import InfeasibleAnchors, NonPositiveFrequency


@pytest.fixture(scope="module")
def params():
    return em.calibrate()


def test_hand_derived_constants(params):
    # 0.7 fJ at 1.2 V is 0.7e-15 / 1.2 A per Hz of clock
    assert params.analog_current_per_hz == pytest.approx(0.7e-15 / 1.2, rel=1e-15)
    assert em.crossover_hz(params) == pytest.approx(1e6)
    floor_w = 1.2 * params.analog_floor_current_a
    assert params.leak_per_transistor_w * 1980 == pytest.approx(1100 * floor_w, rel=1e-12)
    assert params.switch_energy_per_mac_j == pytest.approx(1.1 * 85 * 0.7e-15, rel=1e-12)


def test_power_and_energy_shapes(params):
    f = em.log_frequencies(1e3, 1e10, 10)
    ea = em.energy_per_mac(f, params, "analog")
    assert np.all(np.diff(ea) <= 1e-30)  # non-increasing
    assert np.all(ea[f >= 1e6] == pytest.approx(0.7e-15))
    pd = em.digital_power(f, params)
    assert np.all(np.diff(pd) > 0)
    # dynamic power dominates leakage at the top of the range
    dyn = pd[-1] - params.leak_per_transistor_w * 1980
    assert dyn > 10 * params.leak_per_transistor_w * 1980


def test_three_bit_scaling(params):
    assert em.digital_power(1e-3, params, bits=8) / em.digital_power(1e-3, params, bits=3) == \
        pytest.approx(1980 / 192, rel=1e-6)
    assert em.analog_power(1e8, params, bits=3) == pytest.approx(em.analog_power(1e8, params) * 3 / 8)
    with pytest.raises(ValueError):
        em.analog_power(1e3, params, bits=16)


def test_csv_schema_and_row_count(params):
    curve = em.power_curve(1e4, 1e5, 7, params)
    lines = curve.to_csv().splitlines()
    assert lines[0] == ",".join(em.CSV_COLUMNS)
    assert len(lines) == 1 + 8
    assert curve.column("bio_ref_fj").tolist() == [20.0] * 8
    assert curve.to_csv() == em.power_curve(1e4, 1e5, 7, params).to_csv()


def test_errors(params):
    with pytest.raises(NonPositiveFrequency):
        em.analog_power(0.0, params)
    with pytest.raises(NonPositiveFrequency):
        em.log_frequencies(10, 1, 3)
    with pytest.raises(InfeasibleAnchors):
        em.calibrate(em.EnergyAnchors(leak_per_transistor_w=0.0))
    with pytest.raises(InfeasibleAnchors):
        em.calibrate(em.EnergyAnchors(switch_energy_per_mac_j=1e-16))
    with pytest.raises(ValueError):
        em.energy_per_mac(1e3, params, "optical")
