"""Input-referred thermal + flicker noise of the mixed-signal neuron.

The operating point (branch bias current, temperature, band edges) is
mapped to an integrated noise power in V**2 and then to a standard deviation
in the normalised weight domain.

Calibration note: the default band 1 Hz - 117 kHz is not a measured value.
It is the band that makes a 100 pA branch current integrate to 1e-6 V**2,
reading the "~1 uV^2" figure as 1e-6 V**2 (see ``POWER_UNIT_READING``).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import NegativePower, NonPositiveFrequency, NonPositiveInput

BOLTZMANN = 1.380649e-23  # J/K
ELEMENTARY_CHARGE = 1.602176634e-19  # C

# "~1 uV^2" read as 1e-6 V^2.  The alternative reading (1 uV)^2 = 1e-12 V^2
# needs a ~0.1 Hz band at 100 pA.
POWER_UNIT_READING = 1e-6
CALIBRATION_CURRENT_A = 100e-12


@dataclass(frozen=True)
class CircuitParams:
    bias_current: float = CALIBRATION_CURRENT_A
    temperature: float = 300.0
    subthreshold_slope_n: float = 1.5
    thermal_gamma: float = 2.0 / 3.0
    device_pair_count: int = 2
    flicker_corner_hz: float = 0.0
    band_lo_hz: float = 1.0
    band_hi_hz: float = 117e3
    full_scale_v: float = 0.1

    def __post_init__(self):
        if not self.bias_current > 0:
            raise NonPositiveInput(f"bias_current must be > 0, got {self.bias_current}")
        if not self.temperature > 0:
            raise NonPositiveInput(f"temperature must be > 0, got {self.temperature}")
        if not self.subthreshold_slope_n > 0:
            raise NonPositiveInput("subthreshold_slope_n must be > 0")
        if self.thermal_gamma < 0 or self.device_pair_count < 0:
            raise NonPositiveInput("thermal_gamma and device_pair_count must be >= 0")
        if not 0 < self.band_lo_hz < self.band_hi_hz:
            raise NonPositiveFrequency(
                f"need 0 < band_lo_hz < band_hi_hz, got {self.band_lo_hz}, {self.band_hi_hz}"
            )
        if not self.full_scale_v > 0:
            raise NonPositiveInput("full_scale_v must be > 0")
        if self.flicker_corner_hz < 0:
            raise NonPositiveFrequency("flicker_corner_hz must be >= 0")

    @property
    def bandwidth_hz(self) -> float:
        return self.band_hi_hz - self.band_lo_hz

    def with_(self, **kw) -> "CircuitParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class NoiseSpec:
    integrated_power_v2: float
    weight_sigma: float

    def __post_init__(self):
        if self.integrated_power_v2 < 0 or self.weight_sigma < 0:
            raise NegativePower("noise power and sigma must be >= 0")

    @classmethod
    def from_power(cls, power_v2: float, full_scale_v: float) -> "NoiseSpec":
        return cls(float(power_v2), weight_sigma_from_power(power_v2, full_scale_v))

    @classmethod
    def silent(cls) -> "NoiseSpec":
        return cls(0.0, 0.0)


def thermal_voltage(temperature: float) -> float:
    return BOLTZMANN * temperature / ELEMENTARY_CHARGE


def gm_subthreshold(bias_current: float, n: float, temperature: float) -> float:
    """Weak-inversion transconductance ``I / (n kT/q)``."""
    if not (bias_current > 0 and n > 0 and temperature > 0):
        raise NonPositiveInput("bias current, slope factor and temperature must be > 0")
    return bias_current / (n * thermal_voltage(temperature))


def thermal_psd(gm: float, temperature: float, gamma: float, pair_count: int) -> float:
    """White input-referred PSD in V^2/Hz: ``pairs * 4 k T gamma / gm``."""
    if not (gm > 0 and temperature > 0):
        raise NonPositiveInput("gm and temperature must be > 0")
    if gamma < 0 or pair_count < 0:
        raise NonPositiveInput("gamma and pair_count must be >= 0")
    return pair_count * 4.0 * BOLTZMANN * temperature * gamma / gm


def flicker_psd(f, thermal_psd_level: float, flicker_corner_hz: float):
    """1/f PSD that equals the thermal floor at the corner frequency."""
    f_arr = np.asarray(f, dtype=np.float64)
    if np.any(f_arr <= 0):
        raise NonPositiveFrequency("flicker PSD needs f > 0")
    out = thermal_psd_level * flicker_corner_hz / f_arr
    return float(out) if np.ndim(out) == 0 else out


def weight_sigma_from_power(power_v2: float, full_scale_v: float) -> float:
    if power_v2 < 0:
        raise NegativePower(f"noise power must be >= 0, got {power_v2}")
    if not full_scale_v > 0:
        raise NonPositiveInput("full_scale_v must be > 0")
    return math.sqrt(power_v2) / full_scale_v


def _thermal_level(p: CircuitParams) -> float:
    gm = gm_subthreshold(p.bias_current, p.subthreshold_slope_n, p.temperature)
    return thermal_psd(gm, p.temperature, p.thermal_gamma, p.device_pair_count)


def rectangular_terms(p: CircuitParams) -> tuple[float, float]:
    """(thermal, flicker) band powers under the one-point rectangle rule.

    The flicker PSD is sampled at the geometric-mean frequency of the band.
    """
    level = _thermal_level(p)
    bw = p.bandwidth_hz
    f_geo = math.sqrt(p.band_lo_hz * p.band_hi_hz)
    return level * bw, flicker_psd(f_geo, level, p.flicker_corner_hz) * bw


def integrate_rectangular(p: CircuitParams) -> NoiseSpec:
    thermal, flicker = rectangular_terms(p)
    return NoiseSpec.from_power(thermal + flicker, p.full_scale_v)


def flicker_closed_form(p: CircuitParams) -> float:
    """Exact band integral of the 1/f term: ``S_th * f_c * ln(hi/lo)``."""
    return _thermal_level(p) * p.flicker_corner_hz * math.log(p.band_hi_hz / p.band_lo_hz)


def integrate_exact(p: CircuitParams, grid_points: int = 10_000) -> float:
    """Trapezoidal integral of the total PSD on a log-spaced frequency grid."""
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    level = _thermal_level(p)
    f = np.geomspace(p.band_lo_hz, p.band_hi_hz, grid_points)
    f[0], f[-1] = p.band_lo_hz, p.band_hi_hz
    df = np.diff(f)
    thermal = level * math.fsum(df)
    if p.flicker_corner_hz == 0:
        return thermal
    s = flicker_psd(f, level, p.flicker_corner_hz)
    return thermal + math.fsum(0.5 * (s[1:] + s[:-1]) * df)


def noise_for_current_sweep(currents, params: CircuitParams) -> list[NoiseSpec]:
    return [integrate_rectangular(params.with_(bias_current=float(i))) for i in currents]


def calibration_noise(params: CircuitParams | None = None) -> NoiseSpec:
    return integrate_rectangular(params or CircuitParams())
