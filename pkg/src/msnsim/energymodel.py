"""Analog vs digital MAC power and energy versus operating frequency.

Digital MAC:  P_d(f) = leak_per_transistor * N_transistors(bits) + E_switch(bits) * f
Analog MAC:   P_a(f) = vdd * max(I_floor, I_per_hz * f) * branch_fraction(bits)

The analog branch current has to grow with bandwidth (gm tracks f for a fixed
load capacitance) but never drops below a minimum bias.  A 3-bit analog MAC
uses 3/8 of the 8-bit branches; digital switching energy scales with the
transistor count.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import InfeasibleAnchors, NonPositiveFrequency

TRANSISTORS = {8: 1980, 3: 192}
BIO_REFERENCE_FJ = 20.0
CSV_COLUMNS = ("freq_hz", "analog_power_w", "digital_power_w", "analog_fj_per_mac",
               "digital_fj_per_mac", "ratio", "bio_ref_fj")


@dataclass(frozen=True)
class EnergyParams:
    leak_per_transistor_w: float
    switch_energy_per_mac_j: float  # 8-bit MAC
    analog_current_per_hz: float
    analog_floor_current_a: float
    vdd: float = 1.2
    transistor_count_8b: int = 1980
    transistor_count_3b: int = 192

    def __post_init__(self):
        for name in ("vdd", "leak_per_transistor_w", "switch_energy_per_mac_j", "analog_current_per_hz"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.analog_floor_current_a < 0:
            raise ValueError("analog_floor_current_a must be >= 0")
        if self.transistor_count_8b <= 0 or self.transistor_count_3b <= 0:
            raise ValueError("transistor counts must be positive")

    def transistor_count(self, bits: int) -> int:
        if bits == 8:
            return self.transistor_count_8b
        if bits == 3:
            return self.transistor_count_3b
        raise ValueError(f"energy model covers 3- and 8-bit MACs, got {bits}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EnergyAnchors:
    """Targets the calibrated parameters must meet (8-bit MAC)."""

    analog_fj_per_mac: float = 0.7
    linear_from_hz: float = 1e6
    low_freq_power_ratio: float = 1000.0
    min_energy_ratio: float = 85.0
    headroom: float = 1.1
    vdd: float = 1.2
    transistor_count_8b: int = 1980
    transistor_count_3b: int = 192
    # pin a value instead of solving for it
    leak_per_transistor_w: float | None = None
    switch_energy_per_mac_j: float | None = None


def _check_f(f) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if np.any(~(f > 0)):
        raise NonPositiveFrequency("frequency must be > 0")
    return f


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _branch_fraction(bits: int) -> float:
    if bits not in TRANSISTORS:
        raise ValueError(f"energy model covers 3- and 8-bit MACs, got {bits}")
    return bits / 8.0


def analog_power(f, p: EnergyParams, bits: int = 8):
    f = _check_f(f)
    current = np.maximum(p.analog_floor_current_a, p.analog_current_per_hz * f)
    return _out(p.vdd * current * _branch_fraction(bits))


def digital_power(f, p: EnergyParams, bits: int = 8):
    f = _check_f(f)
    count = p.transistor_count(bits)
    e_sw = p.switch_energy_per_mac_j * count / p.transistor_count_8b
    return _out(p.leak_per_transistor_w * count + e_sw * f)


def energy_per_mac(f, p: EnergyParams, domain: str, bits: int = 8):
    f = _check_f(f)
    if domain == "analog":
        return _out(analog_power(f, p, bits) / f)
    if domain == "digital":
        return _out(digital_power(f, p, bits) / f)
    raise ValueError(f"domain must be 'analog' or 'digital', got {domain!r}")


def crossover_hz(p: EnergyParams) -> float:
    """Frequency where the analog current leaves its floor."""
    return p.analog_floor_current_a / p.analog_current_per_hz


def check_anchors(p: EnergyParams, a: EnergyAnchors, f_lo: float = 1e3, f_hi: float = 1e10,
                  points_per_decade: int = 20) -> dict:
    """Evaluate each anchor on a log sweep; returns name -> (value, ok)."""
    f = log_frequencies(f_lo, f_hi, points_per_decade)
    ea = energy_per_mac(f, p, "analog")
    ed = energy_per_mac(f, p, "digital")
    pa = analog_power(f, p)
    pd = digital_power(f, p)
    low = f < a.linear_from_hz
    lin = f >= crossover_hz(p)
    target = a.analog_fj_per_mac * 1e-15
    lin_err = float(np.max(np.abs(ea[lin] / target - 1.0))) if lin.any() else math.inf
    low_ratio = float(np.min(pd[low] / pa[low])) if low.any() else math.inf
    min_ratio = float(np.min(ed / ea))
    return {
        "analog_energy_linear_rel_err": (lin_err, lin_err <= 1e-9),
        "min_power_ratio_below_linear_from": (low_ratio, low_ratio >= a.low_freq_power_ratio),
        "min_energy_ratio": (min_ratio, min_ratio >= a.min_energy_ratio),
    }


def calibrate(anchors: EnergyAnchors = EnergyAnchors()) -> EnergyParams:
    """Solve the four model constants from the anchors.

    * analog current per Hz: ``vdd * I_per_hz = E_analog`` in the linear region;
    * analog floor: the linear region starts at ``linear_from_hz``;
    * leakage: low-frequency power ratio ``headroom * low_freq_power_ratio``;
    * switching energy: high-frequency energy ratio ``headroom * min_energy_ratio``.

    Pinned values are kept; if the anchors then cannot all hold,
    :class:`InfeasibleAnchors` is raised.
    """
    if anchors.analog_fj_per_mac <= 0 or anchors.linear_from_hz <= 0 or anchors.vdd <= 0:
        raise InfeasibleAnchors("analog energy, linear_from_hz and vdd must be positive")
    e_a = anchors.analog_fj_per_mac * 1e-15
    i_per_hz = e_a / anchors.vdd
    i_floor = i_per_hz * anchors.linear_from_hz
    p_floor = anchors.vdd * i_floor
    leak = anchors.leak_per_transistor_w
    if leak is None:
        leak = anchors.headroom * anchors.low_freq_power_ratio * p_floor / anchors.transistor_count_8b
    e_sw = anchors.switch_energy_per_mac_j
    if e_sw is None:
        e_sw = anchors.headroom * anchors.min_energy_ratio * e_a
    if leak <= 0 and anchors.low_freq_power_ratio > 0:
        raise InfeasibleAnchors("a positive low-frequency power ratio needs leakage > 0")
    if e_sw <= 0:
        raise InfeasibleAnchors("switching energy must be > 0")
    params = EnergyParams(leak, e_sw, i_per_hz, i_floor, anchors.vdd,
                          anchors.transistor_count_8b, anchors.transistor_count_3b)
    failed = {k: v for k, (v, ok) in check_anchors(params, anchors).items() if not ok}
    if failed:
        raise InfeasibleAnchors(f"anchors not met by the model form: {failed}")
    return params


def log_frequencies(f_lo: float, f_hi: float, points_per_decade: int) -> np.ndarray:
    """Log grid from ``f_lo`` to ``f_hi`` with ``points_per_decade`` steps per decade."""
    if not (0 < f_lo <= f_hi):
        raise NonPositiveFrequency("need 0 < f_lo <= f_hi")
    if points_per_decade < 1:
        raise ValueError("points_per_decade must be >= 1")
    if f_lo == f_hi:
        return np.array([float(f_lo)])
    decades = math.log10(f_hi / f_lo)
    n = int(round(decades * points_per_decade))
    return np.geomspace(f_lo, f_hi, max(n, 1) + 1)


@dataclass
class PowerCurve:
    bits: int
    rows: list  # tuples ordered as CSV_COLUMNS

    def column(self, name: str) -> np.ndarray:
        i = CSV_COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([format(v, ".17g") for v in r])
        return buf.getvalue()


def power_curve(f_lo: float, f_hi: float, points_per_decade: int,
                p: EnergyParams | None = None, bits: int = 8) -> PowerCurve:
    p = p or calibrate()
    f = log_frequencies(f_lo, f_hi, points_per_decade)
    pa = np.atleast_1d(analog_power(f, p, bits))
    pd = np.atleast_1d(digital_power(f, p, bits))
    ea = pa / f * 1e15
    ed = pd / f * 1e15
    rows = [(float(f[i]), float(pa[i]), float(pd[i]), float(ea[i]), float(ed[i]),
             float(ed[i] / ea[i]), BIO_REFERENCE_FJ) for i in range(f.size)]
    return PowerCurve(bits, rows)


def with_params(p: EnergyParams, **kw) -> EnergyParams:
    return replace(p, **kw)
