"""Derived ambient features: dew point, time of wetness, indoor pollution.

Indoor pollutant concentrations follow a single well-mixed zone mass
balance: infiltration at the air exchange rate ``n`` against surface
deposition ``v_d * A / V``.  Each grid step is integrated with the exact
exponential update for a piecewise-constant outdoor concentration, so the
integrator is analytic rather than an Euler scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .pipeline import UniformSeries, require_same_grid

MAGNUS_A = 17.625
MAGNUS_B = 243.04  # degC

TOW_HUMIDITY_THRESHOLD = 80.0  # %, strict
TOW_TEMPERATURE_THRESHOLD = 0.0  # degC, strict


class FeatureError(Exception):
    pass


class OutOfRange(FeatureError):
    """Psychrometric input outside the Magnus validity band."""


class BadParams(FeatureError):
    """Infiltration parameters violate their invariants."""


def dew_point(temperature, relative_humidity):
    """Magnus-approximation dew point in degC.

    Valid for T in [-45, 60] degC and RH in (0, 100]; saturation maps to the
    air temperature itself.
    """
    if not 0.0 < relative_humidity <= 100.0:
        raise OutOfRange(f"relative humidity {relative_humidity} outside (0, 100]")
    if not -45.0 <= temperature <= 60.0:
        raise OutOfRange(f"temperature {temperature} outside [-45, 60] degC")
    gamma = math.log(relative_humidity / 100.0) + (
        MAGNUS_A * temperature / (MAGNUS_B + temperature)
    )
    dp = MAGNUS_B * gamma / (MAGNUS_A - gamma)
    return min(dp, temperature)


def relative_humidity(temperature, dew_point_c):
    """Inverse of :func:`dew_point`: RH in (0, 100] from T and DP."""
    if not -45.0 <= temperature <= 60.0:
        raise OutOfRange(f"temperature {temperature} outside [-45, 60] degC")
    if dew_point_c >= temperature:
        return 100.0
    gamma_dp = MAGNUS_A * dew_point_c / (MAGNUS_B + dew_point_c)
    gamma_t = MAGNUS_A * temperature / (MAGNUS_B + temperature)
    return min(100.0, 100.0 * math.exp(gamma_dp - gamma_t))


def time_of_wetness(temperature, humidity):
    """Hours on the shared grid with RH > 80 % and T > 0 degC (both strict).

    Missing grid points contribute nothing.
    """
    require_same_grid(temperature, humidity)
    count = 0
    for t, rh in zip(temperature.values, humidity.values):
        if t is None or rh is None:
            continue
        if rh > TOW_HUMIDITY_THRESHOLD and t > TOW_TEMPERATURE_THRESHOLD:
            count += 1
    return count * temperature.step_hours


def freeze_thaw_events(temperature):
    """Count upward crossings of 0 degC: T[i-1] <= 0 and T[i] > 0."""
    count = 0
    values = temperature.values if isinstance(temperature, UniformSeries) else temperature
    for prev, cur in zip(values, values[1:]):
        if prev is None or cur is None:
            continue
        if prev <= 0.0 and cur > 0.0:
            count += 1
    return count


@dataclass(frozen=True)
class InfiltrationParams:
    """Well-mixed zone parameters for one pollutant species.

    ``deposition_velocity`` is the effective (area-weighted) velocity over
    the envelope; the per-(species, material) table lives in the service
    configuration and is resolved via :func:`effective_deposition_velocity`.
    """

    air_exchange_rate: object  # 1/h: scalar, or sequence aligned to the grid
    deposition_velocity: float  # m/h
    surface_area: float  # m2
    volume: float  # m3

    def validate(self):
        rates = self.air_exchange_rate
        if isinstance(rates, (int, float)):
            rates = (rates,)
        for n in rates:
            if n is None or not math.isfinite(n) or n < 0:
                raise BadParams(f"air exchange rate {n!r} must be finite and >= 0")
        if not math.isfinite(self.deposition_velocity) or self.deposition_velocity < 0:
            raise BadParams("deposition velocity must be finite and >= 0")
        if not math.isfinite(self.surface_area) or self.surface_area < 0:
            raise BadParams("surface area must be finite and >= 0")
        if not math.isfinite(self.volume) or self.volume <= 0:
            raise BadParams("volume must be positive")

    @property
    def sink_rate(self):
        """Deposition loss rate v_d * A / V in 1/h."""
        return self.deposition_velocity * self.surface_area / self.volume


def effective_deposition_velocity(profile, velocity_table, species):
    """Area-weighted deposition velocity (m/h) over walls, roof, and floor.

    ``velocity_table`` maps species -> material -> m/h; absent entries mean
    no deposition for that pairing.
    """
    by_material = velocity_table.get(species, {})
    surfaces = (
        (profile.walls_material, profile.walls_area),
        (profile.roof_material, profile.roof_area),
        (profile.floor_material, profile.floor_area),
    )
    total_area = sum(area for _, area in surfaces)
    weighted = sum(by_material.get(material, 0.0) * area for material, area in surfaces)
    return weighted / total_area if total_area > 0 else 0.0


def _exchange_rates(params, count):
    n = params.air_exchange_rate
    if isinstance(n, (int, float)):
        return [float(n)] * count
    rates = list(n)
    if len(rates) != count:
        raise BadParams(
            f"air exchange series length {len(rates)} does not match grid length {count}"
        )
    return rates


def indoor_concentration(outdoor, params, initial):
    """Integrate the indoor mass balance over the outdoor series' grid.

    dC_in/dt = n (C_out - C_in) - (v_d A / V) C_in, advanced per step with
    the exact update C(t+dt) = C_ss + (C(t) - C_ss) exp(-lambda dt) where
    lambda = n + v_d A / V and C_ss = n C_out / lambda, holding C_out
    constant within each step.  Missing outdoor points are carried forward;
    the first point must be present.  Output is clamped at >= 0.
    """
    params.validate()
    if not math.isfinite(initial) or initial < 0:
        raise BadParams(f"initial concentration {initial!r} must be finite and >= 0")
    values = outdoor.values
    if values[0] is None:
        raise BadParams("outdoor series starts with a missing value")
    rates = _exchange_rates(params, len(values))
    sink = params.sink_rate
    dt = outdoor.step_hours
    out = [max(0.0, float(initial))]
    held = values[0]
    for i in range(1, len(values)):
        if values[i - 1] is not None:
            held = values[i - 1]
        n = rates[i - 1]
        lam = n + sink
        prev = out[-1]
        if lam <= 0.0:
            out.append(prev)  # no exchange, no sinks: pure hold
            continue
        steady = n * held / lam
        nxt = steady + (prev - steady) * math.exp(-lam * dt)
        out.append(max(0.0, nxt))
    return UniformSeries(start=outdoor.start, step=outdoor.step, values=tuple(out))


def indoor_band(outdoor, params, n_min, n_max, initial):
    """Indoor concentration envelope for the min..max air exchange rate.

    Returns ``(low, high)`` as the pointwise min and max of the two runs.
    """
    if not (math.isfinite(n_min) and math.isfinite(n_max)) or n_min < 0 or n_min > n_max:
        raise BadParams(f"need 0 <= n_min <= n_max, got {n_min!r}, {n_max!r}")
    at_min = indoor_concentration(outdoor, replace(params, air_exchange_rate=n_min), initial)
    at_max = indoor_concentration(outdoor, replace(params, air_exchange_rate=n_max), initial)
    low = tuple(min(a, b) for a, b in zip(at_min.values, at_max.values))
    high = tuple(max(a, b) for a, b in zip(at_min.values, at_max.values))
    return (
        UniformSeries(start=outdoor.start, step=outdoor.step, values=low),
        UniformSeries(start=outdoor.start, step=outdoor.step, values=high),
    )


@dataclass(frozen=True)
class FeatureSummary:
    """Derived quantities for one evaluated period."""

    time_of_wetness: float  # hours within the period
    period_hours: float
    indoor_pollutants: dict  # species -> UniformSeries
    indoor_pollutant_band: dict  # species -> (low, high)
    freeze_thaw_events: int

    def validate(self):
        if self.time_of_wetness < 0 or self.time_of_wetness > self.period_hours + 1e-9:
            raise FeatureError("time of wetness outside the evaluated period")
        if self.freeze_thaw_events < 0:
            raise FeatureError("negative freeze-thaw count")
        for species, (low, high) in self.indoor_pollutant_band.items():
            for lo, hi in zip(low.values, high.values):
                if lo is None or hi is None:
                    continue
                if lo < -1e-12 or lo > hi + 1e-12:
                    raise FeatureError(f"band ordering violated for {species}")
