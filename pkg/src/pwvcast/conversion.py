"""Conversion of GPS zenith wet delay (ZWD) to precipitable water vapor (PWV).

PWV is obtained by scaling the wet delay with a dimensionless factor that
depends on the station site (latitude, height) and on the season (day of
year):

    PWV = PI * ZWD

    PI = [-sgn(lat) * 1.7e-5 * |lat|^h_fac - 1e-4] * cos(2*pi*(doy - 28)/365.25)
         + 0.165 - 1.7e-5 * |lat|^1.65 - 2.38e-6 * H

with ``lat`` in degrees, ``H`` the station height in meters, and ``h_fac``
a hemisphere-dependent exponent.  Both ZWD and PWV are carried in
millimeters.  All arithmetic is 64-bit floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import DomainError

HFAC_NORTH = 1.48      # latitude exponent, northern hemisphere
HFAC_SOUTH = 1.25      # latitude exponent, southern hemisphere
HEIGHT_COEFF = -2.38e-6  # height correction per meter of station height
SEASONAL_PERIOD_DAYS = 365.25
SEASONAL_PHASE_DOY = 28.0  # day of year at which the cosine term peaks

MIN_STATION_HEIGHT_M = -500.0


@dataclass(frozen=True)
class StationMeta:
    """GPS station description used to derive the conversion factor.

    latitude_deg must lie in [-90, 90]; height_m is meters above the
    reference ellipsoid and must be >= -500.
    """

    latitude_deg: float
    height_m: float
    station_id: str = ""

    def __post_init__(self):
        lat = self.latitude_deg
        if not math.isfinite(lat) or not -90.0 <= lat <= 90.0:
            raise DomainError(f"latitude {lat!r} outside [-90, 90] degrees")
        if not math.isfinite(self.height_m) or self.height_m < MIN_STATION_HEIGHT_M:
            raise DomainError(f"station height {self.height_m!r} below {MIN_STATION_HEIGHT_M} m")

    @property
    def h_fac(self) -> float:
        # At the equator the h_fac-dependent term vanishes, so the northern
        # constant is used there for determinism.
        return HFAC_SOUTH if self.latitude_deg < 0 else HFAC_NORTH

    @property
    def height_term(self) -> float:
        return HEIGHT_COEFF * self.height_m


@dataclass(frozen=True)
class PiFactor:
    """Dimensionless ZWD-to-PWV factor evaluated at one day of year."""

    value: float
    day_of_year: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError(f"non-finite conversion factor {self.value!r}")


def _pi_value(latitude_deg: float, h_fac: float, height_term: float,
              day_of_year: float) -> float:
    """Evaluate the conversion factor without argument-range checks.

    Kept separate so tests can probe the formula outside the public
    day-of-year domain (e.g. for periodicity checks).
    """
    lat = float(latitude_deg)
    sgn = math.copysign(1.0, lat) if lat != 0.0 else 0.0
    seasonal_amp = -sgn * 1.7e-5 * abs(lat) ** h_fac - 1e-4
    angle = 2.0 * math.pi * (day_of_year - SEASONAL_PHASE_DOY) / SEASONAL_PERIOD_DAYS
    return (seasonal_amp * math.cos(angle)
            + 0.165
            - 1.7e-5 * abs(lat) ** 1.65
            + height_term)


def pi_factor(station: StationMeta, day_of_year: float) -> PiFactor:
    """Conversion factor for ``station`` on the given (possibly fractional)
    day of year in [1, 367).
    """
    doy = float(day_of_year)
    if not math.isfinite(doy) or not 1.0 <= doy < 367.0:
        raise DomainError(f"day of year {day_of_year!r} outside [1, 367)")
    value = _pi_value(station.latitude_deg, station.h_fac, station.height_term, doy)
    return PiFactor(value=value, day_of_year=doy)


def zwd_to_pwv(zwd_mm: float, pi: PiFactor) -> float:
    """Convert a single wet-delay reading (mm) to water vapor (mm)."""
    zwd = float(zwd_mm)
    if not math.isfinite(zwd) or zwd < 0.0:
        raise DomainError(f"wet delay {zwd_mm!r} must be finite and non-negative")
    return pi.value * zwd


def day_of_year_utc(epoch_s: int) -> int:
    """1-based day of year of a Unix timestamp, proleptic Gregorian UTC."""
    return datetime.fromtimestamp(epoch_s, tz=timezone.utc).timetuple().tm_yday


def convert_series(series, station: StationMeta):
    """Convert a ZWD series to PWV, sample by sample.

    Timestamps and the missing-sample mask are preserved.  Each present
    sample is scaled with the factor of its own UTC day of year, so the
    factor changes at midnight.  A sample that violates the wet-delay
    domain raises ``DomainError`` naming its timestamp.
    """
    from .series import TimeSeries  # local import to avoid a module cycle

    out = np.array(series.values, dtype=np.float64, copy=True)
    by_doy: dict[int, PiFactor] = {}
    for idx in np.flatnonzero(series.present):
        epoch = series.epoch_at(int(idx))
        doy = day_of_year_utc(epoch)
        pi = by_doy.get(doy)
        if pi is None:
            pi = pi_factor(station, float(doy))
            by_doy[doy] = pi
        try:
            out[idx] = zwd_to_pwv(float(series.values[idx]), pi)
        except DomainError as exc:
            stamp = datetime.fromtimestamp(epoch, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
            raise DomainError(f"sample at {stamp}: {exc}") from exc
    return TimeSeries(start_epoch_s=series.start_epoch_s, values=out,
                      cadence_s=series.cadence_s)
