"""Hourly weather, solar geometry and sol-air temperatures."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GROUND_ALBEDO = 0.2
HEADER = ("time", "Te", "Igh", "Idh")


class WeatherError(ValueError):
    pass


@dataclass(frozen=True)
class WeatherRecord:
    time: np.datetime64
    T_e: float
    I_gh: float
    I_dh: float


@dataclass(frozen=True)
class WeatherSeries:
    """Column-oriented hourly weather; ``time`` is UTC ``datetime64[h]``."""

    time: np.ndarray
    T_e: np.ndarray
    I_gh: np.ndarray
    I_dh: np.ndarray

    def __len__(self):
        return len(self.time)

    def __getitem__(self, i) -> WeatherRecord:
        return WeatherRecord(self.time[i], float(self.T_e[i]), float(self.I_gh[i]), float(self.I_dh[i]))

    def head(self, n: int) -> "WeatherSeries":
        return WeatherSeries(self.time[:n], self.T_e[:n], self.I_gh[:n], self.I_dh[:n])


@dataclass(frozen=True)
class SiteInfo:
    latitude: float = 52.1
    longitude: float = 5.18
    timezone: float = 1.0

    def __post_init__(self):
        if abs(self.latitude) > 90:
            raise ValueError("|latitude| must be <= 90")


@dataclass(frozen=True)
class SolAirParams:
    a_sol: float = 0.6
    h_e: float = 25.0
    emissivity: float = 0.9
    delta_R: float = 0.0


def _parse_time(text: str) -> np.datetime64:
    t = text.strip()
    if t.endswith("Z"):
        t = t[:-1]
    elif t.endswith("+00:00"):
        t = t[:-6]
    return np.datetime64(t, "h")


def format_time(t: np.datetime64) -> str:
    return str(np.datetime64(t, "m")) + "Z"


def parse_weather(path: str | Path) -> WeatherSeries:
    """Read a ``time,Te,Igh,Idh`` CSV; reject malformed rows, gaps and ``Idh > Igh``."""
    times, te, igh, idh = [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(row for row in fh if not row.lstrip().startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise WeatherError("empty weather file") from None
        if tuple(h.strip() for h in header) != HEADER:
            raise WeatherError(f"header must be {','.join(HEADER)}, got {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise WeatherError(f"line {lineno}: expected 4 columns, got {len(row)}")
            try:
                t = _parse_time(row[0])
                vals = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise WeatherError(f"line {lineno}: {exc}") from None
            if not np.all(np.isfinite(vals)):
                raise WeatherError(f"line {lineno}: non-finite value")
            if vals[2] < 0 or vals[1] < vals[2]:
                raise WeatherError(f"line {lineno}: need Igh >= Idh >= 0")
            if times:
                gap = (t - times[-1]).astype(int)
                if gap <= 0:
                    raise WeatherError(f"line {lineno}: time not increasing ({row[0]})")
                if gap != 1:
                    raise WeatherError(f"line {lineno}: gap of {gap} h before {row[0]}")
            times.append(t)
            te.append(vals[0])
            igh.append(vals[1])
            idh.append(vals[2])
    if not times:
        raise WeatherError("no weather records")
    return WeatherSeries(np.array(times, dtype="datetime64[h]"), np.array(te), np.array(igh), np.array(idh))


def write_weather(series: WeatherSeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for i in range(len(series)):
            w.writerow([format_time(series.time[i]), f"{series.T_e[i]:.6g}",
                        f"{series.I_gh[i]:.6g}", f"{series.I_dh[i]:.6g}"])


def synth_weather(
    days: int,
    T_mean: float,
    T_amp_daily: float,
    I_peak: float,
    start: str = "2023-01-01T00:00Z",
) -> WeatherSeries:
    """Deterministic sinusoidal driver.

    ``T_e = T_mean - T_amp cos(2 pi h / 24)``, ``I_gh = I_peak sin(pi (h - 6) / 12)``
    between 06 and 18 h (zero otherwise), ``I_dh = 0.3 I_gh``; ``h`` is the hour
    of day of the series clock.
    """
    t0 = _parse_time(start)
    time = t0 + np.arange(24 * days).astype("timedelta64[h]")
    h = (time - time.astype("datetime64[D]")).astype(float)
    T_e = T_mean - T_amp_daily * np.cos(2 * np.pi * h / 24.0)
    I_gh = np.where((h >= 6) & (h <= 18), np.maximum(0.0, I_peak * np.sin(np.pi * (h - 6) / 12.0)), 0.0)
    return WeatherSeries(time, T_e, I_gh, 0.3 * I_gh)


def solar_position(site: SiteInfo, time) -> tuple[np.ndarray, np.ndarray]:
    """Solar altitude and azimuth (deg, azimuth clockwise from north) at UTC ``time``.

    Spencer (1971) series for declination and equation of time.
    """
    t = np.asarray(time, dtype="datetime64[m]")
    day = (t.astype("datetime64[D]") - t.astype("datetime64[Y]").astype("datetime64[D]")).astype(float)
    hour_utc = (t - t.astype("datetime64[D]")).astype(float) / 60.0
    B = 2 * np.pi * day / 365.0
    decl = (0.006918 - 0.399912 * np.cos(B) + 0.070257 * np.sin(B) - 0.006758 * np.cos(2 * B)
            + 0.000907 * np.sin(2 * B) - 0.002697 * np.cos(3 * B) + 0.00148 * np.sin(3 * B))
    eot = 229.18 * (0.000075 + 0.001868 * np.cos(B) - 0.032077 * np.sin(B)
                    - 0.014615 * np.cos(2 * B) - 0.040849 * np.sin(2 * B))  # minutes
    solar_time = hour_utc + site.longitude / 15.0 + eot / 60.0
    omega = np.radians(15.0 * (solar_time - 12.0))
    lat = np.radians(site.latitude)
    sin_alt = np.sin(lat) * np.sin(decl) + np.cos(lat) * np.cos(decl) * np.cos(omega)
    alt = np.arcsin(np.clip(sin_alt, -1.0, 1.0))
    # azimuth from north, clockwise
    az = np.arctan2(-np.sin(omega) * np.cos(decl),
                    np.cos(lat) * np.sin(decl) - np.sin(lat) * np.cos(decl) * np.cos(omega))
    return np.degrees(alt), np.mod(np.degrees(az), 360.0)


def surface_irradiance(I_gh, I_dh, altitude, azimuth, tilt: float, surface_azimuth: float,
                       albedo: float = GROUND_ALBEDO):
    """Total irradiance on a tilted plane, W/m2: beam + isotropic diffuse + ground."""
    I_gh = np.asarray(I_gh, dtype=float)
    I_dh = np.asarray(I_dh, dtype=float)
    alt = np.radians(altitude)
    az = np.radians(azimuth)
    beta = np.radians(tilt)
    gamma = np.radians(surface_azimuth)
    sin_alt = np.sin(alt)
    I_bn = (I_gh - I_dh) / np.maximum(sin_alt, 0.05)
    cos_inc = sin_alt * np.cos(beta) + np.cos(alt) * np.sin(beta) * np.cos(az - gamma)
    beam = I_bn * np.maximum(cos_inc, 0.0)
    diffuse = I_dh * (1.0 + np.cos(beta)) / 2.0
    ground = albedo * I_gh * (1.0 - np.cos(beta)) / 2.0
    total = beam + diffuse + ground
    return np.where(sin_alt > 0.0, total, 0.0)


def sol_air(T_e, I_surf, params: SolAirParams):
    """``T_e + a I / h_e - eps dR / h_e``."""
    return (np.asarray(T_e, dtype=float) + params.a_sol * np.asarray(I_surf, dtype=float) / params.h_e
            - params.emissivity * params.delta_R / params.h_e)


def sol_air_series(weather: WeatherSeries, site: SiteInfo, parts, h_e: float) -> np.ndarray:
    """Sol-air temperature per hour and envelope part, shape ``(N, parts)``.

    Solar geometry is evaluated at the middle of each hour.
    """
    mid = weather.time.astype("datetime64[m]") + np.timedelta64(30, "m")
    alt, az = solar_position(site, mid)
    out = np.empty((len(weather), len(parts)))
    for k, p in enumerate(parts):
        I = surface_irradiance(weather.I_gh, weather.I_dh, alt, az, p.tilt, p.azimuth)
        params = SolAirParams(p.solar_absorptance, h_e, p.emissivity, p.longwave_deficit)
        out[:, k] = sol_air(weather.T_e, I, params)
    return out
