"""Drive the lumped zone and the FEM box from one configuration and weather series."""
from __future__ import annotations

import numpy as np

from . import fem
from .model import Config
from .weather import SiteInfo, WeatherSeries, sol_air_series
from .zone import ZoneInputs, ZoneSeries, build_network, simulate_zone


class ScenarioError(ValueError):
    pass


def site_of(cfg: Config) -> SiteInfo:
    s = cfg.simulation
    return SiteInfo(s.latitude, s.longitude, s.timezone)


def initial_temperature(cfg: Config, weather: WeatherSeries) -> float:
    T0 = cfg.simulation.initial_temperature
    return float(weather.T_e[0]) if T0 is None else T0


def sol_air_per_part(cfg: Config, weather: WeatherSeries) -> np.ndarray:
    return sol_air_series(weather, site_of(cfg), cfg.zone.envelope, cfg.zone.surface_coeffs.h_e)


def face_of(part) -> str:
    """Box face an envelope part sits on, from its orientation."""
    if abs(part.tilt) < 1e-9:
        return "z+"
    if abs(part.tilt - 180.0) < 1e-9:
        return "z-"
    if abs(part.tilt - 90.0) < 1e-9:
        az = part.azimuth % 360.0
        for target, face in ((0.0, "y+"), (90.0, "x+"), (180.0, "y-"), (270.0, "x-")):
            if abs(az - target) < 1e-9:
                return face
    raise ScenarioError(f"part {part.id!r} (tilt {part.tilt}, azimuth {part.azimuth}) is not a box face")


def face_parts(cfg: Config) -> list[int]:
    """Index of the envelope part on each face, in ``fem.FACES`` order."""
    index = {}
    for k, part in enumerate(cfg.zone.envelope):
        if part.is_glazing:
            raise ScenarioError(f"part {part.id!r}: glazing is not modelled in the FEM box")
        face = face_of(part)
        if face in index:
            raise ScenarioError(f"two parts on face {face}")
        index[face] = k
    missing = [f for f in fem.FACES if f not in index]
    if missing:
        raise ScenarioError(f"no envelope part on faces {missing}")
    return [index[f] for f in fem.FACES]


def zone_inputs(cfg: Config, weather: WeatherSeries) -> ZoneInputs:
    T_y = sol_air_per_part(cfg, weather)
    return ZoneInputs(hours=np.arange(len(weather)), T_b=np.asarray(weather.T_e, dtype=float), T_y=T_y)


def run_bes(cfg: Config, weather: WeatherSeries, net=None) -> ZoneSeries:
    s = cfg.simulation
    net = build_network(cfg.zone) if net is None else net
    inputs = zone_inputs(cfg, weather)
    return simulate_zone(
        net,
        initial_temperature(cfg, weather),
        inputs,
        history_hold=s.history_hold,
        setpoints=(s.heating_setpoint, s.cooling_setpoint),
    )


def build_fem_system(cfg: Config, n: int | None = None, robin: str = "lumped") -> fem.FemSystem:
    n = cfg.simulation.mesh_n if n is None else n
    mesh = fem.build_box_mesh(cfg.box, n)
    order = face_parts(cfg)
    h_e = cfg.zone.surface_coeffs.h_e
    face_h = [0.0 if cfg.zone.envelope[k].is_adiabatic else h_e for k in order]
    return fem.assemble(mesh, fem.MaterialField.for_box(cfg.box), face_h, robin=robin)


def fem_face_temperatures(cfg: Config, weather: WeatherSeries) -> np.ndarray:
    return sol_air_per_part(cfg, weather)[:, face_parts(cfg)]


def run_fem(cfg: Config, weather: WeatherSeries, n: int | None = None, system=None,
            probes=None, snapshot_hours=()) -> fem.FemSeries:
    s = cfg.simulation
    system = build_fem_system(cfg, n) if system is None else system
    return fem.simulate_fem(
        system,
        fem_face_temperatures(cfg, weather),
        initial_temperature(cfg, weather),
        substeps=s.substeps,
        theta=s.theta,
        probes=probes,
        snapshot_hours=snapshot_hours,
    )
