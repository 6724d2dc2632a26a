"""Domain types and configuration for the test-box zone and its FEM twin.

Everything here is immutable after construction. ``load_config`` reads the
sectioned ``key = value`` format documented in the README, applies defaults and
validates every physical parameter eagerly.
"""
from __future__ import annotations

import configparser
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

RHO_AIR = 1.2  # kg/m3
C_AIR = 1000.0  # J/(kg K)

EXTERNAL = "external"
ADIABATIC = "adiabatic"


class ConfigError(ValueError):
    """Invalid configuration: parse failure or violated invariant."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"{field}: "
        super().__init__(prefix + message)


class ConfigWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Material:
    name: str
    conductivity: float  # W/(m K)
    density: float  # kg/m3
    specific_heat: float  # J/(kg K)

    @property
    def rho_c(self) -> float:
        """Volumetric heat capacity, J/(m3 K)."""
        return self.density * self.specific_heat


@dataclass(frozen=True)
class Layer:
    material: Material
    thickness: float  # m

    @property
    def resistance(self) -> float:
        return self.thickness / self.material.conductivity


@dataclass(frozen=True)
class WallConstruction:
    """Layered slab, interior side first."""

    layers: tuple[Layer, ...]

    @property
    def thickness(self) -> float:
        return sum(layer.thickness for layer in self.layers)

    @property
    def resistance(self) -> float:
        return sum(layer.resistance for layer in self.layers)


@dataclass(frozen=True)
class Glazing:
    U: float  # W/(m2 K), thermal mass neglected


@dataclass(frozen=True)
class SurfaceCoefficients:
    h_cv: float = 3.0
    h_r: float = 5.5
    h_e: float = 25.0


@dataclass(frozen=True)
class EnvelopePart:
    id: str
    area: float
    construction: WallConstruction | Glazing
    tilt: float = 90.0  # deg, 0 = facing up
    azimuth: float = 180.0  # deg from north, clockwise
    boundary: str = EXTERNAL
    solar_absorptance: float = 0.6
    emissivity: float = 0.9
    delta_R: float | None = None  # W/m2, None -> 100 for a roof, 0 otherwise

    @property
    def is_glazing(self) -> bool:
        return isinstance(self.construction, Glazing)

    @property
    def is_adiabatic(self) -> bool:
        return self.boundary == ADIABATIC

    @property
    def longwave_deficit(self) -> float:
        if self.delta_R is not None:
            return self.delta_R
        return 100.0 if self.tilt < 1e-9 else 0.0

    def u_value(self, h_e: float) -> float:
        """Transmittance including the exterior film, excluding the interior film."""
        if isinstance(self.construction, Glazing):
            return self.construction.U
        return 1.0 / (self.construction.resistance + 1.0 / h_e)


@dataclass(frozen=True)
class HeatGain:
    series: tuple[float, ...]  # W, one value per hour
    convection_factor: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.convection_factor <= 1.0:
            raise ValueError("convection_factor must lie in [0, 1]")


@dataclass(frozen=True)
class ZoneConfig:
    air_volume: float
    total_surface_area: float
    envelope: tuple[EnvelopePart, ...]
    surface_coeffs: SurfaceCoefficients = SurfaceCoefficients()
    ACH: float = 0.0
    furniture_multiplier: float = 1.0
    air_capacity: float | None = None  # J/K, None -> rho c V * multiplier

    @property
    def C_a(self) -> float:
        if self.air_capacity is not None:
            return self.air_capacity
        return RHO_AIR * C_AIR * self.air_volume * self.furniture_multiplier


CONCRETE = Material("concrete", 2.0, 2400.0, 840.0)


@dataclass(frozen=True)
class BoxGeometry:
    outer_edge: float = 1.2
    wall_thickness: float = 0.12
    wall_material: Material = CONCRETE
    air_k_eq: float = 1.0 / 0.34

    @property
    def inner_edge(self) -> float:
        return self.outer_edge - 2.0 * self.wall_thickness


@dataclass(frozen=True)
class SimulationSettings:
    start: str = "2023-01-01T00:00Z"
    days: int = 30
    T_mean: float = 3.0
    T_amp_daily: float = 3.0
    I_peak: float = 250.0
    latitude: float = 52.1
    longitude: float = 5.18
    timezone: float = 1.0
    warmup_hours: int = 72
    mesh_n: int = 20
    theta: float = 1.0
    substeps: int = 1
    history_hold: str = "linear"
    initial_temperature: float | None = None
    heating_setpoint: float | None = None
    cooling_setpoint: float | None = None


class Config(NamedTuple):
    zone: ZoneConfig
    box: BoxGeometry
    simulation: SimulationSettings


def derived_zone_quantities(cfg: ZoneConfig) -> tuple[float, float]:
    """Ventilation loss coefficient L_v (W/K) and air heat capacity C_a (J/K)."""
    L_v = RHO_AIR * C_AIR * cfg.ACH * cfg.air_volume / 3600.0
    return L_v, cfg.C_a


# -- default test box ---------------------------------------------------------

BOX_FACES = (
    # id, tilt, azimuth
    ("roof", 0.0, 0.0),
    ("floor", 180.0, 0.0),
    ("north", 90.0, 0.0),
    ("east", 90.0, 90.0),
    ("south", 90.0, 180.0),
    ("west", 90.0, 270.0),
)


def box_envelope(box: BoxGeometry, solar_absorptance: float = 0.6) -> tuple[EnvelopePart, ...]:
    wall = WallConstruction((Layer(box.wall_material, box.wall_thickness),))
    area = box.outer_edge**2
    return tuple(
        EnvelopePart(fid, area, wall, tilt, az, EXTERNAL, solar_absorptance)
        for fid, tilt, az in BOX_FACES
    )


def default_config() -> Config:
    """Opaque heavy-weight test box, ACH = 0."""
    box = BoxGeometry()
    envelope = box_envelope(box)
    zone = ZoneConfig(
        air_volume=box.inner_edge**3,
        total_surface_area=sum(p.area for p in envelope),
        envelope=envelope,
    )
    return Config(zone, box, SimulationSettings())


# -- validation -----------------------------------------------------------------

def _positive(value, name):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ConfigError(f"must be > 0, got {value!r}", field=name)


def _unit_interval(value, name):
    if not (math.isfinite(value) and 0.0 <= value <= 1.0):
        raise ConfigError(f"must lie in [0, 1], got {value!r}", field=name)


def validate_config(cfg: Config) -> Config:
    """Check every invariant; raise ConfigError naming the first offending field."""
    zone, box, sim = cfg
    _positive(box.outer_edge, "box.outer_edge")
    _positive(box.wall_thickness, "box.wall_thickness")
    _positive(box.air_k_eq, "box.air_k_eq")
    if not 2.0 * box.wall_thickness < box.outer_edge:
        raise ConfigError(
            f"2t >= edge ({2 * box.wall_thickness} >= {box.outer_edge})", field="box.wall_thickness"
        )

    seen_materials = {}
    for part in zone.envelope:
        where = f"envelope.{part.id}"
        _positive(part.area, f"{where}.area")
        c = part.construction
        if isinstance(c, Glazing):
            _positive(c.U, f"{where}.U_glazing")
        else:
            if not c.layers:
                raise ConfigError("needs at least one layer", field=f"{where}.layers")
            for layer in c.layers:
                _positive(layer.thickness, f"{where}.layers")
                seen_materials[layer.material.name] = layer.material
        if part.boundary not in (EXTERNAL, ADIABATIC):
            raise ConfigError(f"unknown boundary {part.boundary!r}", field=f"{where}.boundary")
        _unit_interval(part.solar_absorptance, f"{where}.solar_absorptance")
        _unit_interval(part.emissivity, f"{where}.emissivity")
    seen_materials[box.wall_material.name] = box.wall_material
    for m in seen_materials.values():
        for attr in ("conductivity", "density", "specific_heat"):
            _positive(getattr(m, attr), f"materials.{m.name}.{attr}")

    _positive(zone.air_volume, "zone.air_volume")
    _positive(zone.total_surface_area, "zone.total_surface_area")
    _positive(zone.furniture_multiplier, "zone.furniture_multiplier")
    _positive(zone.C_a, "zone.air_capacity")
    if not (math.isfinite(zone.ACH) and zone.ACH >= 0):
        raise ConfigError(f"must be >= 0, got {zone.ACH!r}", field="zone.ACH")
    for attr in ("h_cv", "h_r", "h_e"):
        _positive(getattr(zone.surface_coeffs, attr), f"zone.{attr}")
    if not zone.envelope:
        raise ConfigError("at least one envelope part required", field="envelope")
    area_sum = sum(p.area for p in zone.envelope)
    if abs(zone.total_surface_area - area_sum) > 1e-9 * area_sum:
        raise ConfigError(
            f"{zone.total_surface_area} differs from sum of envelope areas {area_sum}",
            field="zone.total_surface_area",
        )

    if sim.days < 1:
        raise ConfigError("must be >= 1", field="simulation.days")
    if sim.warmup_hours < 0:
        raise ConfigError("must be >= 0", field="simulation.warmup_hours")
    if sim.mesh_n < 3:
        raise ConfigError("must be >= 3", field="simulation.mesh_n")
    if sim.substeps < 1:
        raise ConfigError("must be >= 1", field="simulation.substeps")
    if not 0.5 <= sim.theta <= 1.0:
        raise ConfigError("must lie in [0.5, 1]", field="simulation.theta")
    if sim.history_hold not in ("constant", "linear"):
        raise ConfigError("must be 'constant' or 'linear'", field="simulation.history_hold")
    if abs(sim.latitude) > 90:
        raise ConfigError("|latitude| must be <= 90", field="simulation.latitude")
    if (
        sim.heating_setpoint is not None
        and sim.cooling_setpoint is not None
        and sim.heating_setpoint > sim.cooling_setpoint
    ):
        raise ConfigError("heating setpoint above cooling setpoint", field="simulation.heating_setpoint")
    return cfg


# -- parsing --------------------------------------------------------------------

_ZONE_KEYS = {"air_volume", "total_surface_area", "air_capacity", "furniture_multiplier",
              "ACH", "h_cv", "h_r", "h_e"}
_BOX_KEYS = {"outer_edge", "wall_thickness", "wall_material", "air_k_eq"}
_MATERIAL_KEYS = {"conductivity", "density", "specific_heat"}
_ENVELOPE_KEYS = {"area", "layers", "U_glazing", "tilt", "azimuth", "boundary",
                  "solar_absorptance", "emissivity", "delta_R"}
_SIM_FIELDS = {f: t for f, t in SimulationSettings.__annotations__.items()}


class _Section:
    """Section accessor that converts values and remembers which keys were read."""

    def __init__(self, name, items, lines):
        self.name = name
        self.items = dict(items)
        self.lines = lines

    def _line(self, key):
        return self.lines.get((self.name, key))

    def text(self, key, default=None):
        return self.items.get(key, default)

    def number(self, key, default=None):
        raw = self.items.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"not a number: {raw!r}", field=f"{self.name}.{key}",
                              line=self._line(key)) from None

    def integer(self, key, default=None):
        raw = self.items.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"not an integer: {raw!r}", field=f"{self.name}.{key}",
                              line=self._line(key)) from None

    def warn_unknown(self, known):
        for key in self.items:
            if key not in known:
                line = self._line(key)
                where = f" (line {line})" if line else ""
                warnings.warn(f"unknown key {self.name}.{key}{where}", ConfigWarning, stacklevel=4)


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    lines = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif "=" in s and not s.startswith("#") and section is not None:
            lines[(section, s.split("=", 1)[0].strip())] = lineno
    return lines


def parse_config(text: str) -> Config:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",), comment_prefixes=("#",),
        default_section="__none__",
    )
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("cannot parse line", line=lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of a section", line=exc.lineno) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], line=getattr(exc, "lineno", None)) from None
    lines = _key_lines(text)
    sections = {name: _Section(name, parser.items(name), lines) for name in parser.sections()}

    for name in sections:
        if name not in ("zone", "box", "simulation") and not name.startswith(("materials.", "envelope.")):
            warnings.warn(f"unknown section [{name}]", ConfigWarning, stacklevel=2)

    materials = {"concrete": CONCRETE}
    for name, sec in sections.items():
        if name.startswith("materials."):
            mname = name.split(".", 1)[1]
            sec.warn_unknown(_MATERIAL_KEYS)
            for key in _MATERIAL_KEYS:
                if key not in sec.items:
                    raise ConfigError("missing", field=f"{name}.{key}")
            materials[mname] = Material(
                mname, sec.number("conductivity"), sec.number("density"), sec.number("specific_heat")
            )

    defaults = BoxGeometry()
    bsec = sections.get("box", _Section("box", {}, lines))
    bsec.warn_unknown(_BOX_KEYS)
    mat_name = bsec.text("wall_material", defaults.wall_material.name)
    if mat_name not in materials:
        raise ConfigError(f"undefined material {mat_name!r}", field="box.wall_material",
                          line=bsec._line("wall_material"))
    box = BoxGeometry(
        outer_edge=bsec.number("outer_edge", defaults.outer_edge),
        wall_thickness=bsec.number("wall_thickness", defaults.wall_thickness),
        wall_material=materials[mat_name],
        air_k_eq=bsec.number("air_k_eq", defaults.air_k_eq),
    )

    envelope = []
    for name, sec in sections.items():
        if not name.startswith("envelope."):
            continue
        sec.warn_unknown(_ENVELOPE_KEYS)
        pid = name.split(".", 1)[1]
        if sec.text("U_glazing") is not None:
            construction = Glazing(sec.number("U_glazing"))
        elif sec.text("layers") is not None:
            construction = WallConstruction(_parse_layers(sec, materials))
        else:
            raise ConfigError("needs 'layers' or 'U_glazing'", field=f"{name}.layers")
        if sec.text("area") is None:
            raise ConfigError("missing", field=f"{name}.area")
        envelope.append(EnvelopePart(
            id=pid,
            area=sec.number("area"),
            construction=construction,
            tilt=sec.number("tilt", 90.0),
            azimuth=sec.number("azimuth", 180.0),
            boundary=sec.text("boundary", EXTERNAL),
            solar_absorptance=sec.number("solar_absorptance", 0.6),
            emissivity=sec.number("emissivity", 0.9),
            delta_R=sec.number("delta_R"),
        ))
    if not envelope:
        envelope = list(box_envelope(box))

    zsec = sections.get("zone", _Section("zone", {}, lines))
    zsec.warn_unknown(_ZONE_KEYS)
    sc = SurfaceCoefficients()
    area_sum = sum(p.area for p in envelope)
    zone = ZoneConfig(
        air_volume=zsec.number("air_volume", box.inner_edge**3 if box.inner_edge > 0 else 0.0),
        total_surface_area=zsec.number("total_surface_area", area_sum),
        envelope=tuple(envelope),
        surface_coeffs=SurfaceCoefficients(
            zsec.number("h_cv", sc.h_cv), zsec.number("h_r", sc.h_r), zsec.number("h_e", sc.h_e)
        ),
        ACH=zsec.number("ACH", 0.0),
        furniture_multiplier=zsec.number("furniture_multiplier", 1.0),
        air_capacity=zsec.number("air_capacity"),
    )

    ssec = sections.get("simulation", _Section("simulation", {}, lines))
    ssec.warn_unknown(set(_SIM_FIELDS))
    sim_defaults = SimulationSettings()
    values = {}
    for fname in _SIM_FIELDS:
        default = getattr(sim_defaults, fname)
        if fname in ("start", "history_hold"):
            values[fname] = ssec.text(fname, default)
        elif fname in ("days", "warmup_hours", "mesh_n", "substeps"):
            values[fname] = ssec.integer(fname, default)
        else:
            values[fname] = ssec.number(fname, default)
    sim = SimulationSettings(**values)

    return validate_config(Config(zone, box, sim))


def _parse_layers(sec: _Section, materials) -> tuple[Layer, ...]:
    layers = []
    for item in sec.text("layers").split(","):
        item = item.strip()
        try:
            mname, thickness = item.split(":")
            thickness = float(thickness)
        except ValueError:
            raise ConfigError(f"expected material:thickness, got {item!r}",
                              field=f"{sec.name}.layers", line=sec._line("layers")) from None
        if mname.strip() not in materials:
            raise ConfigError(f"undefined material {mname.strip()!r}", field=f"{sec.name}.layers",
                              line=sec._line("layers"))
        layers.append(Layer(materials[mname.strip()], thickness))
    return tuple(layers)


def load_config(path: str | Path) -> Config:
    """Read and validate a configuration file.

    Returns a ``Config`` named tuple ``(zone, box, simulation)``. Absent optional
    keys take their documented defaults; with no ``[envelope.*]`` sections the
    six faces of the box are used.
    """
    text = Path(path).read_text(encoding="utf-8")
    return parse_config(text)


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def dump_config(cfg: Config) -> str:
    """Serialize to the config format; ``parse_config(dump_config(c)) == c``."""
    zone, box, sim = cfg
    out = []
    materials = {box.wall_material.name: box.wall_material}
    for part in zone.envelope:
        if isinstance(part.construction, WallConstruction):
            for layer in part.construction.layers:
                materials[layer.material.name] = layer.material
    for m in materials.values():
        out += [f"[materials.{m.name}]", f"conductivity = {_fmt(m.conductivity)}",
                f"density = {_fmt(m.density)}", f"specific_heat = {_fmt(m.specific_heat)}", ""]
    out += ["[box]", f"outer_edge = {_fmt(box.outer_edge)}",
            f"wall_thickness = {_fmt(box.wall_thickness)}",
            f"wall_material = {box.wall_material.name}", f"air_k_eq = {_fmt(box.air_k_eq)}", ""]
    sc = zone.surface_coeffs
    out += ["[zone]", f"air_volume = {_fmt(zone.air_volume)}",
            f"total_surface_area = {_fmt(zone.total_surface_area)}",
            f"ACH = {_fmt(zone.ACH)}", f"furniture_multiplier = {_fmt(zone.furniture_multiplier)}"]
    if zone.air_capacity is not None:
        out.append(f"air_capacity = {_fmt(zone.air_capacity)}")
    out += [f"h_cv = {_fmt(sc.h_cv)}", f"h_r = {_fmt(sc.h_r)}", f"h_e = {_fmt(sc.h_e)}", ""]
    for part in zone.envelope:
        out.append(f"[envelope.{part.id}]")
        out.append(f"area = {_fmt(part.area)}")
        if isinstance(part.construction, Glazing):
            out.append(f"U_glazing = {_fmt(part.construction.U)}")
        else:
            out.append("layers = " + ", ".join(
                f"{layer.material.name}:{_fmt(layer.thickness)}" for layer in part.construction.layers))
        out += [f"tilt = {_fmt(part.tilt)}", f"azimuth = {_fmt(part.azimuth)}",
                f"boundary = {part.boundary}", f"solar_absorptance = {_fmt(part.solar_absorptance)}",
                f"emissivity = {_fmt(part.emissivity)}"]
        if part.delta_R is not None:
            out.append(f"delta_R = {_fmt(part.delta_R)}")
        out.append("")
    out.append("[simulation]")
    for fname in _SIM_FIELDS:
        value = getattr(sim, fname)
        if value is not None:
            out.append(f"{fname} = {_fmt(value)}")
    out.append("")
    return "\n".join(out)


def with_settings(cfg: Config, **changes) -> Config:
    return Config(cfg.zone, cfg.box, replace(cfg.simulation, **changes))
