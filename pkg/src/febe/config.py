"""Plain ``key = value`` run configuration in lab units.

Keys are dot-paths whose last segment ends in a unit suffix (``_kev``,
``_nm``, ``_ns``, ``_mm``, ``_mrad``, ``_na``, ...). A value may repeat the
unit (``60 keV``); a different unit there is an error. Conversion to SI
happens only in :meth:`RunConfig.si`.
"""

import math
from dataclasses import dataclass, field

from .errors import ConfigError

SCENARIOS = (
    "coupling",
    "spectrum",
    "eels",
    "sweep-lp",
    "sweep-gm",
    "steady",
    "rabi",
    "entangle",
    "phase-budget",
)

UNIT_SCALE = {
    "kev": 1e3,  # to eV
    "ev": 1.0,
    "nm": 1e-9,
    "ns": 1e-9,
    "mm": 1e-3,
    "mrad": 1e-3,
    "rad": 1.0,
    "na": 1e-9,
    "ma": 1e-3,
}


def _float(text):
    return float(text)


def _int(text):
    return int(text)


def _floats(text):
    return tuple(float(t) for t in text.replace(",", " ").split())


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


def _nonneg(v):
    return v >= 0 if not isinstance(v, tuple) else all(x >= 0 for x in v)


def _pos(v):
    return v > 0 if not isinstance(v, tuple) else all(x > 0 for x in v)


# key -> (parser, default, check, description)
SCHEMA = {
    "electron.kinetic_energy_kev": (_float, 60.0, _pos, "electron kinetic energy"),
    "electron.sigma_rel": (_float, 0.02, _pos, "momentum spread in units of omega/v0"),
    "atom.wavelength_nm": (_float, 620.0, _pos, "transition wavelength"),
    "atom.lifetime_ns": (_float, 4.5, _pos, "excited-state lifetime"),
    "atom.dipole_nm": (_float, 0.27, _nonneg, "transition dipole length"),
    "atom.orientation": (_choice("perpendicular", "parallel"), "perpendicular", None, "dipole orientation"),
    "atom.state": (_choice("ground", "excited", "superposition", "mixed"), "superposition", None, "emitter state"),
    "geometry.r_perp_nm": (_float, 10.0, _pos, "trajectory-emitter distance"),
    "geometry.z_a_nm": (_float, 0.0, None, "longitudinal emitter position"),
    "coupling.source": (_choice("geometry", "fixed"), "fixed", None, "compute g from geometry or use g_abs"),
    "coupling.g_abs": (_float, 1e-3, _nonneg, "fixed coupling magnitude"),
    "coupling.g_phase_rad": (_float, 0.0, None, "fixed coupling phase"),
    "coupling.energies_kev": (_floats, (0.6, 6.0, 60.0), _pos, "energies for the coupling scenario"),
    "modulation.g_m_abs": (_float, 0.68, _nonneg, "modulation strength"),
    "modulation.phase": (_choice("matched", "fixed"), "matched", None, "phase-match phi_gm or use phase_rad"),
    "modulation.phase_rad": (_float, 0.0, None, "fixed modulation phase"),
    "modulation.harmonic": (_int, 1, _pos, "omega_a / omega"),
    "modulation.l_s_mm": (_float, 0.0, _nonneg, "source-to-modulator distance"),
    "modulation.l_p_mm": (_float, 10.0, _nonneg, "modulator-to-emitter drift"),
    "beam.current_na": (_float, 50.0, _pos, "average beam current"),
    "beam.s_abs": (_float, 0.58, _nonneg, "bunching |<b>|"),
    "beam.s_values": (_floats, (0.0, 0.1, 0.3, 0.58), _nonneg, "bunching values for the steady scenario"),
    "beam.duration_ns": (_float, 30.0, _pos, "evolution time for the rabi scenario"),
    "entangle.g1_abs": (_float, 1e-2, _nonneg, "coupling to emitter 1"),
    "entangle.g2_abs": (_float, 1e-2, _nonneg, "coupling to emitter 2"),
    "entangle.g2_phase_rad": (_float, 0.0, None, "relative coupling phase of emitter 2"),
    "entangle.shift": (_int, -1, None, "post-selected electron shift"),
    "entangle.atoms": (_choice("ground", "excited", "superposition"), "ground", None, "initial state of both emitters"),
    "phase.delta_e_ev": (_float, 0.5, _nonneg, "electron energy spread"),
    "phase.delta_theta_mrad": (_float, 2.0, _nonneg, "beam divergence"),
    "sweep.start": (_float, None, None, "sweep start (scenario units)"),
    "sweep.stop": (_float, None, None, "sweep stop (scenario units)"),
    "sweep.count": (_int, None, _pos, "number of sweep points"),
    "sweep.scale": (_choice("linear", "log"), None, None, "sweep spacing"),
    "sweep.observable": (_choice("eels", "s"), "eels", None, "sweep-lp quantity"),
    "sweep.harmonics": (_int, 5, _pos, "highest harmonic for sweep-lp with observable = s"),
    "run.workers": (_int, 1, _pos, "threads for sweep evaluation"),
}


# unit words recognised (and rejected if they do not match) in keys and values
_UNIT_WORDS = set(UNIT_SCALE) | {"s", "m", "a", "mev", "deg", "um", "us", "ps", "fs", "pa", "ua", "cm", "km"}


def _unit_of(key):
    suffix = key.rsplit("_", 1)[-1]
    return suffix if suffix in UNIT_SCALE else None


def _stem(key):
    head, _, suffix = key.rpartition("_")
    return head if head and suffix in _UNIT_WORDS else key


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    values: dict = field(default_factory=dict)
    sources: dict = field(default_factory=dict)  # key -> "file:LINE" or "--set"

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    def si(self, key):
        """Value converted from its lab unit to SI (eV for energies)."""
        unit = _unit_of(key)
        v = self.values[key]
        scale = UNIT_SCALE[unit] if unit else 1.0
        if isinstance(v, tuple):
            return tuple(x * scale for x in v)
        return v * scale

    def resolved_lines(self):
        out = [f"scenario = {self.scenario}"]
        for key in sorted(self.values):
            v = self.values[key]
            if v is None:
                continue
            text = ", ".join(repr(x) for x in v) if isinstance(v, tuple) else (repr(v) if not isinstance(v, str) else v)
            out.append(f"{key} = {text}")
        return out


def _split_value(key, raw, where):
    """Strip an optional trailing unit token and check it against the key."""
    parts = raw.split()
    unit = _unit_of(key)
    if len(parts) >= 2 and not any(c.isdigit() for c in parts[-1]) and "," not in parts[-1]:
        token = parts[-1].lower()
        if token in _UNIT_WORDS:
            if token != unit:
                raise ConfigError(f"{where}: unit mismatch for '{key}': got '{parts[-1]}', expected '{unit or 'no unit'}'")
            return " ".join(parts[:-1])
    return raw


def _parse_line(key, raw, where):
    if key not in SCHEMA:
        stem = _stem(key)
        near = [k for k in SCHEMA if _stem(k) == stem and k != key]
        if near:
            raise ConfigError(f"{where}: unit mismatch for '{key}': this parameter is given as '{near[0]}'")
        raise ConfigError(f"{where}: unknown key '{key}'")
    parser, _, check, _ = SCHEMA[key]
    raw = _split_value(key, raw.strip(), where)
    try:
        value = parser(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse '{key}' value {raw!r}: {exc}") from None
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{where}: '{key}' must be finite")
    return value, check


class ValidationFailure(ConfigError):
    """A parsed value violates a physical constraint (exit status 3)."""


def _ingest(values, sources, checks, line, where):
    text = line.split("#", 1)[0].strip()
    if not text:
        return
    if "=" not in text:
        raise ConfigError(f"{where}: expected 'key = value', got {line.strip()!r}")
    key, raw = (t.strip() for t in text.split("=", 1))
    if not raw:
        raise ConfigError(f"{where}: missing value for '{key}'")
    value, check = _parse_line(key, raw, where)
    values[key] = value
    sources[key] = where
    checks[key] = check


def parse_config(scenario, text="", overrides=(), filename="<config>"):
    """Build a :class:`RunConfig` from file text plus ``key=value`` overrides.

    Overrides win over the file. Unknown keys, unit mismatches and
    unparsable values raise :class:`ConfigError`; values outside their
    allowed range raise :class:`ValidationFailure`.
    """
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario '{scenario}'; choose from {', '.join(SCENARIOS)}")
    values = {k: spec[1] for k, spec in SCHEMA.items()}
    sources, checks = {}, {}
    for i, line in enumerate(text.splitlines(), start=1):
        _ingest(values, sources, checks, line, f"{filename}:{i}")
    for j, item in enumerate(overrides, start=1):
        _ingest(values, sources, checks, item, f"--set #{j}")
    for key, where in sources.items():
        check = checks[key]
        if check is not None and not check(values[key]):
            raise ValidationFailure(f"{where}: invalid value for '{key}': {values[key]!r} ({SCHEMA[key][3]})")
    return RunConfig(scenario, values, sources)
