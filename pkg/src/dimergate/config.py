"""INI run configurations with a typed schema and lossless round trips."""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .lattice import LATTICE_PRESETS, LatticeDepths
from .model import HubbardParams
from .schedules import BlackmanBarrier, LinearBiasSweep, RampSchedule


def _floats(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(x) for x in text.split(","))


def _ints(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(x) for x in text.split(","))


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


# section -> key -> (parser, default)
SCHEMA = {
    "scenario": {
        "name": (str, "unnamed"),
        "seed": (int, 0),
        "output": (str, "."),
    },
    "model": {
        "t": (float, 1000.0),
        "delta": (float, 0.0),
        "u": (float, 0.0),
    },
    "schedule": {
        "kind": (str, "LinearBiasSweep"),
        "duration": (float, 750e-6),
        "t_max": (float, 3000.0),
        "t_min": (float, 60.0),
        "delta_stagger": (float, 4000.0),
        "u": (float, 0.0),
        "profile": (str, "smooth"),
        "calibrate": (str, "none"),
        "target_alpha": (float, 1.0),
        "steps": (int, 4096),
    },
    "lattice": {
        "preset": (str, ""),
        "v_x": (float, 9.97),
        "v_xint": (float, 1.02),
        "v_y": (float, 31.07),
        "v_z": (float, 30.27),
        "imbalance": (float, 0.8),
        "theta_beam": (float, math.pi),
        "phi_start": (float, math.pi / 2),
        "phi_end": (float, -math.pi / 2),
        "samples": (int, 65),
        "points": (int, 1024),
        "twists": (int, 8),
    },
    "scan": {
        "ratio_min": (float, -10.0),
        "ratio_max": (float, 10.0),
        "points": (int, 201),
        "input": (str, "dark"),
    },
    "gate": {
        "counts": (_ints, (0, 1, 2, 4, 8, 16)),
    },
    "noise": {
        "amplitudes": (_floats, (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)),
        "bandwidth": (float, 2000.0),
        "n_gates": (int, 16),
        "n_trials": (int, 64),
        "steps": (int, 1024),
        "chi0": (float, -1.0),
        "filter": (str, "zoh"),
    },
    "chirality": {
        "u_over_t_min": (float, -1.0),
        "u_over_t_max": (float, 1.0),
        "points": (int, 41),
        "steps": (int, 2048),
    },
    "readout": {
        "splitting": (float, 140.0),
        "duration_max": (float, 2 / 140.0),
        "samples": (int, 41),
        "sigma": (float, 0.0),
        "apply_gate": (_bool, True),
        "gate_counts": (_ints, (0, 10, 20, 40, 60, 80, 100)),
        "survival": (float, 1.0),
    },
    "budget": {
        "v_x": (float, 1.3),
        "v_xint": (float, 2.1),
        "v_z": (float, 0.2),
        "inhomogeneity": (float, 1.0),
        "u": (float, 0.8),
    },
}

SCHEDULE_KINDS = ("LinearBiasSweep", "BlackmanBarrier", "LatticeRamp")
CALIBRATIONS = ("none", "u", "duration")


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = {sec: {k: spec[1] for k, spec in keys.items()} for sec, keys in SCHEMA.items()}
        for sec, keys in self.values.items():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]")
            for k, v in keys.items():
                if k not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key {k!r} in [{sec}]")
                merged[sec][k] = v
        self.values = merged
        self._validate()

    def _validate(self):
        kind = self.get("schedule", "kind")
        if kind not in SCHEDULE_KINDS:
            raise ConfigError(f"schedule kind must be one of {SCHEDULE_KINDS}, got {kind!r}")
        calibrate = self.get("schedule", "calibrate")
        if calibrate not in CALIBRATIONS:
            raise ConfigError(f"schedule calibrate must be one of {CALIBRATIONS}")
        if calibrate != "none" and (calibrate, kind) not in (("u", "LinearBiasSweep"), ("duration", "BlackmanBarrier")):
            raise ConfigError(f"calibration {calibrate!r} does not apply to {kind}")
        preset = self.get("lattice", "preset")
        if preset and preset not in LATTICE_PRESETS:
            raise ConfigError(f"unknown lattice preset {preset!r}")
        if self.get("scan", "input") not in ("dark", "t0"):
            raise ConfigError("scan input must be 'dark' or 't0'")
        if self.get("scan", "points") < 0:
            raise ConfigError("scan points must be non-negative")

    def get(self, section: str, key: str):
        return self.values[section][key]

    def with_value(self, section: str, key: str, value) -> RunConfig:
        vals = {s: dict(k) for s, k in self.values.items()}
        vals[section][key] = value
        return RunConfig(vals)

    # -- serialisation -----------------------------------------------------

    @classmethod
    def from_string(cls, text: str) -> RunConfig:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        values = {}
        for sec in parser.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{sec}]")
            values[sec] = {}
            for key, raw in parser.items(sec):
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key {key!r} in [{sec}]")
                conv = SCHEMA[sec][key][0]
                try:
                    values[sec][key] = conv(raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {sec}.{key}: {raw!r}") from exc
        return cls(values)

    @classmethod
    def load(cls, path) -> RunConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_string(text)

    def to_string(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        for sec, keys in self.values.items():
            parser[sec] = {k: _fmt(v) for k, v in keys.items()}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_string())

    # -- builders ----------------------------------------------------------

    def hubbard(self) -> HubbardParams:
        return HubbardParams(self.get("model", "t"), self.get("model", "delta"), self.get("model", "u"))

    def lattice_depths(self) -> LatticeDepths:
        preset = self.get("lattice", "preset")
        if preset:
            return LATTICE_PRESETS[preset]
        g = self.values["lattice"]
        return LatticeDepths(g["v_x"], g["v_xint"], g["v_y"], g["v_z"], g["imbalance"], 0.0, g["theta_beam"])

    def schedule(self) -> RampSchedule:
        # imported here to keep config importable without the heavier modules
        from .exchange import calibrate_barrier_duration, calibrate_sweep_u
        from .lattice import schedule_from_phase_ramp

        s = self.values["schedule"]
        kind, calibrate, alpha = s["kind"], s["calibrate"], s["target_alpha"]
        sched: RampSchedule
        if kind == "LinearBiasSweep":
            sched = LinearBiasSweep(
                duration=s["duration"],
                t_max=s["t_max"],
                delta_stagger=s["delta_stagger"],
                u=s["u"],
                profile=s["profile"],
            )
            if calibrate == "u":
                sched = calibrate_sweep_u(sched, alpha)
        elif kind == "BlackmanBarrier":
            sched = BlackmanBarrier(duration=s["duration"], t_min=s["t_min"], t_max=s["t_max"], u=s["u"])
            if calibrate == "duration":
                sched = calibrate_barrier_duration(sched, alpha)
        else:
            g = self.values["lattice"]
            sched = schedule_from_phase_ramp(
                self.lattice_depths(),
                (g["phi_start"], g["phi_end"]),
                samples=g["samples"],
                duration=s["duration"],
                u=s["u"],
                points=g["points"],
                n_twists=g["twists"],
            )
        return sched


def preset_names() -> list[str]:
    root = resources.files("dimergate") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_preset(name: str) -> RunConfig:
    path = resources.files("dimergate") / "presets" / f"{name}.ini"
    if not path.is_file():
        raise ConfigError(f"no preset named {name!r}")
    return RunConfig.from_string(path.read_text())

