"""Experiment configuration: defaults, YAML loading and overrides.

A config file is a YAML mapping with one section per module. Every key is
optional; unknown keys and ill-typed values raise :class:`ConfigError` with
the offending line number.
"""

import copy
from dataclasses import dataclass

import numpy as np
import yaml

from ..baselines import CONTROLLERS, PidGains
from ..disturbance import DisturbanceProfile
from ..inner_loop import IndiGains
from ..mpc import MpcConfig, MpcWeights
from ..observers import FxtdoGains, HgdoGains
from ..plant import QuadParams

SCENARIOS = ("eight", "hover")

DEFAULTS = {
    "experiment": {
        "scenario": "eight",
        "controller": "fxtdo-mpc",
        "duration": 60.0,
        # None picks the scenario default (10 s eight, 20 s hover)
        "activation": None,
        "plant_hz": 1000,
        "mpc_hz": 100,
        "seed": 0,
        "rmse_start": 5.0,
        "max_failures": 10,
    },
    "disturbance": {
        # None picks the scenario default (sinusoid eight, constant hover)
        "kind": None,
        "scale": 1.0,
        "force": [1.0, -0.5, 0.0],
        "torque": [0.0, 0.0, 0.0],
    },
    "trajectory": {
        "r_x": 3.0,
        "r_y": 5.0,
        "r_z": -1.0,
        "k_t": 0.01,
        "hover_position": [0.0, 0.0, -1.0],
    },
    "quad": {
        "mass": 1.0,
        "inertia": [2.64e-3, 2.64e-3, 4.96e-3],
        "thrust_to_weight": 4.0,
        "torque_limits": [0.5, 0.5, 0.5],
    },
    "mpc": {
        "horizon": 10,
        "dt": 0.1,
        "omega_max": 3.0,
        "iterations": 1,
        "q_p": [1500.0, 1500.0, 1500.0],
        "q_v": [400.0, 400.0, 400.0],
        "q_q": [500.0, 500.0, 500.0, 500.0],
        "r": [1.0, 10.0, 10.0, 10.0],
    },
    "fxtdo": {
        "k1": 2.0, "k2": 2.0, "k1p": 0.6, "k2p": 0.6, "k1pp": 3.0, "k2pp": 3.0,
        "d_inf": 1.0 / 3.0, "L1": 1.0, "L2": 1.0, "boundary_layer": 0.0,
    },
    "hgdo": {"alpha1": 3.0, "alpha2": 2.0, "eps": 0.2},
    "indi": {
        "k_omega": [400.0, 400.0, 300.0],
        "cutoff_hz": 50.0,
        "filter_rate_feedback": False,
    },
    "pid": {
        "kp": [6.0, 6.0, 8.0],
        "ki": [0.5, 0.5, 1.0],
        "kd": [4.0, 4.0, 5.0],
        "k_att": 8.0,
        "integral_limit": 2.0,
        "feedforward": 0.0,
    },
    "rtmpc": {"init_penalty": 1.0e4},
    "noise": {"position_std": 0.0, "velocity_std": 0.0},
    "montecarlo": {"runs": 100, "duration": 30.0, "workers": 1},
}


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass
class ExperimentConfig:
    """Validated experiment configuration built from a nested mapping."""

    data: dict

    def __post_init__(self):
        validate(self.data)

    def __getitem__(self, section):
        return self.data[section]

    @classmethod
    def default(cls, **experiment):
        data = copy.deepcopy(DEFAULTS)
        data["experiment"].update(experiment)
        return cls(data)

    def with_overrides(self, overrides):
        """Copy with ``{"section.key": value}`` overrides applied."""
        data = copy.deepcopy(self.data)
        for dotted, value in overrides.items():
            section, _, key = dotted.partition(".")
            if section not in data or key not in data[section]:
                raise ConfigError(f"unknown key {dotted!r}")
            data[section][key] = value
        return ExperimentConfig(data)

    # resolved views ---------------------------------------------------

    @property
    def scenario(self):
        return self.data["experiment"]["scenario"]

    @property
    def controller(self):
        return self.data["experiment"]["controller"]

    @property
    def duration(self):
        return float(self.data["experiment"]["duration"])

    @property
    def activation(self):
        act = self.data["experiment"]["activation"]
        if act is None:
            return 10.0 if self.scenario == "eight" else 20.0
        return float(act)

    @property
    def plant_dt(self):
        return 1.0 / self.data["experiment"]["plant_hz"]

    @property
    def substeps(self):
        e = self.data["experiment"]
        return e["plant_hz"] // e["mpc_hz"]

    def quad_params(self):
        q = self.data["quad"]
        return QuadParams(mass=q["mass"], inertia=np.asarray(q["inertia"], dtype=float),
                          thrust_to_weight=q["thrust_to_weight"],
                          torque_limits=np.asarray(q["torque_limits"], dtype=float))

    def mpc_weights(self):
        m = self.data["mpc"]
        return MpcWeights(q_p=m["q_p"], q_v=m["q_v"], q_q=m["q_q"], r=m["r"])

    def mpc_config(self):
        m = self.data["mpc"]
        q = self.data["quad"]
        return MpcConfig.for_mass(q["mass"], q["thrust_to_weight"], horizon=m["horizon"],
                                  dt=m["dt"], omega_max=m["omega_max"],
                                  iterations=m["iterations"])

    def fxtdo_gains(self):
        return FxtdoGains(**self.data["fxtdo"])

    def hgdo_gains(self):
        return HgdoGains(**self.data["hgdo"])

    def indi_gains(self):
        i = self.data["indi"]
        return IndiGains(k_omega=i["k_omega"], cutoff_hz=i["cutoff_hz"],
                         torque_limits=self.data["quad"]["torque_limits"],
                         filter_rate_feedback=i["filter_rate_feedback"])

    def pid_gains(self):
        return PidGains(**self.data["pid"])

    def disturbance(self):
        d = self.data["disturbance"]
        kind = d["kind"]
        if kind is None:
            kind = "sinusoid" if self.scenario == "eight" else "constant"
        return DisturbanceProfile(kind, start=self.activation, scale=float(d["scale"]),
                                  force=tuple(float(v) for v in d["force"]),
                                  torque=tuple(float(v) for v in d["torque"]))


def _vector(value, n):
    arr = np.asarray(value, dtype=float)
    return arr.shape == (n,) and np.all(np.isfinite(arr))


_VECTOR_KEYS = {
    ("disturbance", "force"): 3, ("disturbance", "torque"): 3,
    ("trajectory", "hover_position"): 3, ("quad", "inertia"): 3,
    ("quad", "torque_limits"): 3, ("mpc", "q_p"): 3, ("mpc", "q_v"): 3,
    ("mpc", "q_q"): 4, ("mpc", "r"): 4, ("indi", "k_omega"): 3,
    ("pid", "kp"): 3, ("pid", "ki"): 3, ("pid", "kd"): 3,
}


def _check_type(section, key, value):
    default = DEFAULTS[section][key]
    name = f"{section}.{key}"
    n = _VECTOR_KEYS.get((section, key))
    if n is not None:
        try:
            return _vector(value, n), f"{name} must be a list of {n} numbers"
        except (TypeError, ValueError):
            return False, f"{name} must be a list of {n} numbers"
    if isinstance(default, bool):
        return isinstance(value, bool), f"{name} must be true or false"
    if default is None:
        # optional fields: activation (number) and disturbance kind (string)
        expected = str if key == "kind" else (int, float)
        ok = value is None or (isinstance(value, expected) and not isinstance(value, bool))
        return ok, f"{name} has an invalid value"
    if isinstance(default, str):
        return isinstance(value, str), f"{name} must be a string"
    ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if ok and isinstance(default, int) and not isinstance(value, int):
        return False, f"{name} must be an integer"
    return ok and bool(np.isfinite(value)), f"{name} must be a number"


def validate(data, lines=None):
    """Check structure and basic ranges; raise :class:`ConfigError`."""
    lines = lines or {}
    for section, keys in data.items():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section {section!r}", lines.get((section,)))
        for key, value in keys.items():
            where = lines.get((section, key))
            if key not in DEFAULTS[section]:
                raise ConfigError(f"unknown key {section}.{key}", where)
            ok, msg = _check_type(section, key, value)
            if not ok:
                raise ConfigError(msg, where)

    exp = data["experiment"]
    if exp["scenario"] not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {SCENARIOS}",
                          lines.get(("experiment", "scenario")))
    if exp["controller"] not in CONTROLLERS:
        raise ConfigError(f"controller must be one of {CONTROLLERS}",
                          lines.get(("experiment", "controller")))
    if exp["duration"] <= 0:
        raise ConfigError("duration must be positive", lines.get(("experiment", "duration")))
    if not 0 <= exp["rmse_start"] < exp["duration"]:
        raise ConfigError("rmse_start must lie in [0, duration)",
                          lines.get(("experiment", "rmse_start")))
    if exp["activation"] is not None and exp["activation"] < 0:
        raise ConfigError("activation must be non-negative",
                          lines.get(("experiment", "activation")))
    if exp["plant_hz"] <= 0 or exp["mpc_hz"] <= 0 or exp["plant_hz"] % exp["mpc_hz"]:
        raise ConfigError("mpc_hz must divide plant_hz", lines.get(("experiment", "mpc_hz")))
    stride = data["mpc"]["dt"] * exp["mpc_hz"]
    if abs(stride - round(stride)) > 1e-9 or round(stride) < 1:
        raise ConfigError("mpc.dt must be a whole number of control periods",
                          lines.get(("mpc", "dt")))
    kind = data["disturbance"]["kind"]
    if kind is not None and kind not in ("sinusoid", "constant", "none"):
        raise ConfigError("disturbance.kind must be sinusoid, constant or none",
                          lines.get(("disturbance", "kind")))
    if not 0.0 <= data["disturbance"]["scale"] <= 1.0:
        raise ConfigError("disturbance.scale must lie in [0, 1]",
                          lines.get(("disturbance", "scale")))
    # module dataclasses enforce their own ranges
    cfg_sections = {"fxtdo": FxtdoGains, "hgdo": HgdoGains, "pid": PidGains}
    for section, cls in cfg_sections.items():
        try:
            cls(**data[section])
        except ValueError as exc:
            raise ConfigError(f"{section}: {exc}", lines.get((section,))) from None


def _key_lines(text):
    """Map ``(section,)`` and ``(section, key)`` to 1-based source lines."""
    lines = {}
    root = yaml.compose(text)
    if root is None or not isinstance(root, yaml.MappingNode):
        return lines
    for knode, vnode in root.value:
        lines[(knode.value,)] = knode.start_mark.line + 1
        if isinstance(vnode, yaml.MappingNode):
            for k2, _ in vnode.value:
                lines[(knode.value, k2.value)] = k2.start_mark.line + 1
    return lines


def parse_config(text):
    """Build an :class:`ExperimentConfig` from YAML text merged over the defaults."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from None
    raw = raw or {}
    lines = _key_lines(text)
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping of sections", 1)
    data = copy.deepcopy(DEFAULTS)
    for section, keys in raw.items():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section {section!r}", lines.get((section,)))
        if keys is None:
            continue
        if not isinstance(keys, dict):
            raise ConfigError(f"section {section!r} must be a mapping", lines.get((section,)))
        for key, value in keys.items():
            if key not in DEFAULTS[section]:
                raise ConfigError(f"unknown key {section}.{key}", lines.get((section, key)))
            data[section][key] = value
    validate(data, lines)
    return ExperimentConfig(data)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)

