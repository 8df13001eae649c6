"""Scenario configuration: defaults, key-value config files, resolution.

Config files are INI-style with a single ``[scenario]`` section.  Lists are
comma separated.  Precedence: command-line flags, then the config file,
then the calibration defaults.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields

from .estimation import CONTROLS, FORMS
from .montecarlo import McConfig, default_specs
from .sim1 import GAMMA_GRID, Sim1Config
from .sim2 import Sim2Config

SECTION = "scenario"
DEFAULT_SEED = 20240917
DEFAULT_K = 200
DEFAULT_OUT_DIR = "withinbias_out"
OUT_DIR_ENV = "WITHINBIAS_OUT_DIR"


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


SIM1_PARAMS = {f.name: f.default for f in fields(Sim1Config) if f.name not in ("n", "tau_bar", "gamma")}
SIM2_PARAMS = {f.name: f.default for f in fields(Sim2Config) if f.name not in ("n", "tau_bar")}


@dataclass
class ScenarioFile:
    kind: str
    n: int = 2000
    k: int = DEFAULT_K
    tau_bar: int = 15
    seed: int = DEFAULT_SEED
    workers: int = 1
    out_dir: str = DEFAULT_OUT_DIR
    emit_plots: bool = False
    forms: tuple[str, ...] = FORMS
    controls: tuple[str, ...] = ("none", "true_alpha", "fixed_effects")
    gamma: tuple[float, ...] = GAMMA_GRID
    proxy_sd: tuple[float, ...] = ()
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("sim1", "sim2"):
            raise ConfigError(f"scenario kind must be sim1 or sim2, got {self.kind!r}")
        defaults = SIM1_PARAMS if self.kind == "sim1" else SIM2_PARAMS
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown {self.kind} parameter(s): {', '.join(sorted(unknown))}")
        self.params = {**defaults, **self.params}
        self.validate()

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.tau_bar < 1:
            raise ConfigError("tau_bar must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.kind == "sim1" and not self.gamma:
            raise ConfigError("at least one gamma value is required")
        if any(s < 0 for s in self.proxy_sd):
            raise ConfigError("proxy standard deviations must be >= 0")
        bad = [c for c in self.controls if c not in CONTROLS or c == "noisy_alpha"]
        if bad:
            raise ConfigError(f"unknown control(s): {bad}")
        if any(f not in FORMS for f in self.forms):
            raise ConfigError(f"forms must be among {FORMS}")
        try:
            for _ in self.scenarios():
                pass
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def scenarios(self):
        """(label, scenario config) pairs; one per gamma for sim1."""
        if self.kind == "sim1":
            for g in self.gamma:
                yield f"gamma_{g:g}", Sim1Config(n=self.n, tau_bar=self.tau_bar, gamma=g, **self.params)
        else:
            yield "", Sim2Config(n=self.n, tau_bar=self.tau_bar, **self.params)

    def mc_configs(self):
        for label, sc in self.scenarios():
            specs = tuple(
                s for s in default_specs(sc, self.proxy_sd if self.kind == "sim2" else ())
                if s.duration_form in self.forms and (s.control in self.controls or s.control == "noisy_alpha")
            )
            yield label, McConfig(sc, k=self.k, base_seed=self.seed, specs=specs,
                                  proxy_sds=self.proxy_sd if self.kind == "sim2" else ())


_INT_KEYS = ("n", "k", "tau_bar", "seed", "workers")
_LIST_FLOAT_KEYS = ("gamma", "proxy_sd")
_LIST_STR_KEYS = ("forms", "controls")


def allowed_keys(kind: str) -> set[str]:
    keys = {"kind", "out_dir", "emit_plots", *_INT_KEYS, *_LIST_STR_KEYS}
    if kind == "sim1":
        keys |= {"gamma", *SIM1_PARAMS}
    else:
        keys |= {"proxy_sd", *SIM2_PARAMS}
    return keys


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key == "emit_plots":
            return {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}[raw.lower()]
        if key in _LIST_FLOAT_KEYS:
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if key in _LIST_STR_KEYS:
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        if key in ("kind", "out_dir"):
            return raw
        return float(raw)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"cannot parse value {raw!r} for key {key!r}") from exc


def read_config_text(text: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from exc
    if cp.sections() != [SECTION]:
        raise ConfigError(f"config file must contain exactly one [{SECTION}] section")
    items = dict(cp[SECTION])
    kind = items.get("kind", "").strip()
    if kind not in ("sim1", "sim2"):
        raise ConfigError("config file must set kind = sim1 or sim2")
    unknown = set(items) - allowed_keys(kind)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    return {k: _parse_value(k, v) for k, v in items.items()}


def resolve(kind: str, file_values: dict | None = None, flag_values: dict | None = None) -> ScenarioFile:
    """Merge defaults, config-file values and flag values (highest precedence)."""
    merged = {}
    for src in (file_values or {}, flag_values or {}):
        for key, val in src.items():
            if val is None:
                continue
            if key == "kind":
                if val != kind:
                    raise ConfigError(f"config file declares kind {val!r} but subcommand is {kind!r}")
                continue
            if key not in allowed_keys(kind):
                raise ConfigError(f"unknown key {key!r} for {kind}")
            merged[key] = val
    params = {k: merged.pop(k) for k in list(merged) if k in (SIM1_PARAMS if kind == "sim1" else SIM2_PARAMS)}
    if kind == "sim1":
        merged.pop("proxy_sd", None)
    else:
        merged.pop("gamma", None)
    return ScenarioFile(kind=kind, params=params, **merged)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def dump_scenario(sf: ScenarioFile) -> str:
    """Serialize a resolved scenario; :func:`load_scenario` inverts it."""
    out = io.StringIO()
    out.write(f"[{SECTION}]\n")
    out.write(f"kind = {sf.kind}\n")
    for f in fields(ScenarioFile):
        if f.name in ("kind", "params"):
            continue
        if sf.kind == "sim1" and f.name == "proxy_sd":
            continue
        if sf.kind == "sim2" and f.name == "gamma":
            continue
        out.write(f"{f.name} = {_fmt(getattr(sf, f.name))}\n")
    for key, val in sf.params.items():
        out.write(f"{key} = {_fmt(float(val))}\n")
    return out.getvalue()


def load_scenario(text: str) -> ScenarioFile:
    values = read_config_text(text)
    return resolve(values["kind"], values)


