"""Experiment configuration: defaults, INI round-trip, and overrides.

The on-disk format is a flat sectioned key=value file; every value printed
by ``print-config`` parses back to an identical configuration, and each
run's JSON summary embeds the same flat echo.
"""

import configparser
import io
from dataclasses import dataclass, field, fields

import numpy as np

from .dynamics import UtParams
from .errors import ConfigError
from .mppi import MppiConfig, VARIANTS
from .occupancy import FootprintSpec
from .prediction import PredictorConfig
from .sim import LOC_ALPHAS, PRED_SETUPS, SCENARIO_COUNTS, LocalizerConfig, SfmParams, WorldConfig

SCENARIOS = tuple(sorted(SCENARIO_COUNTS)) + ("empty",)
REGIMES = ("standard", "under", "over")

# paper-scale controller settings used by bench-cycle and --profile paper
PAPER_PROFILE = {"num_rollouts": 400, "mc_samples": 20000}
DESK_PROFILE = {"num_rollouts": 64, "mc_samples": 768}


@dataclass
class ExperimentConfig:
    scenario: str = "c3p3"
    controller: str = "ducct"
    loc_regime: str = "standard"
    pred_regime: str = "standard"
    base_seed: int = 0
    runs: int = 30
    profile: str = "desk"
    timeout: float = 120.0
    out: str = "runs/out"
    workers: int = 0  # 0: use cpu count
    # module overrides, applied on top of profile/regime defaults
    mppi: dict = field(default_factory=dict)
    predictor: dict = field(default_factory=dict)
    localizer: dict = field(default_factory=dict)
    sfm: dict = field(default_factory=dict)
    world: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.controller not in VARIANTS:
            raise ConfigError(f"unknown controller {self.controller!r}; expected one of {VARIANTS}")
        if self.loc_regime not in REGIMES or self.pred_regime not in REGIMES:
            raise ConfigError(f"regimes must be one of {REGIMES}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.profile not in ("desk", "paper"):
            raise ConfigError("profile must be 'desk' or 'paper'")

    def mppi_config(self) -> MppiConfig:
        base = dict(DESK_PROFILE if self.profile == "desk" else PAPER_PROFILE)
        base["variant"] = self.controller
        base.update(self.mppi)
        noise = base.pop("noise_cov", None)
        ut = base.pop("ut", None)
        cfg = MppiConfig(**base)
        if noise is not None:
            cfg.noise_cov = np.asarray(noise, dtype=float).reshape(2, 2)
        if ut is not None:
            cfg.ut = ut if isinstance(ut, UtParams) else UtParams(**ut)
        return cfg

    def predictor_config(self) -> PredictorConfig:
        sigma_init, kappa = PRED_SETUPS[self.pred_regime]
        base = {"sigma_init": sigma_init, "kappa_pred": kappa}
        base.update(self.predictor)
        return PredictorConfig(**base)

    def localizer_config(self) -> LocalizerConfig:
        base = {"regime": self.loc_regime}
        base.update(self.localizer)
        return LocalizerConfig(**base)

    def sfm_params(self) -> SfmParams:
        return SfmParams(**self.sfm)

    def world_config(self) -> WorldConfig:
        kw = dict(self.world)
        if "start" in kw:
            kw["start"] = tuple(kw["start"])
        if "goal" in kw:
            kw["goal"] = tuple(kw["goal"])
        return WorldConfig(**kw)

    def footprint(self) -> FootprintSpec:
        return FootprintSpec()

    def echo(self) -> dict:
        """Flat section.key -> value mapping; sufficient to rebuild the config."""
        out = {
            "experiment.scenario": self.scenario,
            "experiment.controller": self.controller,
            "experiment.loc_regime": self.loc_regime,
            "experiment.pred_regime": self.pred_regime,
            "experiment.base_seed": self.base_seed,
            "experiment.runs": self.runs,
            "experiment.profile": self.profile,
            "experiment.timeout": self.timeout,
            "experiment.out": self.out,
            "experiment.workers": self.workers,
        }
        for section in ("mppi", "predictor", "localizer", "sfm", "world"):
            for k, v in sorted(getattr(self, section).items()):
                out[f"{section}.{k}"] = v if not isinstance(v, np.ndarray) else v.tolist()
        return out


_EXPERIMENT_KEYS = {
    "scenario": str,
    "controller": str,
    "loc_regime": str,
    "pred_regime": str,
    "base_seed": int,
    "runs": int,
    "profile": str,
    "timeout": float,
    "out": str,
    "workers": int,
}

_SECTION_FIELDS = {
    "mppi": MppiConfig,
    "predictor": PredictorConfig,
    "localizer": LocalizerConfig,
    "sfm": SfmParams,
    "world": WorldConfig,
}


def _parse_value(raw: str):
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    if raw.startswith("[") or raw.startswith("("):
        body = raw.strip("[]()")
        return [_parse_value(tok) for tok in body.split(",") if tok.strip()]
    return raw


def _check_section_key(section: str, key: str):
    if section == "experiment":
        if key not in _EXPERIMENT_KEYS:
            raise ConfigError(f"unknown key '{key}' in section [experiment]")
        return
    cls = _SECTION_FIELDS.get(section)
    if cls is None:
        raise ConfigError(f"unknown config section [{section}]")
    names = {f.name for f in fields(cls)}
    if key not in names:
        raise ConfigError(f"unknown key '{key}' in section [{section}]")


def apply_override(cfg_dict: dict, dotted_key: str, raw_value: str):
    """Apply one 'section.key=value' override onto a plain config dict."""
    if "." not in dotted_key:
        raise ConfigError(f"override key must be section.key, got {dotted_key!r}")
    section, key = dotted_key.split(".", 1)
    _check_section_key(section, key)
    value = _parse_value(raw_value)
    if section == "experiment":
        cfg_dict[key] = _EXPERIMENT_KEYS[key](value) if value is not None else value
    else:
        cfg_dict.setdefault(section, {})[key] = value


def from_ini(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser.read_string(text)
    cfg: dict = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            apply_override(cfg, f"{section}.{key}", raw)
    return ExperimentConfig(**cfg)


def from_echo(echo: dict) -> ExperimentConfig:
    """Rebuild a configuration from a run summary's flat echo."""
    cfg: dict = {}
    for dotted, value in echo.items():
        apply_override(cfg, dotted, _format_value(value))
    return ExperimentConfig(**cfg)


def load_config(path: str | None, overrides=()) -> ExperimentConfig:
    cfg: dict = {}
    if path:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        with open(path) as f:
            parser.read_file(f)
        for section in parser.sections():
            for key, raw in parser.items(section):
                apply_override(cfg, f"{section}.{key}", raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        apply_override(cfg, dotted.strip(), raw)
    return ExperimentConfig(**cfg)


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_format_value(x) for x in v) + "]"
    if v is None:
        return "none"
    return repr(v) if isinstance(v, float) else str(v)


def to_ini(cfg: ExperimentConfig) -> str:
    echo = cfg.echo()
    sections: dict = {}
    for dotted, value in echo.items():
        section, key = dotted.split(".", 1)
        sections.setdefault(section, []).append((key, _format_value(value)))
    buf = io.StringIO()
    for section in ("experiment", "mppi", "predictor", "localizer", "sfm", "world"):
        if section not in sections:
            continue
        buf.write(f"[{section}]\n")
        for key, val in sections[section]:
            buf.write(f"{key} = {val}\n")
        buf.write("\n")
    return buf.getvalue()
