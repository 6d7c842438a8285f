"""
Scenario configuration: YAML documents validated with pydantic

Developer approach:
1. Parse YAML with PyYAML, remember the line of every key
2. Validate with strict pydantic models (unknown keys rejected)
3. Resolve derived quantities (N, L0, W margin, M(T), support box) into a Scenario
4. Report every problem as ConfigError with key path and line
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, field_validator, model_validator

from src.closedloop.diagnostics import check_dwell_compat
from src.closedloop.system import InitialConditions, Scenario, SecondLevel
from src.codec.expansion import DEFAULT_SAFETY, MIN_PAIRS, estimate_expansion
from src.codec.zoom_codec import ChannelSpec, bits_per_component, compute_L0, derive_levels
from src.data.models import (
    EXOSYSTEM_MASTER,
    PLANT_MASTER,
    build_exosystem,
    build_plant,
    immersion_for,
    normalize_exosystem_name,
    normalize_plant_name,
)
from src.errors import ConfigError, NotHurwitz
from src.regulator.internal_model import DEFAULT_BLEND_WIDTH, DEFAULT_SUPPORT_GROWTH, GainSpec, InternalModelSpec
from src.regulator.support import SUPPORT_DURATION, SUPPORT_STEP, compute_support_box
from src.sim.boxes import Box

logger = logging.getLogger(__name__)

W_MARGIN_SLACK = 0.5

Bounds = List[Tuple[float, float]]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _check_bounds(bounds: Bounds) -> Bounds:
    Box.from_bounds(bounds)
    return bounds


class ExoConfig(StrictModel):
    model: str = Field("van_der_pol", description="exosystem name from the catalogue")
    params: Dict[str, float] = Field(default_factory=dict)
    W0: Bounds = Field(..., description="[[lo, hi], ...] per state component")
    W_margin: Optional[float] = Field(None, ge=0, description="growth of W0 into W; default sqrt(r) L0 / (2N) + 0.5")

    @field_validator("model")
    @classmethod
    def known_model(cls, v: str) -> str:
        key = normalize_exosystem_name(v)
        if key is None:
            raise ValueError(f"unknown exosystem '{v}' (supported: {list(EXOSYSTEM_MASTER)})")
        return key

    @field_validator("W0")
    @classmethod
    def nonempty_box(cls, v: Bounds) -> Bounds:
        return _check_bounds(v)


class ChannelConfig(StrictModel):
    N_b: int = Field(..., description="bits per sample")
    N: Optional[int] = Field(None, description="levels per component; default derived from N_b")
    T: float = Field(..., gt=0, description="sampling interval [s]")
    L0: Optional[float] = Field(None, gt=0, description="initial zoom length; default largest side of W0")
    M_T: Optional[float] = Field(None, ge=1.0, description="forced expansion bound; default Monte Carlo estimate")


class ExpansionConfig(StrictModel):
    n_pairs: int = Field(2000, ge=MIN_PAIRS)
    seed: int = Field(0, ge=0)
    safety: float = Field(DEFAULT_SAFETY, ge=1.0)
    h: Optional[float] = Field(None, gt=0, description="integration step [s]; default simulation.h")


class PlantConfig(StrictModel):
    model: str = "integrator"
    params: Dict[str, float] = Field(default_factory=dict)
    mu_range: Optional[Tuple[float, float]] = Field(None, description="draw mu from [lo, hi] with expansion.seed")

    @field_validator("model")
    @classmethod
    def known_model(cls, v: str) -> str:
        key = normalize_plant_name(v)
        if key is None:
            raise ValueError(f"unknown plant '{v}' (supported: {list(PLANT_MASTER)})")
        return key

    @model_validator(mode="after")
    def mu_range_applies(self) -> "PlantConfig":
        if self.mu_range is not None:
            if "mu" not in PLANT_MASTER[self.model]["params"]:
                raise ValueError(f"plant '{self.model}' has no uncertain parameter mu")
            if self.mu_range[0] > self.mu_range[1]:
                raise ValueError(f"mu_range {self.mu_range} is empty")
        return self


class InternalModelConfig(StrictModel):
    support_box: Union[Literal["auto"], Bounds] = "auto"
    support_growth: float = Field(DEFAULT_SUPPORT_GROWTH, ge=0)
    blend_width: float = Field(DEFAULT_BLEND_WIDTH, gt=0)
    support_duration: float = Field(SUPPORT_DURATION, gt=0, description="[s]")
    support_step: float = Field(SUPPORT_STEP, gt=0, description="[s]")

    @field_validator("support_box")
    @classmethod
    def box_or_auto(cls, v):
        return v if v == "auto" else _check_bounds(v)


class GainsConfig(StrictModel):
    kappa: float = Field(..., gt=0)
    c: List[float] = Field(..., min_length=1)
    k: float = Field(..., gt=0)


class SecondLevelConfig(StrictModel):
    T_bar: float = Field(..., gt=0, description="[s]")
    ell: Optional[int] = Field(None, ge=1)
    T_star_estimate: Optional[float] = Field(None, gt=0, description="dwell time [s]; picks ell when ell is absent")

    def resolved_ell(self) -> int:
        if self.ell is not None:
            return self.ell
        if self.T_star_estimate is None:
            return 1
        return check_dwell_compat(self.T_star_estimate, self.T_bar)


class SimulationConfig(StrictModel):
    t_end: float = Field(..., gt=0, description="[s]")
    h: float = Field(1e-3, gt=0, description="[s]")
    state_ceiling: float = Field(1e3, gt=0)
    use_true_error: bool = False


class InitialConfig(StrictModel):
    w0: List[float]
    w_hat0: Optional[List[float]] = Field(None, description="w_e(0-) = w_d(0-); default centre of W0")
    z0: List[float] = Field(default_factory=list)
    y0: float
    xi0: Optional[List[float]] = Field(None, description="default zeros")


class OutputConfig(StrictModel):
    dir: str = "out"
    trajectory: str = "trajectory.csv"
    frames: str = "frames.log"
    metrics: str = "metrics.json"
    sweep: str = "sweep.csv"


class ThresholdsConfig(StrictModel):
    t_tail: float = Field(25.0, ge=0, description="[s]")
    tracking_error: float = Field(0.05, gt=0)
    decoder_error: float = Field(0.02, gt=0)


class ScenarioConfig(StrictModel):
    name: str = "scenario"
    exo: ExoConfig
    channel: ChannelConfig
    expansion: ExpansionConfig = Field(default_factory=ExpansionConfig)
    plant: PlantConfig = Field(default_factory=PlantConfig)
    internal_model: InternalModelConfig = Field(default_factory=InternalModelConfig)
    gains: GainsConfig
    second_level: Optional[SecondLevelConfig] = None
    simulation: SimulationConfig
    initial: InitialConfig
    output: OutputConfig = Field(default_factory=OutputConfig)
    thresholds: ThresholdsConfig = Field(default_factory=ThresholdsConfig)

    _key_lines: Dict[str, int] = PrivateAttr(default_factory=dict)
    _source: str = PrivateAttr(default="<string>")

    def line_of(self, key: str) -> Optional[int]:
        return _lookup_line(self._key_lines, key)


def _key_line_map(text: str) -> Dict[str, int]:
    """Dotted key path -> 1-based line, from the YAML node tree"""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return {}
    lines: Dict[str, int] = {}

    def walk(node, prefix: str):
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
                lines[path] = key_node.start_mark.line + 1
                walk(value_node, path)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                path = f"{prefix}.{i}"
                lines[path] = item.start_mark.line + 1
                walk(item, path)

    if root is not None:
        walk(root, "")
    return lines


def _lookup_line(lines: Dict[str, int], key: str) -> Optional[int]:
    parts = key.split(".")
    while parts:
        candidate = ".".join(parts)
        if candidate in lines:
            return lines[candidate]
        parts.pop()
    return None


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"{source}: invalid YAML", [("<document>", line, str(e).splitlines()[0])]) from e
    if not isinstance(document, dict):
        raise ConfigError(f"{source}: top level must be a mapping", [("<document>", 1, type(document).__name__)])

    lines = _key_line_map(text)
    try:
        cfg = ScenarioConfig.model_validate(document)
    except ValidationError as e:
        diagnostics = []
        for err in e.errors():
            key = ".".join(str(p) for p in err["loc"])
            line = None if err["type"] == "missing" else _lookup_line(lines, key)
            diagnostics.append((key, line, err["msg"]))
        raise ConfigError(f"{source}: {len(diagnostics)} invalid key(s)", diagnostics) from e
    cfg._key_lines = lines
    cfg._source = source
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    cfg = parse_config(text, source=str(path))
    logger.info(f"✅ Loaded scenario config '{cfg.name}' from {path}")
    return cfg


def serialize_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)


GRID_ALIASES = {
    "k": "gains.k",
    "kappa": "gains.kappa",
    "N": "channel.N",
    "N_b": "channel.N_b",
    "T": "channel.T",
}


def with_overrides(cfg: ScenarioConfig, overrides: Dict[str, Any]) -> ScenarioConfig:
    """
    Copy of cfg with dotted keys (or grid aliases) replaced and revalidated.
    Setting N alone also sets N_b to the smallest budget carrying it.
    """
    data = cfg.model_dump(mode="json")
    r = len(cfg.exo.W0)
    for key, value in overrides.items():
        path = GRID_ALIASES.get(key, key)
        node = data
        parts = path.split(".")
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"cannot override '{key}'", [(path, None, "no such section")])
            node = node[part]
        node[parts[-1]] = value
        if path == "channel.N" and "N_b" not in overrides and "channel.N_b" not in overrides:
            data["channel"]["N_b"] = r * bits_per_component(int(value))
    try:
        updated = ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(
            f"invalid override {overrides}",
            [(".".join(str(p) for p in err["loc"]), None, err["msg"]) for err in e.errors()],
        ) from e
    updated._key_lines = cfg._key_lines
    updated._source = cfg._source
    return updated


def _fail(cfg: ScenarioConfig, key: str, message: str) -> ConfigError:
    return ConfigError(f"{cfg._source}: {message}", [(key, cfg.line_of(key), message)])


def _require_dim(cfg: ScenarioConfig, key: str, values, expected: int, label: str):
    if len(values) != expected:
        raise _fail(cfg, key, f"{key} has {len(values)} entries, {label} is {expected}")


def build_scenario(cfg: ScenarioConfig, seed: Optional[int] = None) -> Scenario:
    """
    Resolve a validated config into a Scenario. M(T) is estimated here,
    with the config seed unless overridden, when the config does not force it.
    """
    seed = cfg.expansion.seed if seed is None else seed
    W0 = Box.from_bounds(cfg.exo.W0)
    r = W0.dim

    ch = cfg.channel
    N = ch.N if ch.N is not None else derive_levels(ch.N_b, r)
    L0 = ch.L0 if ch.L0 is not None else compute_L0(W0)
    if L0 <= 0:
        raise _fail(cfg, "exo.W0", "W0 is a single point; set channel.L0 explicitly")
    W_margin = cfg.exo.W_margin
    if W_margin is None:
        W_margin = math.sqrt(r) * L0 / (2 * N) + W_MARGIN_SLACK

    try:
        exo = build_exosystem(cfg.exo.model, cfg.exo.params, W0, W_margin)
    except ValueError as e:
        raise _fail(cfg, "exo.params", str(e)) from e

    if ch.M_T is not None:
        M_T = ch.M_T
        logger.info(f"📐 M(T) forced to {M_T} by config")
    else:
        M_T = estimate_expansion(
            exo,
            ch.T,
            n_pairs=cfg.expansion.n_pairs,
            seed=seed,
            h=cfg.expansion.h or cfg.simulation.h,
            safety=cfg.expansion.safety,
        )
    channel = ChannelSpec(N_b=ch.N_b, N=N, T=ch.T, L0=L0, M_T=M_T, r=r)

    plant_params = dict(cfg.plant.params)
    if cfg.plant.mu_range is not None and "mu" not in plant_params:
        plant_params["mu"] = float(np.random.default_rng(seed).uniform(*cfg.plant.mu_range))
        logger.info(f"🎲 Plant mu drawn from {cfg.plant.mu_range}: {plant_params['mu']:.6f}")
    try:
        plant = build_plant(cfg.plant.model, plant_params)
        immersion = immersion_for(cfg.exo.model, cfg.exo.params, cfg.plant.model)
    except ValueError as e:
        raise _fail(cfg, "plant", str(e)) from e

    d = immersion.d
    _require_dim(cfg, "gains.c", cfg.gains.c, d, "internal model order d")
    try:
        gains = GainSpec(kappa=cfg.gains.kappa, c=tuple(cfg.gains.c), k=cfg.gains.k)
    except NotHurwitz as e:
        raise _fail(cfg, "gains.c", str(e)) from e

    imc = cfg.internal_model
    if imc.support_box == "auto":
        support = compute_support_box(
            exo, plant, d, growth=imc.support_growth, duration=imc.support_duration, h=imc.support_step, tau=immersion.tau
        )
    else:
        support = Box.from_bounds(imc.support_box)
        _require_dim(cfg, "internal_model.support_box", imc.support_box, d, "internal model order d")
    im = InternalModelSpec(d=d, phi=immersion.phi, support_box=support, blend_width=imc.blend_width)

    ic = cfg.initial
    _require_dim(cfg, "initial.w0", ic.w0, r, "exosystem dimension r")
    w_hat0 = ic.w_hat0 if ic.w_hat0 is not None else list(W0.center)
    _require_dim(cfg, "initial.w_hat0", w_hat0, r, "exosystem dimension r")
    _require_dim(cfg, "initial.z0", ic.z0, plant.n, "zero-dynamics dimension n")
    xi0 = ic.xi0 if ic.xi0 is not None else [0.0] * d
    _require_dim(cfg, "initial.xi0", xi0, d, "internal model order d")
    initial = InitialConditions(
        w0=np.array(ic.w0, dtype=float),
        w_hat0=np.array(w_hat0, dtype=float),
        z0=np.array(ic.z0, dtype=float),
        y0=float(ic.y0),
        xi0=np.array(xi0, dtype=float),
    )

    second_level = None
    if cfg.second_level is not None:
        second_level = SecondLevel(ell=cfg.second_level.resolved_ell(), T_bar=cfg.second_level.T_bar)

    sim = cfg.simulation
    return Scenario(
        exo=exo,
        channel=channel,
        plant=plant,
        im=im,
        gains=gains,
        initial=initial,
        t_end=sim.t_end,
        h=sim.h,
        second_level=second_level,
        state_ceiling=sim.state_ceiling,
        use_true_error=sim.use_true_error,
        name=cfg.name,
    )


BUILTIN_DIR = Path(__file__).resolve().parents[2] / "configs"
BUILTIN_SCENARIOS = {"scenario1": "scenario1.yaml", "scenario2": "scenario2.yaml"}


def builtin_config_path(name: str) -> Path:
    if name not in BUILTIN_SCENARIOS:
        raise ConfigError(f"unknown built-in scenario '{name}' (available: {sorted(BUILTIN_SCENARIOS)})")
    return BUILTIN_DIR / BUILTIN_SCENARIOS[name]


def load_builtin(name: str) -> ScenarioConfig:
    return load_config(builtin_config_path(name))


def resolve_config_arg(value: str) -> ScenarioConfig:
    """A path, or the name of a built-in scenario"""
    if value in BUILTIN_SCENARIOS:
        return load_builtin(value)
    return load_config(value)
