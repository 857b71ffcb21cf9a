"""Run configuration: a JSON document with strict validation.

Sections: ``model`` (kind, resolution, parameters, ladder overrides, initial
state), ``noise`` (theta/alpha/case or "advisor"), ``stepper``, ``control``,
``ensemble`` and ``output``.  Unknown keys are rejected with their dotted
location; cross-field rules (case vs declared initial space, Galerkin cutoffs
vs resolution) are enforced at parse time.  ``serialize_config`` emits a
canonical form whose parse returns an equal RunConfig, and ``config_hash``
stamps every output file for provenance.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

from .control import ControlSchedule
from .integrators import SCHEMES, StepperConfig
from .models import MODEL_KINDS, DriftOperator, ModelParams, default_ladder
from .noise import CASE_NOISE_SPACE, NoiseSpec
from .spectral import SpaceLadder, SpectralField, TorusGrid

_SPACE_ORDER = ("G", "F0", "F1", "D")


class ConfigError(ValueError):
    """Invalid configuration; message carries the dotted key location."""


@dataclass(frozen=True)
class InitialSection:
    kind: str = "sine"  # sine | random | rest_height
    amplitude: float = 1.0
    space: str = "D"  # ladder space the initial state is declared to lie in
    seed: int = 0
    decay_exponent: float = 6.0
    mean_height: float = 1.0  # rest_height only


@dataclass(frozen=True)
class ModelSection:
    kind: str = "Burgers1D"
    resolution: int = 256
    nu: float = 0.0
    eta: float = 0.0
    f_coriolis: float = 1.0
    rossby: float = 1.0
    froude: float = 1.0
    epsilon_sobolev: float = 0.1
    ladder: tuple[float, float, float, float] | None = None
    initial: InitialSection = field(default_factory=InitialSection)


@dataclass(frozen=True)
class NoiseSection:
    theta: float = 0.0
    alpha: float = 0.0
    case: str = "I"
    advisor: bool = False
    advisor_epsilon: float = 0.25
    advisor_level: float = 2.0


@dataclass(frozen=True)
class StepperSection:
    scheme: str = "TamedEulerMaruyama"
    dt: float = 1e-3
    t_end: float = 1.0
    dt_min_exponent: int = 20  # dt_min = dt * 2**-exponent
    adapt: bool = True
    growth_trigger: float = 0.10
    stiff_cap: float = 0.5
    blowup_threshold: float | None = None
    save_stride: int = 1
    mart_epsilon: float = 0.25


@dataclass(frozen=True)
class ControlSection:
    enabled: bool = False
    K: float = 1.0
    C: float = 1.0
    max_stochastic_duration: float | None = None


@dataclass(frozen=True)
class EnsembleSection:
    n_paths: int = 16
    base_seed: int = 0
    d_list: tuple[int, ...] = (8, 16)
    K_grid: tuple[float, ...] = ()
    T: float | None = None
    epsilon_target: float = 0.1
    delta_grid: tuple[float, ...] = ()
    eta: float | None = None


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    save_stride: int = 1


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    stepper: StepperSection = field(default_factory=StepperSection)
    control: ControlSection = field(default_factory=ControlSection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    output: OutputSection = field(default_factory=OutputSection)


_SECTION_TYPES = {
    "model": ModelSection,
    "noise": NoiseSection,
    "stepper": StepperSection,
    "control": ControlSection,
    "ensemble": EnsembleSection,
    "output": OutputSection,
}

_LIST_FIELDS = {"d_list", "K_grid", "delta_grid", "ladder"}


def _coerce_section(cls, data: dict, where: str):
    defaults = cls()
    kwargs = {}
    for key, value in data.items():
        if key == "initial" and cls is ModelSection:
            if not isinstance(value, dict):
                raise ConfigError(f"{where}.initial must be a table")
            kwargs["initial"] = _coerce_section(InitialSection, value, f"{where}.initial")
            continue
        if not hasattr(defaults, key):
            raise ConfigError(f"unknown key {where}.{key}")
        if key in _LIST_FIELDS:
            if value is not None and not isinstance(value, (list, tuple)):
                raise ConfigError(f"{where}.{key} must be a list")
            value = tuple(value) if value is not None else None
        kwargs[key] = value
    return cls(**kwargs)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object")
    sections = {}
    for key, value in data.items():
        if key not in _SECTION_TYPES:
            raise ConfigError(f"unknown section {key!r}")
        if not isinstance(value, dict):
            raise ConfigError(f"section {key!r} must be an object")
        sections[key] = _coerce_section(_SECTION_TYPES[key], value, key)
    cfg = RunConfig(**sections)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    m = cfg.model
    if m.kind not in MODEL_KINDS:
        raise ConfigError(f"model.kind must be one of {MODEL_KINDS}, got {m.kind!r}")
    if m.resolution < 4 or m.resolution % 2:
        raise ConfigError("model.resolution must be even and >= 4")
    if m.initial.space not in _SPACE_ORDER:
        raise ConfigError(f"model.initial.space must be one of {_SPACE_ORDER}")
    if cfg.noise.case not in CASE_NOISE_SPACE:
        raise ConfigError("noise.case must be I, II or III")
    if cfg.stepper.scheme not in SCHEMES:
        raise ConfigError(f"stepper.scheme must be one of {SCHEMES}")
    if cfg.stepper.dt <= 0:
        raise ConfigError("stepper.dt must be positive")

    # case table: required initial space per noise case
    if cfg.noise.theta > 0 or cfg.noise.advisor:
        required = {"I": "F0", "II": "D", "III": "F1"}[cfg.noise.case]
        declared = m.initial.space
        if _SPACE_ORDER.index(declared) < _SPACE_ORDER.index(required):
            raise ConfigError(
                f"noise.case {cfg.noise.case} requires initial data in {required}; "
                f"model.initial.space declares only {declared}"
            )

    cutoff_limit = m.resolution // 3
    for d in cfg.ensemble.d_list:
        if d > cutoff_limit:
            raise ConfigError(
                f"ensemble.d_list entry {d} exceeds the dealiased closure limit "
                f"resolution//3 = {cutoff_limit}"
            )
    if list(cfg.ensemble.d_list) != sorted(cfg.ensemble.d_list):
        raise ConfigError("ensemble.d_list must be increasing")
    if cfg.control.enabled and math.isfinite(cfg.control.K):
        if math.exp(cfg.control.K) <= cfg.control.C:
            raise ConfigError("control.K must satisfy exp(K) > C")


def serialize_config(cfg: RunConfig) -> str:
    """Canonical JSON (sorted keys); parse(serialize(cfg)) == cfg."""

    def clean(obj):
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in sorted(obj.items())}
        if isinstance(obj, tuple):
            return [clean(v) for v in obj]
        return obj

    return json.dumps(clean(asdict(cfg)), indent=2, sort_keys=True)


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode()).hexdigest()[:12]


# --- materialising runtime objects from the config ---------------------------


def build_grid(cfg: RunConfig) -> TorusGrid:
    from .models import _KIND_DIM

    return TorusGrid(_KIND_DIM[cfg.model.kind], cfg.model.resolution)


def build_drift(cfg: RunConfig) -> DriftOperator:
    m = cfg.model
    params = ModelParams(
        nu=m.nu,
        eta=m.eta,
        f_coriolis=m.f_coriolis,
        rossby=m.rossby,
        froude=m.froude,
        epsilon_sobolev=m.epsilon_sobolev,
    )
    ladder = SpaceLadder(*m.ladder) if m.ladder is not None else default_ladder(m.kind, params)
    return DriftOperator(m.kind, params, ladder)


def build_stepper(cfg: RunConfig, save_stride: int | None = None) -> StepperConfig:
    s = cfg.stepper
    return StepperConfig(
        scheme=s.scheme,
        dt=s.dt,
        t_end=s.t_end,
        dt_min=s.dt * 2.0**-s.dt_min_exponent,
        adapt=s.adapt,
        growth_trigger=s.growth_trigger,
        stiff_cap=s.stiff_cap,
        blowup_threshold=s.blowup_threshold,
        save_stride=save_stride if save_stride is not None else s.save_stride,
        mart_epsilon=s.mart_epsilon,
    )


def build_schedule(cfg: RunConfig) -> ControlSchedule | None:
    if not cfg.control.enabled:
        return None
    return ControlSchedule(
        K=cfg.control.K,
        C=cfg.control.C,
        max_stochastic_duration=cfg.control.max_stochastic_duration,
    )


class InitialBuilder:
    """Picklable initial-state factory resolved from the config."""

    def __init__(self, model: ModelSection):
        self.section = model.initial
        self.components = {
            "Burgers1D": 1,
            "Burgers2D": 2,
            "RSW_Viscous": 3,
            "RSW_Inviscid": 3,
            "Vorticity2D": 1,
            "Vorticity3D": 3,
            "Heat1D": 1,
        }[model.kind]
        self.kind = model.kind

    def __call__(self, grid: TorusGrid) -> SpectralField:
        import numpy as np

        from .models import _leray_project
        from .spectral import random_field

        init = self.section
        if init.kind == "sine":
            coords = grid.coordinates()
            phys = init.amplitude * np.sin(coords[0])
            shape = (self.components,) + tuple(grid.n for _ in range(grid.dim))
            values = np.zeros(shape)
            values[0] = phys + np.zeros(tuple(grid.n for _ in range(grid.dim)))
            return SpectralField.from_physical(grid, values)
        if init.kind == "random":
            zero_mean = self.kind.startswith("Vorticity")
            f = random_field(
                grid,
                self.components,
                init.decay_exponent,
                init.amplitude,
                init.seed,
                zero_mean=zero_mean,
            )
            if self.kind == "Vorticity3D":
                f = _leray_project(f)
            return f
        if init.kind == "rest_height":
            # small random velocity over a positive mean height column
            f = random_field(grid, self.components, init.decay_exponent, init.amplitude, init.seed)
            f.coeffs[2, (0,) * grid.dim] = init.mean_height
            return f
        raise ConfigError(f"unknown initial kind {init.kind!r}")


def build_noise(cfg: RunConfig, drift: DriftOperator | None = None) -> NoiseSpec | None:
    n = cfg.noise
    if n.advisor:
        from .experiments import assumption_audit
        from .noise import theta_advisor

        drift = drift or build_drift(cfg)
        constants, report = assumption_audit(drift, n_samples=200, seed=cfg.ensemble.base_seed)
        if n.case == "III":
            constants = type(constants)(**{**constants.as_dict(), "C1": report["C13"]})
        advised = theta_advisor(
            n.case, constants, n.advisor_epsilon, level=n.advisor_level
        )
        return advised.spec()
    if n.theta == 0.0:
        return None
    return NoiseSpec(
        theta=n.theta,
        alpha=n.alpha,
        norm_space=CASE_NOISE_SPACE[n.case],
        case_label=n.case,
    )
