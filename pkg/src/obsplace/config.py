"""Experiment configuration, presets, and the run manifest.

Configurations are plain INI files with one section per pipeline stage.  The
canonical serialization is stable (sorted keys, fixed formatting), so a
config's identity is the hash of its canonical text; artifacts record the
hash of the sections they depend on and refuse to be reused against a
different configuration.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .bayes import GaussianPrior
from .greedy import GreedyConfig
from .model import sample_hyper_grid
from .sensors import build_library
from .thermal import ThermalBlockConfig, assemble_thermal_block


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ModelSection:
    mesh_n: int = 65
    theta_min: float = 0.1
    theta_max: float = 10.0
    pinned_subdomain: int = 2


@dataclass(frozen=True)
class LibrarySection:
    grid_n: int = 25
    bound_lo: float = 0.02
    bound_hi: float = 0.98
    std: float = 0.01


@dataclass(frozen=True)
class NoiseSection:
    sigma: float = 0.01
    mode: str = "riesz"  # "riesz" | "identity"


@dataclass(frozen=True)
class PriorSection:
    mean: tuple = (1.0, 0.0, 0.0, 0.0)
    cov_diag: tuple | None = None  # None means the identity


@dataclass(frozen=True)
class RBSection:
    eps_target: float = 0.01
    train_n: int = 7
    train_log: bool = True
    n_max: int = 80


@dataclass(frozen=True)
class GreedySection:
    beta_target: float = 0.5
    k_max: int = 16
    criterion: str = "both"  # "beta" | "beta2" | "both"
    theta_start: tuple | None = None  # None: training point nearest the log-center
    pair_stride: int = 2


@dataclass(frozen=True)
class BaselinesSection:
    n_sets: int = 50
    seed: int = 2024
    n_inflow_min: int = 4


@dataclass(frozen=True)
class EvaluationSection:
    test_n: int = 21
    test_log: bool = True


@dataclass(frozen=True)
class OutputSection:
    dir: str = "runs/desk"


_SECTIONS = {
    "model": ModelSection,
    "library": LibrarySection,
    "noise": NoiseSection,
    "prior": PriorSection,
    "rb": RBSection,
    "greedy": GreedySection,
    "baselines": BaselinesSection,
    "evaluation": EvaluationSection,
    "output": OutputSection,
}


def _format_value(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)  # shortest exact round-trip form
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _field_kind(f) -> str:
    """Parse target of a section field: 'int', 'float', 'bool', 'str' or 'tuple'."""
    t = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    if "tuple" in t:
        return "tuple"
    for kind in ("bool", "int", "float", "str"):
        if kind in t:
            return kind
    raise TypeError(f"unsupported config field type {t!r}")


def _parse_value(text: str, kind: str, name: str):
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse number {name} = {text!r}") from exc
    if kind == "bool":
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"cannot parse boolean {name} = {text!r}")
    if kind == "str":
        return text
    # tuple fields accept "auto"/"identity" as the unset marker
    if text.lower() in ("auto", "identity", "none", ""):
        return None
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {name} = {text!r}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSection = field(default_factory=ModelSection)
    library: LibrarySection = field(default_factory=LibrarySection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    prior: PriorSection = field(default_factory=PriorSection)
    rb: RBSection = field(default_factory=RBSection)
    greedy: GreedySection = field(default_factory=GreedySection)
    baselines: BaselinesSection = field(default_factory=BaselinesSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    output: OutputSection = field(default_factory=OutputSection)

    def __post_init__(self):
        if self.noise.sigma <= 0:
            raise ConfigError("noise sigma must be positive")
        if self.noise.mode not in ("riesz", "identity"):
            raise ConfigError("noise mode must be 'riesz' or 'identity'")
        if not 0.0 < self.rb.eps_target < 1.0:
            raise ConfigError("rb eps_target must lie in (0, 1)")
        if self.greedy.criterion not in ("beta", "beta2", "both"):
            raise ConfigError("greedy criterion must be 'beta', 'beta2' or 'both'")
        if len(self.prior.mean) != 4:
            raise ConfigError("prior mean must have 4 entries (flux degrees 0..3)")
        if self.prior.cov_diag is not None and len(self.prior.cov_diag) != 4:
            raise ConfigError("prior cov_diag must have 4 entries")

    # -- serialization ----------------------------------------------------

    def to_text(self) -> str:
        lines = []
        for sec_name, section in self.sections().items():
            lines.append(f"[{sec_name}]")
            for f in fields(section):
                lines.append(f"{f.name} = {_format_value(getattr(section, f.name))}")
            lines.append("")
        return "\n".join(lines)

    def sections(self) -> dict:
        return {name: getattr(self, name) for name in _SECTIONS}

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
        kwargs = {}
        for sec_name, sec_cls in _SECTIONS.items():
            if not parser.has_section(sec_name):
                kwargs[sec_name] = sec_cls()
                continue
            sec_kwargs = {}
            known = {f.name: f for f in fields(sec_cls)}
            for key, raw in parser.items(sec_name):
                if key not in known:
                    raise ConfigError(f"unknown key [{sec_name}] {key}")
                kind = _field_kind(known[key])
                sec_kwargs[key] = _parse_value(raw, kind, f"[{sec_name}] {key}")
            try:
                kwargs[sec_name] = sec_cls(**sec_kwargs)
            except TypeError as exc:
                raise ConfigError(f"bad section [{sec_name}]: {exc}") from exc
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                return cls.from_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_text())

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def rb_hash(self) -> str:
        """Hash of the sections an RB artifact depends on."""
        text = "\n".join(
            f"[{name}]\n" + "\n".join(
                f"{f.name} = {_format_value(getattr(getattr(self, name), f.name))}"
                for f in fields(getattr(self, name))
            )
            for name in ("model", "library", "noise", "rb")
        )
        return hashlib.sha256(text.encode()).hexdigest()

    # -- builders ----------------------------------------------------------

    def build_model(self):
        try:
            return assemble_thermal_block(
                ThermalBlockConfig(
                    mesh_n=self.model.mesh_n,
                    fixed_conductivity_subdomain=self.model.pinned_subdomain,
                    theta_min=self.model.theta_min,
                    theta_max=self.model.theta_max,
                )
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_library(self, model):
        return build_library(
            self.library.grid_n,
            (self.library.bound_lo, self.library.bound_hi),
            self.library.std,
            model,
            noise_mode=self.noise.mode,
        )

    def build_prior(self) -> GaussianPrior:
        mean = np.asarray(self.prior.mean, dtype=float)
        if self.prior.cov_diag is None:
            cov = np.eye(mean.size)
        else:
            cov = np.diag(np.asarray(self.prior.cov_diag, dtype=float))
        return GaussianPrior(mean=mean, cov=cov)

    def xi_train(self, model) -> np.ndarray:
        return sample_hyper_grid(model.hyper_domain, self.rb.train_n, self.rb.train_log)

    def xi_test(self, model) -> np.ndarray:
        return sample_hyper_grid(model.hyper_domain, self.evaluation.test_n, self.evaluation.test_log)

    def theta_start(self, xi_train: np.ndarray) -> np.ndarray:
        if self.greedy.theta_start is not None:
            target = np.asarray(self.greedy.theta_start, dtype=float)
            match = [row for row in xi_train if np.allclose(row, target, rtol=1e-10)]
            if not match:
                raise ConfigError("greedy theta_start is not a training-grid point")
            return match[0]
        center = np.exp(
            0.5 * (np.log(xi_train.min(axis=0)) + np.log(xi_train.max(axis=0)))
        )
        return xi_train[int(np.argmin(np.linalg.norm(np.log(xi_train) - np.log(center), axis=1)))]

    def greedy_config(self, xi_train: np.ndarray, criterion: str) -> GreedyConfig:
        return GreedyConfig(
            beta_target=self.greedy.beta_target,
            k_max=self.greedy.k_max,
            xi_train=xi_train,
            theta_start=self.theta_start(xi_train),
            criterion=criterion,
            pair_stride=self.greedy.pair_stride,
        )


def desk_config() -> ExperimentConfig:
    """Desk-scale preset: runs the full study in minutes."""
    return ExperimentConfig(output=OutputSection(dir="runs/desk"))


def paper_config() -> ExperimentConfig:
    """Full-scale preset matching the reported study shapes."""
    return ExperimentConfig(
        library=LibrarySection(grid_n=97, bound_lo=0.02, bound_hi=0.98, std=0.01),
        evaluation=EvaluationSection(test_n=41, test_log=True),
        output=OutputSection(dir="runs/paper"),
    )


@dataclass
class RunManifest:
    """Provenance record written next to every command's artifacts."""

    config_hash: str
    command: str
    seeds: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    wall_times: dict = field(default_factory=dict)
    version: str = ""
    status: str = "running"

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


class StageTimer:
    """Context manager collecting wall times into a manifest."""

    def __init__(self, manifest: RunManifest, name: str):
        self.manifest = manifest
        self.name = name

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.manifest.wall_times[self.name] = time.perf_counter() - self._t0
        return False
