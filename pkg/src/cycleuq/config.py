"""Experiment configuration: a nested key/value tree with per-testbed
defaults, serialized as JSON. CLI flags override file values."""

import json
from dataclasses import asdict, dataclass, field, replace

from .exceptions import DataError


@dataclass(frozen=True)
class ForwardConfig:
    kernel_size: int = 15
    kernel_steps: int = 40
    n_train_kernels: int = 8
    n_test_kernels: int = 3
    kernel_mix: float = 0.3  # per-image deviation from the family core
    pool_factor: int = 4


@dataclass(frozen=True)
class SolverConfig:
    # wiener grid spans noiseless-friendly to strongly regularized
    lambda_grid: tuple = (1e-6, 1e-4, 1e-3, 3e-3, 1e-2, 3e-2)
    landweber_lambda_grid: tuple = (3e-3, 1e-2, 3e-2, 1e-1, 3e-1)
    landweber_steps: int = 40
    clamp: bool = True
    n_calibration: int = 10


@dataclass(frozen=True)
class SceneConfig:
    class_id: str = "mixed"  # one of the scene classes, or "mixed"


@dataclass(frozen=True)
class NoiseConfig:
    id_sigma_max: float = 0.01
    ood_sigma_max: float = 0.10


@dataclass(frozen=True)
class DataConfig:
    n_train_id: int = 100
    n_train_ood: int = 120
    n_test_per_level: int = 50
    n_predictor_train: int = 200
    n_predictor_test: int = 100
    n_sr_id_pristine: int = 30
    n_sr_ood: int = 120
    n_sr_test: int = 40
    n_bounds_suite: int = 50


@dataclass(frozen=True)
class ClassifierConfig:
    budget: int = 12
    ridge: float = 1e-8


_SECTIONS = {
    "forward": ForwardConfig,
    "solver": SolverConfig,
    "scene": SceneConfig,
    "noise": NoiseConfig,
    "data": DataConfig,
    "classifier": ClassifierConfig,
}


@dataclass(frozen=True)
class ExperimentConfig:
    testbed: str = "deblur"
    master_seed: int = 1234
    output_dir: str = "out"
    n_cycles: int = 5
    image_size: int = 64
    jobs: int = 1
    forward: ForwardConfig = field(default_factory=ForwardConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    data: DataConfig = field(default_factory=DataConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)

    def __post_init__(self):
        if self.testbed not in ("deblur", "sr"):
            raise DataError(f"unknown testbed {self.testbed!r}")
        if self.n_cycles < 3:
            raise DataError("n_cycles must be >= 3 for the five-feature fit")

    @classmethod
    def default(cls, testbed: str = "deblur") -> "ExperimentConfig":
        if testbed == "deblur":
            return cls(testbed="deblur", n_cycles=5)
        if testbed == "sr":
            return cls(testbed="sr", n_cycles=3, scene=SceneConfig(class_id="smooth_field"))
        raise DataError(f"unknown testbed {testbed!r}")

    def to_dict(self) -> dict:
        out = asdict(self)
        for name in ("forward", "solver", "scene", "noise", "data", "classifier"):
            section = out[name]
            for key, value in section.items():
                if isinstance(value, tuple):
                    section[key] = list(value)
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        kwargs = dict(payload)
        for name, section_cls in _SECTIONS.items():
            if name in kwargs and isinstance(kwargs[name], dict):
                section = {
                    key: tuple(value) if isinstance(value, list) else value
                    for key, value in kwargs[name].items()
                }
                kwargs[name] = section_cls(**section)
        return cls(**kwargs)

    def with_overrides(self, seed=None, out=None, jobs=None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, master_seed=int(seed))
        if out is not None:
            cfg = replace(cfg, output_dir=str(out))
        if jobs is not None:
            cfg = replace(cfg, jobs=int(jobs))
        return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return ExperimentConfig.from_dict(payload)


def save_config(path, cfg: ExperimentConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
