"""Experiment configuration with strict JSON round-tripping."""
import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional

TASKS = ("complete", "cassi", "denoise")
LOSS_KINDS = ("sq-frobenius", "l1")
PRECISIONS = ("f64", "f32")
SCHEDULES = ("constant", "cosine")


@dataclass
class ExperimentConfig:
    task: str = "complete"
    rank: Optional[int] = None  # None: round(min(n1, n2) / 10), at least 1
    lam: float = 1e-8
    beta: float = 0.0
    k: int = 2
    slope: float = 0.01
    lr: float = 1e-3
    lr_schedule: str = "constant"  # or "cosine": lr * (1 + cos(pi t / t_max)) / 2
    t_max: int = 3000
    seed: int = 0
    precision: str = "f64"
    loss_kind: Optional[str] = None  # None: the operator's default
    init: str = "kaiming"
    tie_transforms: bool = False
    eval_every: int = 0
    # operator parameters
    sr: Optional[float] = None
    mask: Optional[str] = None
    shift: int = 2
    bands: Optional[int] = None
    sigma: Optional[float] = None
    # paths
    input: Optional[str] = None
    output: Optional[str] = None
    truth: Optional[str] = None
    extra: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.rank is not None and self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.lam < 0 or self.beta < 0:
            raise ValueError("lam and beta must be nonnegative")
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.lr_schedule not in SCHEDULES:
            raise ValueError(f"lr_schedule must be one of {SCHEDULES}, got {self.lr_schedule!r}")
        if self.t_max < 1:
            raise ValueError(f"t_max must be >= 1, got {self.t_max}")
        if self.precision not in PRECISIONS:
            raise ValueError(f"precision must be one of {PRECISIONS}, got {self.precision!r}")
        if self.loss_kind is not None and self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if self.sr is not None and not 0.0 <= self.sr <= 1.0:
            raise ValueError(f"sr must lie in [0, 1], got {self.sr}")
        if self.shift < 1:
            raise ValueError(f"shift must be >= 1, got {self.shift}")
        if self.sigma is not None and self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if self.eval_every < 0:
            raise ValueError("eval_every must be >= 0")
        if self.extra:
            raise ValueError(f"unknown config keys: {sorted(self.extra)}")

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)} - {"extra"}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("extra")
        return d

    def replace(self, **changes):
        return self.from_dict({**self.to_dict(), **changes})

    def resolved_rank(self, shape):
        if self.rank is not None:
            return self.rank
        return max(1, round(min(shape[0], shape[1]) / 10))
