"""Run configuration: every knob of the pipeline in one serializable record.

A PipelineConfig is what the command line loads from --config, fills with
defaults, and echoes back into the output directory, so that any run can be
reproduced from its own artefacts. The nested sections reuse the dataclasses
of the modules they configure; the JSON form mirrors the field names exactly.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .classifier import ClassifierSpec
from .decision import VotingParams
from .errors import FormatError, ValidationError
from .preprocess import NormConfig
from .sampler import SamplerConfig

MAX_SEED = 2**64 - 1

CONFIG_ECHO = "effective_config.json"


def _from_fields(cls, d: Mapping[str, Any], where: str):
    # shared constructor for the flat sub-sections; unknown keys are an error
    names = {f.name for f in dataclasses.fields(cls)}
    extra = set(d) - names
    if extra:
        raise ValidationError(f"unknown {where} fields: {sorted(extra)}")
    return cls(**d)


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    workers: int = 1
    folds: int = 5
    min_severe_per_fold: int = 3
    batch_size: int = 30
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    norm: NormConfig = field(default_factory=NormConfig)
    voting: VotingParams = field(default_factory=VotingParams)
    classifiers: tuple[ClassifierSpec, ...] = ()
    data_root: str | None = None
    mask_root: str | None = None
    output_dir: str | None = None

    def __post_init__(self):
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.workers < 1:
            raise ValidationError(f"workers must be at least 1, got {self.workers}")
        if self.folds < 2:
            raise ValidationError(f"folds must be at least 2, got {self.folds}")
        if self.min_severe_per_fold < 0:
            raise ValidationError("min_severe_per_fold must be non-negative")
        object.__setattr__(self, "classifiers", tuple(self.classifiers))
        keys = [spec.key for spec in self.classifiers]
        dupes = sorted({k for k in keys if keys.count(k) > 1})
        if dupes:
            raise ValidationError(f"duplicate classifier keys: {dupes}")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "workers": self.workers,
            "folds": self.folds,
            "min_severe_per_fold": self.min_severe_per_fold,
            "batch_size": self.batch_size,
            "sampler": dataclasses.asdict(self.sampler),
            "norm": dataclasses.asdict(self.norm),
            "voting": dataclasses.asdict(self.voting),
            "classifiers": [spec.to_dict() for spec in self.classifiers],
            "data_root": self.data_root,
            "mask_root": self.mask_root,
            "output_dir": self.output_dir,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown config fields: {sorted(extra)}")
        kwargs: dict[str, Any] = {k: v for k, v in d.items() if v is not None}
        seed = int(kwargs.get("seed", 0))
        sampler = dict(d.get("sampler") or {})
        # the run seed drives the sampler unless the config pins one explicitly
        sampler.setdefault("seed", seed)
        kwargs["seed"] = seed
        kwargs["sampler"] = _from_fields(SamplerConfig, sampler, "sampler")
        kwargs["norm"] = _from_fields(NormConfig, dict(d.get("norm") or {}), "norm")
        kwargs["voting"] = _from_fields(VotingParams, dict(d.get("voting") or {}), "voting")
        kwargs["classifiers"] = tuple(
            ClassifierSpec.from_dict(s) for s in d.get("classifiers") or ()
        )
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise FormatError(f"config is not valid JSON: {e}") from e
        if not isinstance(d, dict):
            raise FormatError("config JSON must be an object")
        return cls.from_dict(d)

    def with_overrides(self, **overrides) -> "PipelineConfig":
        """A copy with the given top-level fields replaced.

        Overriding the seed re-seeds the sampler too, matching the flow of
        from_dict for a config that never pinned a sampler seed.
        """
        d = self.to_dict()
        allowed = set(d) - {"sampler", "norm", "voting", "classifiers"}
        extra = set(overrides) - allowed
        if extra:
            raise ValidationError(f"cannot override fields: {sorted(extra)}")
        d.update(overrides)
        if "seed" in overrides:
            d["sampler"]["seed"] = int(overrides["seed"])
        return PipelineConfig.from_dict(d)


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return PipelineConfig.from_json(path.read_text())
