"""Pipeline configuration document (JSON, ``version: 1``).

Unknown keys are rejected at every level; absent keys take their defaults
and are listed in :attr:`PipelineConfig.defaulted` so the CLI can report them.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .epoching import DEFAULT_LAGS_MS, DEFAULT_SIZES_S
from .errors import ValidationError
from .learn.forest import RandomForestConfig
from .learn.gbt import GbtConfig
from .learn.svm import SvmConfig
from .preprocess import PreprocessConfig

CONFIG_VERSION = 1
CLASSIFIERS = ("svm", "gbt")


@dataclass(frozen=True)
class WindowGrid:
    lags_ms: tuple = DEFAULT_LAGS_MS
    sizes_s: tuple = DEFAULT_SIZES_S

    def __post_init__(self):
        object.__setattr__(self, "lags_ms", tuple(self.lags_ms))
        object.__setattr__(self, "sizes_s", tuple(self.sizes_s))
        if not self.lags_ms or not self.sizes_s:
            raise ValidationError("windows: lags_ms and sizes_s must be non-empty")
        if any(not lag >= 0 for lag in self.lags_ms):
            raise ValidationError("windows.lags_ms must be >= 0")
        if any(not s > 0 for s in self.sizes_s):
            raise ValidationError("windows.sizes_s must be > 0")


@dataclass(frozen=True)
class EvalConfig:
    seed: int = 0
    k_folds: int = 5
    n_select: int = 50
    selection_scope: str = "per_fold"

    def __post_init__(self):
        if int(self.k_folds) != self.k_folds or self.k_folds < 2:
            raise ValidationError("eval.k_folds must be an integer >= 2")
        if int(self.n_select) != self.n_select or self.n_select < 1:
            raise ValidationError("eval.n_select must be a positive integer")
        if self.selection_scope not in ("per_fold", "global"):
            raise ValidationError("eval.selection_scope must be 'per_fold' or 'global'")


@dataclass(frozen=True)
class PipelineConfig:
    fs: float = 500.0
    preprocess: PreprocessConfig = PreprocessConfig()
    windows: WindowGrid = WindowGrid()
    classifiers: tuple = CLASSIFIERS
    forest: RandomForestConfig = RandomForestConfig()
    svm: SvmConfig = SvmConfig()
    gbt: GbtConfig = GbtConfig()
    eval: EvalConfig = EvalConfig()
    defaulted: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "classifiers", tuple(self.classifiers))
        if not self.fs > 0:
            raise ValidationError("fs must be > 0")
        if not self.classifiers or any(c not in CLASSIFIERS for c in self.classifiers):
            raise ValidationError(f"classifiers must be a non-empty subset of {list(CLASSIFIERS)}")

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object")
        doc = dict(doc)
        version = doc.pop("version", None)
        if version != CONFIG_VERSION:
            raise ValidationError(f"config version must be {CONFIG_VERSION}, got {version!r}")
        sections = {"preprocess": PreprocessConfig, "windows": WindowGrid, "forest": RandomForestConfig,
                    "svm": SvmConfig, "gbt": GbtConfig, "eval": EvalConfig}
        scalars = {"fs", "classifiers"}
        unknown = set(doc) - set(sections) - scalars
        if unknown:
            raise ValidationError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        defaulted = [k for k in sorted(scalars) if k not in doc]
        kwargs = {k: doc[k] for k in scalars if k in doc}
        for name, klass in sections.items():
            sub = doc.get(name, {})
            if not isinstance(sub, dict):
                raise ValidationError(f"config section {name!r} must be an object")
            known = {f.name for f in dataclasses.fields(klass)}
            bad = set(sub) - known
            if bad:
                raise ValidationError(f"unknown config key(s) in {name}: {', '.join(sorted(bad))}")
            defaulted += [f"{name}.{k}" for k in sorted(known - set(sub))]
            try:
                kwargs[name] = klass(**sub)
            except TypeError as exc:
                raise ValidationError(f"config section {name}: {exc}") from None
        return cls(**kwargs, defaulted=tuple(defaulted))

    @classmethod
    def load(cls, path: str | Path | None) -> "PipelineConfig":
        if path is None:
            return cls.from_dict({"version": CONFIG_VERSION})
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ValidationError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        doc = {"version": CONFIG_VERSION, "fs": self.fs, "classifiers": list(self.classifiers)}
        for name in ("preprocess", "windows", "forest", "svm", "gbt", "eval"):
            sub = dataclasses.asdict(getattr(self, name))
            doc[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in sub.items()}
        return doc
