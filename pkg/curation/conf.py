"""
Curation Configuration
======================

CurationConfig collects every tunable of the pipeline. Defaults come from the
CURATION settings dict (populated from environment variables in
config/settings.py); a flat key=value file can override any field.

Example config file:
    delta=0.7
    c_instance=10
    kernel=rbf
    k=2
    quota=40
"""
from pathlib import Path
from typing import List, Literal, Optional

from decouple import RepositoryEnv
from django.conf import settings
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from mil.kernels import KernelSpec
from utils.exceptions import ConfigurationError


class CurationConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    delta: float = 0.7
    c_instance: float = Field(default=10.0, gt=0)
    c_bag: float = Field(default=1.0, gt=0)
    kernel: Literal['linear', 'rbf'] = 'rbf'
    gamma: Optional[float] = Field(default=None, gt=0)
    k: int = Field(default=2, ge=1)
    xi_alpha: float = Field(default=1.0, gt=0)
    xi_beta: float = 0.0
    d_clamp: float = Field(default=1e-6, gt=0)
    salience_threshold: float = 0.7
    top_n: int = Field(default=100, ge=1)
    coverage_budget: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)

    mkl_tol: float = Field(default=1e-6, gt=0)
    cccp_tol: float = Field(default=1e-6, gt=0)
    dinkelbach_tol: float = Field(default=1e-12, gt=0)
    svm_tol: float = Field(default=1e-6, gt=0)

    max_iter: int = Field(default=20, ge=1)
    cccp_max_iter: int = Field(default=20, ge=1)
    subgradient_steps: int = Field(default=200, ge=1)
    enumeration_limit: int = Field(default=20, ge=1)
    instance_scope: Literal['auto', 'pooled', 'per_bag'] = 'auto'
    retain_top_m: Optional[int] = Field(default=None, ge=1)
    quota: Optional[int] = Field(default=None, ge=0)

    compound_k: int = Field(default=10, ge=1)
    relevance_positive: int = Field(default=500, ge=1)
    relevance_negative: int = Field(default=500, ge=1)
    train_pos: int = Field(default=75, ge=0)
    val_pos: int = Field(default=25, ge=0)
    train_neg: int = Field(default=25, ge=0)
    val_neg: int = Field(default=25, ge=0)

    xi_alpha_grid: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0])
    xi_beta_grid: List[float] = Field(default_factory=lambda: [-1.0, 0.0, 1.0])
    calibration_folds: int = Field(default=5, ge=2)
    max_workers: int = Field(default=1, ge=1)

    @field_validator('delta')
    @classmethod
    def _delta_in_range(cls, value):
        if not 0 < value <= 1:
            raise ValueError('delta must lie in (0, 1]')
        return value

    @field_validator('xi_alpha_grid')
    @classmethod
    def _positive_alphas(cls, value):
        if any(v <= 0 for v in value):
            raise ValueError('xi_alpha grid values must be positive')
        return value

    @model_validator(mode='after')
    def _gamma_only_for_rbf(self):
        if self.kernel == 'linear' and self.gamma is not None:
            raise ValueError('gamma applies to the rbf kernel only')
        return self

    @property
    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(kind=self.kernel, gamma=self.gamma)

    @classmethod
    def build(cls, **values) -> 'CurationConfig':
        try:
            return cls(**values)
        except ValidationError as exc:
            raise ConfigurationError(_describe(exc)) from exc

    @classmethod
    def from_settings(cls, **overrides) -> 'CurationConfig':
        values = dict(getattr(settings, 'CURATION', {}))
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls.build(**values)

    @classmethod
    def from_file(cls, path, **overrides) -> 'CurationConfig':
        """Overlay a flat key=value file on the settings defaults; unknown keys are errors."""
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f'config file {path} not found')
        raw = RepositoryEnv(str(path)).data
        unknown = sorted(set(raw) - set(cls.model_fields))
        if unknown:
            raise ConfigurationError(f'unknown config keys: {", ".join(unknown)}')
        values = {key: _parse_value(key, text) for key, text in raw.items()}
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls.from_settings(**values)

    @classmethod
    def load(cls, path=None, **overrides) -> 'CurationConfig':
        if path:
            return cls.from_file(path, **overrides)
        return cls.from_settings(**overrides)

    def with_overrides(self, **overrides) -> 'CurationConfig':
        values = self.model_dump()
        values.update({key: value for key, value in overrides.items() if value is not None})
        return self.build(**values)

    def snapshot(self) -> dict:
        return dict(sorted(self.model_dump().items()))


def _parse_value(key, text):
    text = text.strip()
    if key.endswith('_grid'):
        return [float(part) for part in text.split(',') if part.strip()]
    if text.lower() in ('', 'none', 'null'):
        return None
    return text


def _describe(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        location = '.'.join(str(part) for part in error['loc']) or 'config'
        parts.append(f'{location}: {error["msg"]}')
    return '; '.join(parts)
