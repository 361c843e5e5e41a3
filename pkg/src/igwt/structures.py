"""Mean and variance structures and the full generation-dependent model."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .errors import InvalidParameterError
from .offspring import Family, MomentPair, from_moments

__all__ = [
    "StructureKind",
    "StructureSpec",
    "ModelSpec",
    "eval_structure",
    "finiteness_certificate",
    "finiteness_check",
    "tail_sup",
    "moments_at",
    "family_at",
    "native_at",
    "grid_model",
    "GRID_PHI",
    "GRID_PSI",
]

# Point estimates of the fitted Danish low-voltage grid model.
GRID_PHI = (3.94, 1.16, 0.654, 0.613)
GRID_PSI = (3.35, 0.958)


class StructureKind(enum.Enum):
    CONSTANT = "constant"
    EXP = "exp"
    ANCHORED_EXP = "anchored_exp"
    ANCHORED_EXP_CONST = "anchored_exp_const"

    @property
    def n_params(self) -> int:
        return _N_PARAMS[self]

    @classmethod
    def parse(cls, value) -> "StructureKind":
        if isinstance(value, StructureKind):
            return value
        key = str(value).strip().lower().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown structure kind {value!r}") from None


_N_PARAMS = {
    StructureKind.CONSTANT: 1,
    StructureKind.EXP: 2,
    StructureKind.ANCHORED_EXP: 3,
    StructureKind.ANCHORED_EXP_CONST: 4,
}


@dataclass(frozen=True)
class StructureSpec:
    """A parametric sequence ``n -> value`` used for offspring means or variances.

    ``constant``            a
    ``exp``                 a * b**n
    ``anchored_exp``        a at n = 0, b * c**n afterwards
    ``anchored_exp_const``  a at n = 0, b * c**n + d afterwards
    """

    kind: StructureKind
    params: tuple[float, ...]

    def __post_init__(self):
        kind = StructureKind.parse(self.kind)
        params = tuple(float(v) for v in self.params)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", params)
        if len(params) != kind.n_params:
            raise InvalidParameterError(
                f"{kind.value} takes {kind.n_params} parameters, got {len(params)}"
            )
        if not all(v >= 0 and math.isfinite(v) for v in params):
            raise InvalidParameterError(f"structure parameters must be finite and >= 0: {params}")

    def __call__(self, n):
        return eval_structure(self, n)

    def with_params(self, params) -> "StructureSpec":
        return StructureSpec(self.kind, tuple(params))

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "params": list(self.params)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "StructureSpec":
        return cls(StructureKind.parse(data["kind"]), tuple(data["params"]))


def eval_structure(spec: StructureSpec, n):
    """Value of the structure at generation ``n`` (scalar or integer array)."""
    scalar = np.ndim(n) == 0
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValueError("generation index must be non-negative")
    nf = n.astype(float)
    kind, theta = spec.kind, spec.params
    with np.errstate(over="ignore"):
        if kind is StructureKind.CONSTANT:
            out = np.full(nf.shape, theta[0])
        elif kind is StructureKind.EXP:
            out = theta[0] * np.power(theta[1], nf)
        elif kind is StructureKind.ANCHORED_EXP:
            out = np.where(n == 0, theta[0], theta[1] * np.power(theta[2], nf))
        else:
            out = np.where(n == 0, theta[0], theta[1] * np.power(theta[2], nf) + theta[3])
    return float(out) if scalar else out


def _exp_tail(scale: float, rate: float, offset: float = 0.0):
    """Certificate for ``scale * rate**n + offset`` over n >= 1, or None."""
    if offset >= 1.0:
        return None
    if scale == 0.0 or rate == 0.0:
        return 0, offset
    if rate < 1.0:
        # first n >= 1 where scale * rate**n + offset drops below the midpoint
        c = 0.5 * (1.0 + offset)
        if scale * rate + offset <= c:
            return 0, c
        n = max(1, math.ceil(math.log((c - offset) / scale) / math.log(rate)))
        while scale * rate**n + offset > c:
            n += 1
        return n - 1, c
    if rate == 1.0 and scale + offset < 1.0:
        return 0, scale + offset
    return None


def finiteness_certificate(mean: StructureSpec):
    """``(n_tilde, c)`` with ``mu_n <= c < 1`` for all ``n > n_tilde``, or None.

    The condition is sufficient for almost-sure finiteness but not necessary,
    so None means "not certified" rather than "infinite".
    """
    kind, theta = mean.kind, mean.params
    if kind is StructureKind.CONSTANT:
        return (0, theta[0]) if theta[0] < 1.0 else None
    if kind is StructureKind.EXP:
        cert = _exp_tail(theta[0], theta[1])
    elif kind is StructureKind.ANCHORED_EXP:
        cert = _exp_tail(theta[1], theta[2])
    else:
        cert = _exp_tail(theta[1], theta[2], theta[3])
    if cert is None:
        return None
    n_tilde, c = cert
    if kind is not StructureKind.EXP:
        n_tilde = max(n_tilde, 0)
    return n_tilde, c


def finiteness_check(mean: StructureSpec) -> bool:
    return finiteness_certificate(mean) is not None


def tail_sup(mean: StructureSpec, n: int) -> float:
    """``sup_{k >= n} mu_k`` for a certified mean structure and ``n >= 1``.

    Every certified kind is non-increasing from generation 1 on, so the
    supremum is attained at ``n`` itself.
    """
    if finiteness_certificate(mean) is None:
        raise ValueError("tail supremum is only available for certified structures")
    return eval_structure(mean, max(int(n), 1))


@dataclass(frozen=True)
class ModelSpec:
    """Offspring family per generation plus mean and variance structures."""

    default_family: Family
    mean: StructureSpec
    variance: StructureSpec
    family_overrides: Mapping[int, Family] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "default_family", Family.parse(self.default_family))
        overrides = {int(k): Family.parse(v) for k, v in dict(self.family_overrides).items()}
        if any(k < 0 for k in overrides):
            raise InvalidParameterError("family override generations must be non-negative")
        object.__setattr__(self, "family_overrides", MappingProxyType(dict(sorted(overrides.items()))))

    def __hash__(self):
        return hash((self.default_family, self.mean, self.variance,
                     tuple(self.family_overrides.items())))

    def __eq__(self, other):
        if not isinstance(other, ModelSpec):
            return NotImplemented
        return (self.default_family == other.default_family and self.mean == other.mean
                and self.variance == other.variance
                and dict(self.family_overrides) == dict(other.family_overrides))

    @property
    def theta(self) -> tuple[float, ...]:
        return self.mean.params + self.variance.params

    def with_theta(self, theta) -> "ModelSpec":
        theta = tuple(theta)
        k = self.mean.kind.n_params
        return replace(self, mean=self.mean.with_params(theta[:k]),
                       variance=self.variance.with_params(theta[k:]))

    def to_dict(self) -> dict:
        return {
            "default_family": self.default_family.value,
            "family_overrides": {str(k): v.value for k, v in self.family_overrides.items()},
            "mean": self.mean.to_dict(),
            "variance": self.variance.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelSpec":
        return cls(
            default_family=Family.parse(data["default_family"]),
            family_overrides={int(k): Family.parse(v)
                              for k, v in (data.get("family_overrides") or {}).items()},
            mean=StructureSpec.from_dict(data["mean"]),
            variance=StructureSpec.from_dict(data["variance"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))


def family_at(model: ModelSpec, n: int) -> Family:
    return model.family_overrides.get(int(n), model.default_family)


def moments_at(model: ModelSpec, n: int) -> MomentPair:
    return MomentPair(eval_structure(model.mean, n), eval_structure(model.variance, n))


def native_at(model: ModelSpec, n: int):
    """Native parameters of generation ``n``; raises if the moments are infeasible."""
    return from_moments(family_at(model, n), moments_at(model, n), generation=n)


def grid_model() -> ModelSpec:
    """Poisson-zero root, geometric-zero elsewhere, with the published estimates."""
    return ModelSpec(
        default_family=Family.GEOMETRIC_ZERO,
        family_overrides={0: Family.POISSON_ZERO},
        mean=StructureSpec(StructureKind.ANCHORED_EXP_CONST, GRID_PHI),
        variance=StructureSpec(StructureKind.EXP, GRID_PSI),
    )
