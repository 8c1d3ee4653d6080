"""Bellman target transforms ``f(r, v)`` and non-linear discount functions.

Five target families are supported:

* ``linear``            ``r + gamma * v``
* ``reward_transform``  ``g(r) + gamma * v`` with the hyperbolic-equivalent
                        reward transform ``g``
* ``value_discount``    ``r + g_gamma(v)`` with a linear or power discount
* ``squash``            ``h(r + gamma * h^-1(v))``
* ``hdtd``              ``(r + v) / (1 + k v)``

All evaluation functions accept scalars or numpy arrays.

Note on the hyperbolic-equivalent transform: the closed form
``r_ref * exp(eta * (R / r_ref - 1))`` is not zero at ``R = 0``, but the
sparse-reward ordering argument needs ``g(0) = 0`` (otherwise every zero
reward before the terminal one contributes). ``g`` is therefore defined
piecewise with ``g(0) = 0`` exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

HDTD_POLE_TOL = 1e-9
UNKNOWN = float("nan")
"""Sentinel returned by :func:`lipschitz_bound` when no bound is known."""


class HdtdSingularity(ArithmeticError):
    pass


class Kind(str, enum.Enum):
    LINEAR = "linear"
    REWARD_TRANSFORM = "reward_transform"
    VALUE_DISCOUNT = "value_discount"
    SQUASH = "squash"
    HDTD = "hdtd"


class Family(str, enum.Enum):
    LINEAR = "linear"
    POWER = "power"


@dataclass(frozen=True)
class DiscountFunction:
    family: Family = Family.POWER
    gamma: float = 0.9
    kappa: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa}")

    def __call__(self, v):
        return discount_apply(self, v)


@dataclass(frozen=True)
class TransformSpec:
    kind: Kind
    gamma: float = 0.9
    k: float = 1.0
    kappa: float = 1.0
    r_ref: float = 1.0
    squash_eps: float = 1e-2
    family: Family = Family.POWER

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "family", Family(self.family))
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.k <= 0:
            raise ValueError(f"k must be positive, got {self.k}")
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa}")
        if self.r_ref == 0:
            raise ValueError("r_ref must be non-zero")
        if self.squash_eps < 0:
            raise ValueError("squash_eps must be non-negative")
        if self.kind is Kind.REWARD_TRANSFORM and not 0.0 < self.gamma < 1.0:
            raise ValueError("the hyperbolic-equivalent transform needs gamma in (0, 1)")

    @classmethod
    def linear(cls, gamma: float) -> "TransformSpec":
        return cls(Kind.LINEAR, gamma=gamma)

    @classmethod
    def reward_transform(cls, gamma: float, k: float, r_ref: float = 1.0) -> "TransformSpec":
        return cls(Kind.REWARD_TRANSFORM, gamma=gamma, k=k, r_ref=r_ref)

    @classmethod
    def power(cls, gamma: float, kappa: float = 1.0) -> "TransformSpec":
        return cls(Kind.VALUE_DISCOUNT, gamma=gamma, kappa=kappa, family=Family.POWER)

    @classmethod
    def linear_discount(cls, gamma: float, kappa: float = 1.0) -> "TransformSpec":
        return cls(Kind.VALUE_DISCOUNT, gamma=gamma, kappa=kappa, family=Family.LINEAR)

    @classmethod
    def squash(cls, gamma: float, eps: float = 1e-2) -> "TransformSpec":
        return cls(Kind.SQUASH, gamma=gamma, squash_eps=eps)

    @classmethod
    def hdtd(cls, k: float) -> "TransformSpec":
        return cls(Kind.HDTD, k=k)

    @property
    def eta(self) -> float:
        return -math.log(self.gamma) / self.k if self.gamma > 0 else math.inf

    @property
    def discount(self) -> DiscountFunction:
        return DiscountFunction(self.family, self.gamma, self.kappa)

    @property
    def nonexpansion_only(self) -> bool:
        """True when the target is only guaranteed to be a non-expansion."""
        return self.kind is Kind.VALUE_DISCOUNT and self.kappa == 1.0


def hyperbolic_equivalent_g(spec: TransformSpec, R):
    """Reward transform whose geometric return orders sparse rewards hyperbolically."""
    r = spec.r_ref
    R = np.asarray(R, dtype=float)
    with np.errstate(over="ignore"):
        out = np.where(R == 0.0, 0.0, r * np.exp(spec.eta * (R / r - 1.0)))
    return out[()] if out.ndim == 0 else out


def discount_apply(d: DiscountFunction, v):
    v = np.asarray(v, dtype=float)
    if d.family is Family.LINEAR:
        out = d.kappa * d.gamma * v
    elif d.gamma == 1.0:
        out = d.kappa * v
    else:
        # expm1/log1p keeps precision for small |v|
        out = d.kappa * np.sign(v) * np.expm1(d.gamma * np.log1p(np.abs(v)))
    return out[()] if out.ndim == 0 else out


def discount_derivative(d: DiscountFunction, v):
    v = np.asarray(v, dtype=float)
    if d.family is Family.LINEAR:
        out = np.full_like(v, d.kappa * d.gamma)
    else:
        out = d.kappa * d.gamma * (np.abs(v) + 1.0) ** (d.gamma - 1.0)
    return out[()] if out.ndim == 0 else out


def _squash(x, eps):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    # sqrt(|x|+1) - 1 written without cancellation
    out = np.sign(x) * ax / (np.sqrt(ax + 1.0) + 1.0) + eps * x
    return out[()] if out.ndim == 0 else out


def _unsquash(y, eps):
    y = np.asarray(y, dtype=float)
    ay = np.abs(y)
    if eps == 0:
        out = np.sign(y) * ay * (ay + 2.0)
    else:
        # u = sqrt(|x|+1) solves eps*u^2 + u - (1 + eps + |y|) = 0; |x| = (u-1)(u+1)
        c = 1.0 + eps + ay
        root = np.sqrt(1.0 + 4.0 * eps * c)
        u_minus_1 = 4.0 * ay * c / ((1.0 + root) * (1.0 + 2.0 * eps + 2.0 * ay + root))
        out = np.sign(y) * u_minus_1 * (u_minus_1 + 2.0)
    return out[()] if out.ndim == 0 else out


def squash(spec: TransformSpec, x):
    """``h(x) = sign(x) (sqrt(|x| + 1) - 1) + eps x``."""
    return _squash(x, spec.squash_eps)


def unsquash(spec: TransformSpec, y):
    """Closed-form inverse of :func:`squash`."""
    return _unsquash(y, spec.squash_eps)


def eval_target(spec: TransformSpec, r, v):
    """Evaluate the TD target ``f(r, v)`` for ``spec``.

    Raises:
        HdtdSingularity: if an HDTD denominator ``1 + k v`` is within 1e-9 of 0.
    """
    kind = spec.kind
    if kind is Kind.LINEAR:
        out = np.add(r, np.multiply(spec.gamma, v))
    elif kind is Kind.REWARD_TRANSFORM:
        out = np.add(hyperbolic_equivalent_g(spec, r), np.multiply(spec.gamma, v))
    elif kind is Kind.VALUE_DISCOUNT:
        out = np.add(r, discount_apply(spec.discount, v))
    elif kind is Kind.SQUASH:
        out = squash(spec, np.add(r, spec.gamma * unsquash(spec, v)))
    else:
        denom = np.add(1.0, np.multiply(spec.k, v))
        if np.any(np.abs(denom) <= HDTD_POLE_TOL):
            raise HdtdSingularity(f"HDTD target singular: 1 + k*v within {HDTD_POLE_TOL} of 0")
        out = np.add(r, v) / denom
    out = np.asarray(out, dtype=float)
    return out[()] if out.ndim == 0 else out


def lipschitz_bound(spec: TransformSpec) -> float:
    """Analytic bound on ``|df/dv|``; :data:`UNKNOWN` (NaN) for HDTD."""
    kind = spec.kind
    if kind in (Kind.LINEAR, Kind.REWARD_TRANSFORM):
        return spec.gamma
    if kind is Kind.VALUE_DISCOUNT:
        # both families attain their largest slope at v = 0
        return float(discount_derivative(spec.discount, 0.0))
    if kind is Kind.SQUASH:
        eps = spec.squash_eps
        h_slope = 0.5 + eps
        hinv_slope = 1.0 / eps if eps > 0 else math.inf
        return h_slope * spec.gamma * hinv_slope
    return UNKNOWN


def is_unknown(bound: float) -> bool:
    return math.isnan(bound)
