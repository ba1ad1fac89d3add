"""Growth and environment h-functions, theta-expressions and coupling rules.

Every density in this package has the form ``exp(-h/theta)``.  A growth model
supplies ``h(x)`` for the population density ``x > 0``; an environment model
supplies ``h*(y)`` for the environment variable ``y``.  All objects are frozen
and all functions are pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "GrowthModel", "Logistic", "Gompertz",
    "EnvironmentModel", "Gaussian", "SymmetricBimodal", "AsymmetricBimodal",
    "CouplingRule", "Fixed", "HeavisideShift",
    "h", "h_prime", "h_second", "theta_population", "theta_env_general",
    "hermite", "theta_rodrigues_population", "invariant_density_log",
    "effective_K", "integral_of_motion",
]


def _check_positive(x, name="x"):
    if np.any(np.asarray(x) <= 0) or np.any(np.isnan(x)):
        raise ValueError(f"{name} must be > 0, got {x!r}")


# ---------------------------------------------------------------------------
# growth models


@dataclass(frozen=True)
class GrowthModel:
    K: float = 1.0

    kind = "abstract"
    code = -1

    def __post_init__(self):
        if not (self.K > 0 and math.isfinite(self.K)):
            raise ValueError(f"K must be a finite positive number, got {self.K!r}")

    def h(self, x):
        raise NotImplementedError

    def dh(self, x):
        raise NotImplementedError

    def d2h(self, x):
        raise NotImplementedError

    def to_dict(self):
        return {"kind": self.kind, "K": self.K}


@dataclass(frozen=True)
class Logistic(GrowthModel):
    """Logistic h-function ``x/K - ln x``; its density is a Gamma law."""

    kind = "logistic"
    code = 0

    def h(self, x):
        return x / self.K - np.log(x)

    def dh(self, x):
        return 1.0 / self.K - 1.0 / x

    def d2h(self, x):
        return 1.0 / (x * x)


@dataclass(frozen=True)
class Gompertz(GrowthModel):
    """Gompertz h-function ``0.5 * ln(x/K)**2``.

    The prefactor is 1/2 (not 1/(2K)) so that ``x h'(x) = ln(x/K)``, which is
    the form entering the stochastic Gompertz system.
    """

    kind = "gompertz"
    code = 1

    def h(self, x):
        return 0.5 * np.log(x / self.K) ** 2

    def dh(self, x):
        return np.log(x / self.K) / x

    def d2h(self, x):
        return (1.0 - np.log(x / self.K)) / (x * x)


# ---------------------------------------------------------------------------
# environment models


@dataclass(frozen=True)
class EnvironmentModel:
    kind = "abstract"
    code = -1

    def h(self, y):
        raise NotImplementedError

    def dh(self, y):
        raise NotImplementedError

    def d2h(self, y):
        raise NotImplementedError

    def params(self):
        """Two kernel parameters; meaning depends on the variant."""
        return 0.0, 0.0

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class Gaussian(EnvironmentModel):
    kind = "gaussian"
    code = 0

    def h(self, y):
        return 0.5 * y * y

    def dh(self, y):
        return y

    def d2h(self, y):
        return np.ones_like(y) if isinstance(y, np.ndarray) else 1.0


@dataclass(frozen=True)
class SymmetricBimodal(EnvironmentModel):
    """Double well with minima at ``+-sqrt(m)`` and a barrier at 0."""

    m: float = 0.5

    kind = "symmetric_bimodal"
    code = 1

    def __post_init__(self):
        if not (self.m > 0 and math.isfinite(self.m)):
            raise ValueError(f"m must be > 0, got {self.m!r}")

    def h(self, y):
        y2 = y * y
        return 0.25 * y2 * y2 - 0.5 * self.m * y2

    def dh(self, y):
        return y * (y * y - self.m)

    def d2h(self, y):
        return 3.0 * y * y - self.m

    def params(self):
        return float(self.m), 0.0

    def to_dict(self):
        return {"kind": self.kind, "m": self.m}


@dataclass(frozen=True)
class AsymmetricBimodal(EnvironmentModel):
    """Wells at 0 and 1 separated by a barrier at the detuning ``a``."""

    D: float = 4.0
    a: float = 0.25

    kind = "asymmetric_bimodal"
    code = 2

    def __post_init__(self):
        if not (self.D > 0 and math.isfinite(self.D)):
            raise ValueError(f"D must be > 0, got {self.D!r}")
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"a must lie in (0, 1), got {self.a!r}")

    def h(self, y):
        a = self.a
        return self.D * (y**4 / 4.0 - (1.0 + a) * y**3 / 3.0 + a * y * y / 2.0)

    def dh(self, y):
        return self.D * y * (y - self.a) * (y - 1.0)

    def d2h(self, y):
        a = self.a
        return self.D * (3.0 * y * y - 2.0 * (1.0 + a) * y + a)

    def params(self):
        return float(self.D), float(self.a)

    def to_dict(self):
        return {"kind": self.kind, "D": self.D, "a": self.a}


# ---------------------------------------------------------------------------
# carrying-capacity coupling


@dataclass(frozen=True)
class CouplingRule:
    kind = "abstract"
    code = -1

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class Fixed(CouplingRule):
    """No coupling: the growth model's own K is used."""

    kind = "fixed"
    code = 0


@dataclass(frozen=True)
class HeavisideShift(CouplingRule):
    """``K[y] = base + increment * H(y - threshold)`` with ``H(0) = 1``."""

    threshold: float = 0.0
    base: float = 1.0
    increment: float = 1.0

    kind = "heaviside_shift"
    code = 1

    def __post_init__(self):
        if not self.base > 0 or not self.base + self.increment > 0:
            raise ValueError("HeavisideShift must keep K positive on both sides")

    def to_dict(self):
        return {"kind": self.kind, "threshold": self.threshold,
                "base": self.base, "increment": self.increment}


_REGISTRY = {cls.kind: cls for cls in (
    Logistic, Gompertz, Gaussian, SymmetricBimodal, AsymmetricBimodal,
    Fixed, HeavisideShift)}


def from_dict(d):
    """Rebuild any model, environment or rule from its ``to_dict`` form."""
    d = dict(d)
    cls = _REGISTRY[d.pop("kind")]
    return cls(**d)


# ---------------------------------------------------------------------------
# functional interface


def h(model: GrowthModel, x):
    _check_positive(x)
    return model.h(x)


def h_prime(model: GrowthModel, x):
    _check_positive(x)
    return model.dh(x)


def h_second(model: GrowthModel, x):
    _check_positive(x)
    return model.d2h(x)


def theta_population(model: GrowthModel, x, theta):
    """``x h'(x) - theta``: zero mean under ``exp(-h/theta)``."""
    _check_positive(x)
    return x * model.dh(x) - theta


def theta_env_general(env: EnvironmentModel, y, theta, lam, gamma):
    """Environment theta-expression ``lam*theta*h*' - gamma*(h*'^2 - theta*h*'')``."""
    d1 = env.dh(y)
    return lam * theta * d1 - gamma * (d1 * d1 - theta * env.d2h(y))


def hermite(n: int, y, theta):
    """Chebyshev-Hermite polynomial He_n(y; theta) by three-term recurrence."""
    if n < 0:
        raise ValueError("n must be >= 0")
    prev = np.ones_like(y, dtype=float) if isinstance(y, np.ndarray) else 1.0
    if n == 0:
        return prev
    cur = y
    for k in range(1, n):
        prev, cur = cur, y * cur - k * theta * prev
    return cur


def theta_rodrigues_population(model: GrowthModel, phi: Callable, dphi: Callable, x, theta):
    """First Rodrigues-type expression ``phi(x) h'(x) - phi'(x) theta``."""
    _check_positive(x)
    return phi(x) * model.dh(x) - dphi(x) * theta


def invariant_density_log(model: GrowthModel, env: EnvironmentModel, x, y, theta):
    """Unnormalised log of the joint invariant density."""
    _check_positive(x)
    if not theta > 0:
        raise ValueError("theta must be > 0 for density evaluation")
    return -(model.h(x) + env.h(y)) / theta


def effective_K(rule: CouplingRule, y, base_K: float = 1.0):
    """Carrying capacity seen by the population at environment state ``y``.

    ``base_K`` is returned for :class:`Fixed`; a :class:`HeavisideShift`
    carries its own base.
    """
    if isinstance(rule, HeavisideShift):
        return rule.base + rule.increment * np.where(np.asarray(y) >= rule.threshold, 1.0, 0.0)[()]
    return base_K if np.ndim(y) == 0 else np.full(np.shape(y), float(base_K))


def integral_of_motion(model: GrowthModel, env: EnvironmentModel, x, y, theta):
    """``h(x) - theta ln x + h*(y)``, conserved by the noise-free gamma=0 flow."""
    _check_positive(x)
    return model.h(x) - theta * np.log(x) + env.h(y)
