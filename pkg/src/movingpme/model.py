"""Porous medium model: free energy, exact solutions and benchmark initial data.

The equation is ``rho_t = Laplace(rho**m)`` with ``m > 1``.  It is the
gradient flow of ``E(rho) = int f(rho)`` with ``f(rho) = rho**m / (m - 1)``;
the pressure ``f'(rho)`` vanishes wherever the density does, which is what
lets the multiplier carry a homogeneous boundary condition.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class PmeModel:
    m: float
    d: int = 1

    def __post_init__(self):
        if not self.m > 1:
            raise DomainError(f"exponent m must exceed 1, got {self.m}")
        if self.d not in (1, 2):
            raise DomainError(f"dimension must be 1 or 2, got {self.d}")

    @property
    def integer_exponent(self) -> bool:
        return float(self.m).is_integer()

    def _check(self, rho):
        # non-integer powers of negative numbers are undefined
        if not self.integer_exponent and np.any(np.asarray(rho) < 0):
            raise DomainError("negative density with non-integer exponent")

    def f(self, rho):
        """Free energy density, vectorised."""
        self._check(rho)
        return np.power(rho, self.m) / (self.m - 1)

    def fprime(self, rho):
        """Pressure ``m rho^(m-1) / (m-1)``, vectorised."""
        self._check(rho)
        return self.m * np.power(rho, self.m - 1) / (self.m - 1)


def free_energy_density(rho: float, model: PmeModel) -> float:
    if rho < 0:
        raise DomainError(f"density must be nonnegative, got {rho}")
    return float(model.f(rho))


def free_energy_density_prime(rho: float, model: PmeModel) -> float:
    if rho < 0:
        raise DomainError(f"density must be nonnegative, got {rho}")
    return float(model.fprime(rho))


@dataclass(frozen=True)
class BarenblattParams:
    """Self-similar source-type solution ``t^-a (C - k |x|^2 t^-2b)_+^(1/(m-1))``."""

    m: float
    d: int = 1
    C: float = 1.0
    alpha: float = field(init=False)
    beta: float = field(init=False)
    k: float = field(init=False)

    def __post_init__(self):
        if not self.m > 1:
            raise DomainError(f"exponent m must exceed 1, got {self.m}")
        if self.d not in (1, 2):
            raise DomainError(f"dimension must be 1 or 2, got {self.d}")
        if not self.C > 0:
            raise DomainError(f"C must be positive, got {self.C}")
        alpha = self.d / (self.d * (self.m - 1) + 2)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", alpha / self.d)
        object.__setattr__(self, "k", alpha * (self.m - 1) / (2 * self.m * self.d))

    @property
    def model(self) -> PmeModel:
        return PmeModel(self.m, self.d)


def _radius(point, d):
    point = np.asarray(point, dtype=float)
    if d == 1:
        return np.abs(point)
    return np.sqrt(np.sum(point**2, axis=-1))


def barenblatt_radial(r, t, p: BarenblattParams):
    """Barenblatt profile as a function of the distance to the origin."""
    if not t > 0:
        raise DomainError(f"time must be positive, got {t}")
    r = np.asarray(r, dtype=float)
    core = np.maximum(p.C - p.k * r**2 * t ** (-2 * p.beta), 0.0)
    out = t ** (-p.alpha) * core ** (1.0 / (p.m - 1))
    return out if out.ndim else float(out)


def barenblatt(point, t, p: BarenblattParams):
    """Evaluate the exact solution at ``point`` (scalar in 1D, ``(..., 2)`` in 2D)."""
    return barenblatt_radial(_radius(point, p.d), t, p)


def barenblatt_support_radius(t, p: BarenblattParams) -> float:
    if not t > 0:
        raise DomainError(f"time must be positive, got {t}")
    return math.sqrt(p.C / p.k) * t**p.beta


def barenblatt_norm_sq(t, p: BarenblattParams) -> float:
    """Closed form of the squared L2 norm of the exact solution over R^d."""
    from scipy.special import beta as beta_fn

    q = 2.0 / (p.m - 1)
    radius = barenblatt_support_radius(t, p)
    scale = t ** (-2 * p.alpha) * p.C**q
    if p.d == 1:
        # int_{-1}^{1} (1 - s^2)^q ds = B(1/2, q + 1)
        return scale * radius * beta_fn(0.5, q + 1)
    return scale * math.pi * radius**2 / (q + 1)


def barenblatt_mass(t, p: BarenblattParams) -> float:
    """Total mass of the exact solution (time independent)."""
    from scipy.special import beta as beta_fn

    q = 1.0 / (p.m - 1)
    radius = barenblatt_support_radius(t, p)
    scale = t ** (-p.alpha) * p.C**q
    if p.d == 1:
        return scale * radius * beta_fn(0.5, q + 1)
    return scale * math.pi * radius**2 / (q + 1)


@dataclass(frozen=True)
class WaitingTimeParams1D:
    theta: float
    m: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise DomainError(f"theta must lie in [0, 1], got {self.theta}")
        if not self.m > 1:
            raise DomainError(f"exponent m must exceed 1, got {self.m}")


def waiting_time_initial_1d(x, p: WaitingTimeParams1D):
    x = np.asarray(x, dtype=float)
    s2 = np.sin(x) ** 2
    inner = (p.m - 1) / p.m * ((1 - p.theta) * s2 + p.theta * s2**2)
    val = np.where((x >= -math.pi) & (x <= 0.0), inner ** (1.0 / (p.m - 1)), 0.0)
    # sin(-pi) is ~1e-16, not 0
    val = np.where((x == -math.pi) | (x == 0.0), 0.0, val)
    return val if val.ndim else float(val)


def critical_waiting_time(p: WaitingTimeParams1D) -> float:
    if p.theta > 0.25:
        raise DomainError(f"closed-form waiting time needs theta <= 1/4, got {p.theta}")
    return 1.0 / (2 * (p.m + 1) * (1 - p.theta))


def waiting_time_initial_2d(x, y):
    r = np.hypot(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    val = np.where(r <= math.pi, 0.5 * np.sin(r - math.pi) ** 2, 0.0)
    val = np.where(r == math.pi, 0.0, val)
    return val if val.ndim else float(val)


def horseshoe_initial(x, y):
    """Quartic bump on a horseshoe-shaped support; branches tried in order.

    The right end cap is the half disk ``y >= 0`` so that the cap continues
    the arc beyond the positive x axis, mirroring the top cap across y = x.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    q = 0.25**2
    arc = (r > 0.5) & (r < 1.0) & ((x < 0) | (y < 0))
    top = (x**2 + (y - 0.75) ** 2 <= q) & (x >= 0)
    right = ((x - 0.75) ** 2 + y**2 <= q) & (y >= 0)
    val = np.select(
        [arc, top, right],
        [
            50 * (q - (r - 0.75) ** 2) ** 2,
            50 * (q - x**2 - (y - 0.75) ** 2) ** 2,
            50 * (q - (x - 0.75) ** 2 - y**2) ** 2,
        ],
        0.0,
    )
    return val if val.ndim else float(val)


def two_peak_initial(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    val = (
        np.exp(-20 * ((x - 0.3) ** 2 + (y - 0.3) ** 2))
        + np.exp(-20 * ((x + 0.3) ** 2 + (y + 0.3) ** 2))
        + 0.001
    )
    return val if val.ndim else float(val)
