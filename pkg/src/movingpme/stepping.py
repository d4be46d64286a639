"""Configuration and per-step report shared by the 1D and 2D steppers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

SCHEME_KINDS = ("explicit", "implicit", "modified-explicit", "modified-implicit")


@dataclass
class SchemeConfig:
    kind: str = "implicit"
    tau: float = 1e-2
    T: float = 1.0
    t0: float = 0.0
    eps: float = 1e-6
    max_fp_iter: int = 100
    quad_order: int = 5
    strict: bool = False

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise DomainError(f"unknown scheme kind {self.kind!r}; choose from {SCHEME_KINDS}")
        if not self.tau > 0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        if not self.T >= self.t0:
            raise DomainError(f"final time {self.T} precedes start time {self.t0}")
        if not self.eps > 0:
            raise DomainError(f"eps must be positive, got {self.eps}")

    @property
    def n_steps(self) -> int:
        return int(round((self.T - self.t0) / self.tau))


@dataclass
class StepReport:
    lam: np.ndarray
    v: np.ndarray
    rho_dot: np.ndarray
    fp_iters: int
    energy_before: float
    energy_after: float
    dissipation: float
    energy_rate: float
    mass_before: float
    mass_after: float
    assumptions: object = None
    flags: list = field(default_factory=list)
    residual: float = 0.0

    @property
    def rate_residual(self) -> float:
        """Relative gap between the reconstructed energy rate and ``-2 Phi_h``."""
        scale = max(abs(self.energy_rate), 2 * abs(self.dissipation), 1e-300)
        return abs(self.energy_rate + 2 * self.dissipation) / scale
