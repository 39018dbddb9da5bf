# Closed-form rate, threshold, and lower-bound-value formulas.
#
# All logarithms are natural.  Everything here is a pure function of small
# scalars; the only inexact ingredient is log(d), evaluated once per call in
# double precision, and log(1+x) always goes through log1p.

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

__all__ = [
    "RateQuery",
    "LowerBoundQuery",
    "LowerBoundValue",
    "phi_L",
    "psi_star",
    "phi_ratio",
    "omega",
    "s_zero",
    "rho_lower_bound",
    "lower_bound_value",
]


@dataclass(frozen=True)
class RateQuery:
    """Argument triple (d, s, sigma) of the rate functions.

    Requires d >= 3 (so that log d >= 1 and the rate bracketing inequalities
    make sense), 1 <= s <= d and sigma > 0.
    """

    d: int
    s: int
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if not (isinstance(self.d, (int,)) and self.d >= 3):
            raise ValueError(f"d must be an integer >= 3: got {self.d!r}")
        if not (isinstance(self.s, (int,)) and 1 <= self.s <= self.d):
            raise ValueError(f"s must be an integer in [1, d]: got s={self.s!r}, d={self.d}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0: got {self.sigma!r}")


@dataclass(frozen=True)
class LowerBoundQuery:
    """Validity domain of the two-class testing lower bound:
    d >= 6, a in [1/4, 1/2), and d^a <= s <= d."""

    d: int
    a: float
    s: int
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if not (isinstance(self.d, (int,)) and self.d >= 6):
            raise ValueError(f"d must be an integer >= 6: got {self.d!r}")
        if not (0.25 <= self.a < 0.5):
            raise ValueError(f"a must lie in [1/4, 1/2): got {self.a!r}")
        if not (isinstance(self.s, (int,)) and 1 <= self.s <= self.d):
            raise ValueError(f"s must be an integer in [1, d]: got s={self.s!r}, d={self.d}")
        if self.s < self.d ** self.a:
            raise ValueError(f"s must be >= d^a = {self.d ** self.a:.6g}: got s={self.s}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0: got {self.sigma!r}")


class LowerBoundValue(NamedTuple):
    bound: float
    q_weight: float
    tau: float
    chi2_bound: float


def _log_base(d: int, s: int) -> float:
    """log(1 + d*log(d)/s^2), the shared scale factor of the adaptive rate."""
    return math.log1p(d * math.log(d) / (s * s))


def phi_L(d: int, s: int, sigma: float = 1.0) -> float:
    """Adaptive risk scale sigma^2 * s^2 * log(1 + d*log(d)/s^2)."""
    RateQuery(d, s, sigma)
    return sigma * sigma * s * s * _log_base(d, s)


def psi_star(d: int, s: int, sigma: float = 1.0) -> float:
    """Representative minimax risk scale sigma^2 * s^2 * log(1 + d/s^2)
    (absolute constants dropped; downstream uses are ratio-style)."""
    RateQuery(d, s, sigma)
    return sigma * sigma * s * s * math.log1p(d / (s * s))


def phi_ratio(d: int, s: int) -> float:
    """phi_L / psi_star computed directly from the two logarithms, so sigma
    cancels exactly.  Always >= 1 for d >= 3."""
    RateQuery(d, s, 1.0)
    return _log_base(d, s) / math.log1p(d / (s * s))


def omega(s: int, d: int, sigma: float, beta: float) -> float:
    """Selection threshold: omega_s = sqrt(beta * phi_L(d, s, sigma)).

    Strictly increasing in s at fixed (d, sigma, beta).
    """
    if not beta > 0:
        raise ValueError(f"beta must be > 0: got {beta!r}")
    return math.sqrt(beta * phi_L(d, s, sigma))


def s_zero(d: int) -> int:
    """Largest candidate index plus one: floor(sqrt(d*log(d)/2)) + 1."""
    if not (isinstance(d, (int,)) and d >= 3):
        raise ValueError(f"d must be an integer >= 3: got {d!r}")
    return int(math.floor(math.sqrt(d * math.log(d) / 2.0))) + 1


def rho_lower_bound(d: int, s: int, a: float) -> float:
    """Spike magnitude (in sigma units) of the least-favorable prior:
    rho = sqrt((1/2 - a) * log(1 + d*log(d)/s^2))."""
    LowerBoundQuery(d, a, s)
    return math.sqrt((0.5 - a) * _log_base(d, s))


def lower_bound_value(d: int, a: float, s: int) -> LowerBoundValue:
    """Evaluate the two-class testing bound and its ingredients.

    Returns (bound, q_weight, tau, chi2_bound) where

        q_weight   = s^2 * d^(1/2 - 3a) * log(1 + d*log(d)/s^2)
        tau        = 1 / (2 * (d^(1/2 - a) + 1))
        chi2_bound = (1 + (s/d) * (e^(rho^2) - 1))^s
        bound      = (1/2 - a)/4 * q*tau/(1 + q*tau) * (1 - tau*(chi2_bound + 1))

    e^(rho^2) is substituted analytically as (1 + d*log(d)/s^2)^(1/2 - a) and the
    outer power is taken in log space, so no intermediate exponential can
    overflow on the validity domain.  On that domain q*tau > 1/4,
    chi2_bound <= d^(1/2 - a) and bound >= (1/2 - a)/40.
    """
    LowerBoundQuery(d, a, s)
    base = _log_base(d, s)
    q_weight = s * s * math.exp((0.5 - 3.0 * a) * math.log(d)) * base
    tau = 1.0 / (2.0 * (math.exp((0.5 - a) * math.log(d)) + 1.0))
    e_rho2 = math.exp((0.5 - a) * base)  # == (1 + d*log(d)/s^2)^(1/2-a)
    chi2_bound = math.exp(s * math.log1p((s / d) * (e_rho2 - 1.0)))
    qt = q_weight * tau
    bound = (0.5 - a) / 4.0 * (qt / (1.0 + qt)) * (1.0 - tau * (chi2_bound + 1.0))
    return LowerBoundValue(bound, q_weight, tau, chi2_bound)
