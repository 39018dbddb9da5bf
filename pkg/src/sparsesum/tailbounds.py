# Concentration and information-theoretic utilities: truncated Gaussian
# moments, the Fuk-Nagaev tail bound, chi-square bounds for uniform spike
# mixtures, and the unbalanced two-measure testing bound together with its
# exact discrete-measure oracle.

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

__all__ = [
    "DiscreteMeasurePair",
    "truncated_gaussian_moment",
    "fuk_nagaev_bound",
    "chi2_spike_mixture_bound",
    "min_risk_bound",
    "min_risk_oracle",
    "chi2_discrete",
]

_SQRT2PI = math.sqrt(2.0 * math.pi)
_MAX_ATOMS = 20


def _norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT2PI


def _norm_sf(x: float) -> float:
    # Upper tail 1 - Phi(x) via erfc for full relative accuracy.
    return 0.5 * math.erfc(x / math.sqrt(2.0))


@dataclass(frozen=True)
class DiscreteMeasurePair:
    """Two probability measures P and Q on at most 20 atoms, for exercising the
    testing bound at a scale where the exact infimum is computable."""

    p: np.ndarray
    q_: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.p, dtype=np.float64)
        q_ = np.asarray(self.q_, dtype=np.float64)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q_", q_)
        if p.ndim != 1 or q_.ndim != 1 or p.shape != q_.shape:
            raise ValueError("p and q_ must be 1-d arrays of equal length")
        if not 1 <= p.size <= _MAX_ATOMS:
            raise ValueError(f"atom count must lie in [1, {_MAX_ATOMS}]: got {p.size}")
        if np.any(p < 0) or np.any(q_ < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12 or abs(q_.sum() - 1.0) > 1e-12:
            raise ValueError("p and q_ must each sum to 1 within 1e-12")

    @property
    def atoms(self) -> int:
        return int(self.p.size)


def truncated_gaussian_moment(q_order: int, x: float) -> float:
    """E[X^(2q) 1{|X| > x}] for standard normal X, exactly.

    q_order = 1 uses the closed form 2*(x*pdf(x) + 1 - Phi(x)); higher orders
    go through adaptive quadrature with absolute tolerance 1e-12.
    """
    if not (isinstance(q_order, (int, np.integer)) and q_order >= 1):
        raise ValueError(f"q_order must be a positive integer: got {q_order!r}")
    if not x > 0:
        raise ValueError(f"x must be > 0: got {x!r}")
    if q_order == 1:
        return 2.0 * (x * _norm_pdf(x) + _norm_sf(x))
    val, _ = integrate.quad(
        lambda t: t ** (2 * q_order) * math.exp(-0.5 * t * t),
        x,
        np.inf,
        epsabs=1e-12,
        epsrel=1e-12,
        limit=200,
    )
    return 2.0 * val / _SQRT2PI


def fuk_nagaev_bound(p: float, v: float, moment_p_sum: float, variance_sum: float) -> float:
    """Tail bound for P(sum X_i > v) with independent centered X_i:

        (1 + 2/p)^p * sum E|X_i|^p / v^p  +  exp(-2 v^2 / ((p+2)^2 e^p sum E X_i^2)).

    The caller supplies the two moment sums (exact or empirical).  The second
    term is taken as its 0 limit when variance_sum == 0.
    """
    if not p > 2:
        raise ValueError(f"p must be > 2: got {p!r}")
    if not v > 0:
        raise ValueError(f"v must be > 0: got {v!r}")
    if moment_p_sum < 0 or variance_sum < 0:
        raise ValueError("moment sums must be nonnegative")
    poly = (1.0 + 2.0 / p) ** p * moment_p_sum / v**p
    if variance_sum == 0.0:
        return poly
    expo = math.exp(-2.0 * v * v / ((p + 2.0) ** 2 * math.exp(p) * variance_sum))
    return poly + expo


def _log1p_exp(t: float) -> float:
    # log(1 + e^t) without overflow.
    if t > 0:
        return t + math.log1p(math.exp(-t))
    return math.log1p(math.exp(t))


def chi2_spike_mixture_bound(d: int, s: int, rho: float) -> float:
    """Upper bound (1 + (s/d)(e^(rho^2) - 1))^s on chi2 + 1 for the uniform
    s-spike mixture with magnitude sigma*rho against the pure-noise measure.

    Assembled in log space: for large rho^2 the factor e^(rho^2) - 1 is carried
    as its logarithm rho^2 + log(1 - e^(-rho^2)), so intermediates never
    overflow (the returned value may still be inf if the bound itself exceeds
    float range).
    """
    if not (isinstance(s, (int, np.integer)) and isinstance(d, (int, np.integer)) and 1 <= s <= d):
        raise ValueError(f"need integers 1 <= s <= d: got s={s!r}, d={d!r}")
    if not rho > 0:
        raise ValueError(f"rho must be > 0: got {rho!r}")
    r2 = rho * rho
    if r2 < 700.0:
        log_bound = s * math.log1p((s / d) * math.expm1(r2))
    else:
        # log((s/d) * (e^{r2} - 1)) and then s * log(1 + e^t)
        t = math.log(s / d) + r2 + math.log1p(-math.exp(-r2))
        log_bound = s * _log1p_exp(t)
    if log_bound > 709.0:
        return math.inf
    return math.exp(log_bound)


def min_risk_bound(q_weight: float, chi2: float) -> float:
    """Testing lower bound max over tau in (0,1) of
    q*tau/(1 + q*tau) * (1 - tau*(chi2 + 1)).

    The objective is the product of an increasing and a decreasing smooth
    factor, positive only for tau < 1/(chi2 + 1), hence unimodal there; the
    maximum is located by golden-section search to 1e-10.
    """
    if not q_weight > 0:
        raise ValueError(f"q_weight must be > 0: got {q_weight!r}")
    if not chi2 >= 0:
        raise ValueError(f"chi2 must be >= 0: got {chi2!r}")
    if math.isinf(chi2):
        return 0.0

    def objective(tau: float) -> float:
        qt = q_weight * tau
        return qt / (1.0 + qt) * (1.0 - tau * (chi2 + 1.0))

    lo = 0.0
    hi = min(1.0, 1.0 / (chi2 + 1.0))
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    e = a + invphi * (b - a)
    fc, fe = objective(c), objective(e)
    while b - a > 1e-10:
        if fc >= fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe = objective(e)
    best = max(fc, fe)
    return best if best > 0.0 else 0.0


def min_risk_oracle(pair: DiscreteMeasurePair, q_weight: float) -> float:
    """Exact value of inf over events A of q*P(A) + Q(A^c) for discrete
    measures: sum_i min(q*p_i, q'_i), attained by A = {i : q*p_i < q'_i}."""
    if not q_weight > 0:
        raise ValueError(f"q_weight must be > 0: got {q_weight!r}")
    return float(np.minimum(q_weight * pair.p, pair.q_).sum())


def chi2_discrete(pair: DiscreteMeasurePair) -> float:
    """chi-square divergence sum_i q'_i^2 / p_i - 1, with 0^2/0 = 0 and +inf
    when Q puts mass where P does not."""
    p, q_ = pair.p, pair.q_
    if np.any((q_ > 0) & (p == 0)):
        return math.inf
    mask = p > 0
    return float((q_[mask] ** 2 / p[mask]).sum() - 1.0)
