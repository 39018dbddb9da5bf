# Estimators of L(theta) = sum_j theta_j from y = theta + sigma*xi:
#
#   oracle_estimator                     threshold sum tuned to a known sparsity s
#   collection_estimator                 member L_s of the selectable collection
#   select_s_hat / adaptive_estimator    Lepski-type choice of s, known sigma
#   sigma_hat                            robust noise-level estimate from order statistics
#   *_unknown_sigma                      same collection/selection with sigma_hat plugged in
#
# These are scalar reference implementations (one observation vector per call)
# meant to be read and audited; the Monte Carlo engine reproduces them in
# batched form through sparsesum.kernels and is tested against them.

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import rates
from .model import ObservationVector

__all__ = [
    "THEORETICAL_ALPHA",
    "PRACTICAL_ALPHA",
    "PRACTICAL_BETA",
    "theoretical_beta",
    "EstimatorConfig",
    "PairTest",
    "SelectionTrace",
    "oracle_estimator",
    "collection_estimator",
    "select_s_hat",
    "adaptive_estimator",
    "sigma_hat",
    "collection_estimator_unknown_sigma",
    "adaptive_estimator_unknown_sigma",
]

# Defaults for the two shipped presets.  The "theoretical" pair satisfies the
# hypotheses of the risk and selection-reliability guarantees (alpha > 48,
# beta = (16/9)(sqrt(12) + 2 sqrt(alpha))^2, taken with equality).  The
# "practical" pair gives usable finite-d behavior with no guarantee claimed:
# with alpha > 48 the thresholds are so wide that bias dominates at desk-scale
# d, while the known-s minimax construction uses the constant 2, so a small
# alpha keeps the same mechanism in a useful regime.
THEORETICAL_ALPHA = 49.0
PRACTICAL_ALPHA = 4.0
PRACTICAL_BETA = 16.0


def theoretical_beta(alpha: float) -> float:
    """Smallest beta admitted alongside a given alpha by the guarantees."""
    return (16.0 / 9.0) * (math.sqrt(12.0) + 2.0 * math.sqrt(alpha)) ** 2


@dataclass(frozen=True)
class EstimatorConfig:
    """Tuning constants (alpha, beta) plus the preset they came from.

    alpha scales the squared coordinate threshold, beta the squared selection
    threshold.  preset is one of "theoretical", "practical", "custom".
    """

    alpha: float
    beta: float
    preset: str = "custom"

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"alpha and beta must be > 0: got {self.alpha!r}, {self.beta!r}")
        if self.preset not in ("theoretical", "practical", "custom"):
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.preset == "theoretical":
            if not (self.alpha > 48.0 and self.beta >= theoretical_beta(self.alpha)):
                raise ValueError(
                    "theoretical preset requires alpha > 48 and "
                    "beta >= (16/9)(sqrt(12)+2*sqrt(alpha))^2"
                )

    @classmethod
    def theoretical(cls) -> "EstimatorConfig":
        return cls(THEORETICAL_ALPHA, theoretical_beta(THEORETICAL_ALPHA), "theoretical")

    @classmethod
    def practical(cls) -> "EstimatorConfig":
        return cls(PRACTICAL_ALPHA, PRACTICAL_BETA, "practical")

    @classmethod
    def custom(cls, alpha: float, beta: float) -> "EstimatorConfig":
        return cls(alpha, beta, "custom")

    @classmethod
    def from_preset(cls, name: str) -> "EstimatorConfig":
        if name == "theoretical":
            return cls.theoretical()
        if name == "practical":
            return cls.practical()
        raise ValueError(f"unknown preset name {name!r}")

    def satisfies_guarantee_hypotheses(self) -> bool:
        return self.alpha > 48.0 and self.beta >= theoretical_beta(self.alpha)


class PairTest(NamedTuple):
    """One evaluated comparison |L_s - L_s'| <= omega_s'."""

    s: int
    s_prime: int
    diff: float
    omega: float
    passed: bool


@dataclass
class SelectionTrace:
    """Complete record of one selection run.

    estimates[k] and thresholds[k] correspond to scale s = k+1, for
    s = 1..s_zero (thresholds[0] is never consulted by a test: comparisons use
    omega at the larger index, which is >= 2).  tests holds every comparison
    actually evaluated, in evaluation order (candidates are tried in increasing
    s and each candidate short-circuits at its first failure).
    fallback_used is True iff no candidate was admissible, in which case
    s_hat == s_zero.
    """

    d: int
    s_zero: int
    estimates: np.ndarray
    thresholds: np.ndarray
    s_hat: int
    tests: list[PairTest]
    fallback_used: bool

    def to_json_dict(self) -> dict:
        return {
            "d": self.d,
            "s_zero": self.s_zero,
            "estimates": [float(v) for v in self.estimates],
            "thresholds": [float(v) for v in self.thresholds],
            "s_hat": self.s_hat,
            "fallback_used": self.fallback_used,
            "tests": [
                {"s": t.s, "s_prime": t.s_prime, "diff": t.diff, "omega": t.omega, "passed": t.passed}
                for t in self.tests
            ],
        }


def _values(y) -> np.ndarray:
    if isinstance(y, ObservationVector):
        return y.values
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError("observation must be a 1-d array or ObservationVector")
    return arr


def _thresholded_sum(v: np.ndarray, t2: float) -> float:
    return float(v[v * v > t2].sum())


def oracle_estimator(y, s: int, sigma: float) -> float:
    """Known-sparsity estimator: when s < sqrt(d), the sum of coordinates with
    y_j^2 > 2*sigma^2*log(1 + d/s^2); otherwise the plain sum.

    The regime test s < sqrt(d) is the exact integer comparison s*s < d.
    """
    v = _values(y)
    d = v.size
    if not (isinstance(s, (int, np.integer)) and 1 <= s <= d):
        raise ValueError(f"s must be an integer in [1, d]: got s={s!r}, d={d}")
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0: got {sigma!r}")
    if s * s < d:
        return _thresholded_sum(v, 2.0 * sigma * sigma * math.log1p(d / (s * s)))
    return float(v.sum())


def _in_threshold_regime(d: int, s: int) -> bool:
    # s <= sqrt(d*log(d)/2) decided as 2*s^2 <= d*log(d): exact integer square
    # against the one inexact factor log(d).
    return 2.0 * (s * s) <= d * math.log(d)


def collection_estimator(y, s: int, sigma: float, cfg: EstimatorConfig) -> float:
    """Member of the selectable collection: when s <= sqrt(d*log(d)/2), the sum
    of coordinates with y_j^2 > alpha*sigma^2*log(1 + d*log(d)/s^2); otherwise
    the plain sum."""
    v = _values(y)
    d = v.size
    if not (isinstance(s, (int, np.integer)) and 1 <= s <= d):
        raise ValueError(f"s must be an integer in [1, d]: got s={s!r}, d={d}")
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0: got {sigma!r}")
    if _in_threshold_regime(d, s):
        t2 = cfg.alpha * (sigma * sigma) * math.log1p(d * math.log(d) / (s * s))
        return _thresholded_sum(v, t2)
    return float(v.sum())


def sigma_hat(y, fraction: float = 0.5) -> float:
    """Robust noise-level estimate from the smallest squared observations:
    9 * sqrt(mean of the floor(fraction*d) smallest y_j^2).

    The default fraction 1/2 uses exactly floor(d/2) values and is calibrated
    for sparsity s < d/2; smaller fractions tolerate denser signals (constants
    unchanged).  Deliberately overestimates: the target event is
    sigma <= sigma_hat <= 10*sigma.
    """
    v = _values(y)
    d = v.size
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1]: got {fraction!r}")
    count = int(math.floor(fraction * d))
    if count < 1:
        raise ValueError(f"floor(fraction*d) must be >= 1: got d={d}, fraction={fraction}")
    sq = np.sort(v * v)[:count]
    return 9.0 * math.sqrt(float(sq.mean()))


def collection_estimator_unknown_sigma(y, s: int, cfg: EstimatorConfig) -> float:
    """Collection member with sigma_hat(y) substituted into the threshold.
    The regime boundary s <= sqrt(d*log(d)/2) is sigma-free and unchanged."""
    v = _values(y)
    d = v.size
    if not (isinstance(s, (int, np.integer)) and 1 <= s <= d):
        raise ValueError(f"s must be an integer in [1, d]: got s={s!r}, d={d}")
    if d < 2:
        raise ValueError("unknown-sigma estimation needs d >= 2")
    if _in_threshold_regime(d, s):
        sig = sigma_hat(v)
        t2 = cfg.alpha * sig * sig * math.log1p(d * math.log(d) / (s * s))
        return _thresholded_sum(v, t2)
    return float(v.sum())


def _selection_arrays(v: np.ndarray, scale: float, cfg: EstimatorConfig):
    """Collection estimates and selection thresholds for s = 1..s_zero(d).

    ``scale`` is the noise level plugged into both threshold families (the
    known sigma, or sigma_hat).  Both adaptive paths share this builder, so
    when sigma_hat happens to equal the true sigma their outputs are
    bit-identical.
    """
    d = v.size
    s0 = rates.s_zero(d)
    logd = math.log(d)
    scale2 = scale * scale
    total = float(v.sum())
    estimates = np.empty(s0)
    thresholds = np.empty(s0)
    for s in range(1, s0 + 1):
        base = math.log1p(d * logd / (s * s))
        if 2.0 * (s * s) <= d * logd:
            estimates[s - 1] = _thresholded_sum(v, cfg.alpha * scale2 * base)
        else:
            estimates[s - 1] = total
        thresholds[s - 1] = math.sqrt(cfg.beta * base) * s * scale
    return estimates, thresholds, s0


def _run_selection(
    estimates: np.ndarray, thresholds: np.ndarray, s0: int
) -> tuple[int, list[PairTest], bool]:
    tests: list[PairTest] = []
    for s in range(1, s0):
        admissible = True
        for sp in range(s + 1, s0 + 1):
            diff = abs(float(estimates[s - 1]) - float(estimates[sp - 1]))
            w = float(thresholds[sp - 1])
            passed = diff <= w
            tests.append(PairTest(s, sp, diff, w, passed))
            if not passed:
                admissible = False
                break
        if admissible:
            return s, tests, False
    return s0, tests, True


def select_s_hat(y, sigma: float, cfg: EstimatorConfig) -> SelectionTrace:
    """Lepski-type selection with known sigma.

    Computes the collection estimates for s = 1..s_zero(d) and picks the
    smallest s <= s_zero(d)-1 with |L_s - L_s'| <= omega_s' for all
    s' in (s, s_zero(d)].  Estimates at scales above s_zero(d) all equal the
    plain sum, whose test against any admissible s is implied by the s_zero(d)
    test (same estimate, larger threshold), so the scan stops there.  If no
    candidate is admissible, s_hat = s_zero(d) and fallback_used is set.
    """
    v = _values(y)
    if v.size < 3:
        raise ValueError("adaptive estimation needs d >= 3")
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0: got {sigma!r}")
    estimates, thresholds, s0 = _selection_arrays(v, float(sigma), cfg)
    s_hat_val, tests, fallback = _run_selection(estimates, thresholds, s0)
    return SelectionTrace(v.size, s0, estimates, thresholds, s_hat_val, tests, fallback)


def adaptive_estimator(y, sigma: float, cfg: EstimatorConfig) -> tuple[float, SelectionTrace]:
    """Adaptive-to-s estimator: the collection member at the selected index."""
    trace = select_s_hat(y, sigma, cfg)
    return float(trace.estimates[trace.s_hat - 1]), trace


def adaptive_estimator_unknown_sigma(y, cfg: EstimatorConfig) -> tuple[float, SelectionTrace, float]:
    """Fully adaptive estimator: sigma_hat is computed once and reused in every
    coordinate threshold and every selection threshold; the selection logic is
    otherwise identical to the known-sigma case.

    Returns (estimate, trace, sigma_hat_value).
    """
    v = _values(y)
    if v.size < 3:
        raise ValueError("adaptive estimation needs d >= 3")
    sig = sigma_hat(v)
    estimates, thresholds, s0 = _selection_arrays(v, sig, cfg)
    s_hat_val, tests, fallback = _run_selection(estimates, thresholds, s0)
    trace = SelectionTrace(v.size, s0, estimates, thresholds, s_hat_val, tests, fallback)
    return float(estimates[s_hat_val - 1]), trace, sig
