# Monte Carlo experiment engine: worst-case risk over adversarial signal
# families, empirical frequencies of the high-probability events, lower-bound
# consistency runs, and CSV persistence.
#
# Determinism contract: every replicate draws from its own RngStream whose
# stream_id packs (coordinate index, family-member index, replicate index) into
# fixed bit fields, so results depend only on (spec, seed) and never on thread
# scheduling.  Accumulation is per coordinate and merged in grid order.

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels, rates
from .estimators import EstimatorConfig
from .model import RngStream, SparseSignal, _uniform_subset

__all__ = [
    "ESTIMATOR_KINDS",
    "CSV_COLUMNS",
    "ThetaFamily",
    "RiskEstimate",
    "ResultRow",
    "ExperimentSpec",
    "LowerBoundConsistency",
    "pack_stream_id",
    "resolve_s_expression",
    "mc_risk",
    "selection_error_frequency",
    "sigma_hat_coverage",
    "lower_bound_consistency",
    "sigma_impossibility_demo",
    "run_experiment",
    "write_csv",
    "calibrate_d0",
]

ESTIMATOR_KINDS = ("oracle", "collection", "adaptive", "adaptive_unknown_sigma")

# Fixed CSV schema (order matters; everything exotic goes into extra_json).
CSV_COLUMNS = [
    "d", "s", "sigma", "theta_family", "estimator", "preset", "alpha", "beta",
    "reps", "seed", "mse", "std_error", "phi_L", "psi_star", "ratio_to_phi",
    "worst_theta_id", "extra_json",
]

_CHUNK_FLOATS = 1 << 22  # ~32 MB of float64 per replicate chunk

_COORD_BITS, _THETA_BITS, _REP_BITS = 20, 12, 32


def pack_stream_id(coord_index: int, theta_index: int, rep_index: int) -> int:
    """Pack (coordinate, family member, replicate) into one 64-bit stream id
    (20 + 12 + 32 bits)."""
    if not 0 <= coord_index < (1 << _COORD_BITS):
        raise ValueError(f"coordinate index out of range: {coord_index}")
    if not 0 <= theta_index < (1 << _THETA_BITS):
        raise ValueError(f"theta index out of range: {theta_index}")
    if not 0 <= rep_index < (1 << _REP_BITS):
        raise ValueError(f"replicate index out of range: {rep_index}")
    return (coord_index << (_THETA_BITS + _REP_BITS)) | (theta_index << _REP_BITS) | rep_index


# ---------------------------------------------------------------------------
# Signal families
# ---------------------------------------------------------------------------

class FamilyMember:
    """One element of the adversarial family: either a fixed signal or a
    per-replicate prior sampler (drawn from the replicate's own stream)."""

    def __init__(self, theta_id: str, *, dense: np.ndarray | None = None,
                 l_value: float | None = None,
                 sampler: Callable[[np.random.Generator], tuple[np.ndarray, float]] | None = None):
        if (dense is None) == (sampler is None):
            raise ValueError("exactly one of dense/sampler must be given")
        self.theta_id = theta_id
        self.dense = dense
        self.l_value = l_value
        self.sampler = sampler

    @property
    def random(self) -> bool:
        return self.sampler is not None


def _spike_sampler(d: int, s: int, magnitude: float):
    def draw(gen: np.random.Generator) -> tuple[np.ndarray, float]:
        dense = np.zeros(d)
        dense[_uniform_subset(d, s, gen)] = magnitude
        return dense, magnitude * s

    return draw


def _gaussian_sampler(d: int, a: float):
    def draw(gen: np.random.Generator) -> tuple[np.ndarray, float]:
        dense = a * gen.standard_normal(d)
        return dense, float(dense.sum())

    return draw


@dataclass(frozen=True)
class ThetaFamily:
    """Declarative signal family.

    kinds:
      zero                      theta = 0 only
      spikes                    zero plus, for each lambda in the grid, a signal
                                with s spikes of height lambda*sigma*sqrt(log(1+d*log(d)/s^2))
                                (default grid 0.5, 1, sqrt(alpha), 2*sqrt(alpha):
                                sub-, at- and super-threshold)
      lower_bound_prior         per-replicate uniform-support spike draw at the
                                least-favorable magnitude for the given a
      gaussian_prior            per-replicate dense N(0, a^2 I) draw
      explicit                  user-supplied signal list
    """

    kind: str
    lambdas: tuple[float, ...] | None = None
    a: float | None = None
    thetas: tuple[SparseSignal, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "spikes", "lower_bound_prior", "gaussian_prior", "explicit"):
            raise ValueError(f"unknown theta family kind {self.kind!r}")
        if self.kind in ("lower_bound_prior", "gaussian_prior") and self.a is None:
            raise ValueError(f"family {self.kind} requires parameter a")
        if self.kind == "explicit" and not self.thetas:
            raise ValueError("explicit family requires a nonempty theta list")

    @classmethod
    def zero(cls) -> "ThetaFamily":
        return cls("zero")

    @classmethod
    def spikes(cls, lambdas: Sequence[float] | None = None) -> "ThetaFamily":
        return cls("spikes", None if lambdas is None else tuple(float(v) for v in lambdas))

    @classmethod
    def lower_bound_prior(cls, a: float) -> "ThetaFamily":
        return cls("lower_bound_prior", a=float(a))

    @classmethod
    def gaussian_prior(cls, a: float) -> "ThetaFamily":
        return cls("gaussian_prior", a=float(a))

    @classmethod
    def from_json(cls, obj) -> "ThetaFamily":
        if isinstance(obj, str):
            obj = {"kind": obj}
        kind = obj["kind"]
        if kind == "spikes":
            lam = obj.get("lambdas")
            return cls.spikes(lam)
        if kind in ("lower_bound_prior", "gaussian_prior"):
            return cls(kind, a=float(obj["a"]))
        if kind == "explicit":
            thetas = tuple(SparseSignal.from_json_dict(t) for t in obj["thetas"])
            return cls(kind, thetas=thetas)
        return cls(kind)

    def resolved_lambdas(self, cfg: EstimatorConfig) -> tuple[float, ...]:
        if self.lambdas is not None:
            return self.lambdas
        r = math.sqrt(cfg.alpha)
        return (0.5, 1.0, r, 2.0 * r)

    def label(self, cfg: EstimatorConfig | None = None) -> str:
        if self.kind == "zero":
            return "zero"
        if self.kind == "spikes":
            lams = self.lambdas if cfg is None else self.resolved_lambdas(cfg)
            body = "default" if lams is None else ";".join(f"{v:g}" for v in lams)
            return f"spikes[{body}]"
        if self.kind == "explicit":
            return f"explicit[n={len(self.thetas)}]"
        return f"{self.kind}[a={self.a:g}]"

    def members(self, d: int, s: int, sigma: float, cfg: EstimatorConfig) -> list[FamilyMember]:
        """Concrete members for one (d, s, sigma) coordinate.  Spike heights
        scale with sigma and with the class index s; fixed spikes sit on the
        first s coordinates (every statistic in play is permutation
        invariant)."""
        if self.kind == "zero":
            return [FamilyMember("zero", dense=np.zeros(d), l_value=0.0)]
        if self.kind == "spikes":
            out = [FamilyMember("zero", dense=np.zeros(d), l_value=0.0)]
            base = math.sqrt(math.log1p(d * math.log(d) / (s * s)))
            for lam in self.resolved_lambdas(cfg):
                dense = np.zeros(d)
                dense[:s] = lam * sigma * base
                out.append(FamilyMember(f"spikes_lam{lam:g}", dense=dense, l_value=float(dense.sum())))
            return out
        if self.kind == "lower_bound_prior":
            rho = rates.rho_lower_bound(d, s, self.a)
            return [FamilyMember(f"lower_bound_prior[a={self.a:g}]",
                                 sampler=_spike_sampler(d, s, sigma * rho))]
        if self.kind == "gaussian_prior":
            return [FamilyMember(f"gaussian_prior[a={self.a:g}]", sampler=_gaussian_sampler(d, self.a))]
        out = []
        for k, theta in enumerate(self.thetas):
            if theta.dim != d:
                raise ValueError(f"explicit theta #{k} has dim {theta.dim}, expected {d}")
            if theta.support_size > s:
                raise ValueError(f"explicit theta #{k} has support {theta.support_size} > s={s}")
            out.append(FamilyMember(f"explicit{k}", dense=theta.to_dense(),
                                    l_value=float(theta.values.sum())))
        return out

    def to_json_dict(self) -> dict:
        obj: dict = {"kind": self.kind}
        if self.lambdas is not None:
            obj["lambdas"] = list(self.lambdas)
        if self.a is not None:
            obj["a"] = self.a
        if self.thetas is not None:
            obj["thetas"] = [t.to_json_dict() for t in self.thetas]
        return obj


# ---------------------------------------------------------------------------
# Accumulation and batched estimator evaluation
# ---------------------------------------------------------------------------

class RunningMoments:
    """Streaming mean/variance over replicate chunks (Chan parallel update), so
    long runs never accumulate a raw sum that could overflow."""

    def __init__(self) -> None:
        self.count = 0
        self.mean = 0.0
        self._m2 = 0.0

    def update(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        n = values.size
        if n == 0:
            return
        m = float(values.mean())
        m2 = float(((values - m) ** 2).sum())
        delta = m - self.mean
        total = self.count + n
        self.mean += delta * n / total
        self._m2 += m2 + delta * delta * self.count * n / total
        self.count = total

    @property
    def variance(self) -> float:
        return self._m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 1 else 0.0


@dataclass(frozen=True)
class RiskEstimate:
    """Monte Carlo worst-case mean squared error over a signal family."""

    mse: float
    std_error: float
    reps: int
    seed: int
    worst_theta_id: str


class _AdaptivePrecomp:
    def __init__(self, d: int, cfg: EstimatorConfig):
        self.d = d
        self.s0 = rates.s_zero(d)
        logd = math.log(d)
        s_arr = np.arange(1, self.s0 + 1, dtype=np.float64)
        self.base = np.log1p(d * logd / (s_arr * s_arr))
        self.thresholded = 2.0 * (s_arr * s_arr) <= d * logd
        self.w_unit = np.sqrt(cfg.beta * self.base) * s_arr  # omega_s / sigma
        self.alpha = cfg.alpha


def _adaptive_batch(Y: np.ndarray, sigma: float | None, pre: _AdaptivePrecomp):
    """Evaluate the full selection pipeline on a replicate chunk.

    sigma=None runs the unknown-noise path (sigma_hat per row).  Returns
    (estimate, s_hat, fallback, sigma_vec)."""
    R, d = Y.shape
    if sigma is None:
        sig = 9.0 * np.sqrt(kernels.lower_half_mean(Y, d // 2))
    else:
        sig = np.full(R, float(sigma))
    scale2 = sig * sig
    E = np.empty((R, pre.s0))
    row_sum = Y.sum(axis=1)
    cols = pre.thresholded
    if cols.any():
        T2 = pre.alpha * scale2[:, None] * pre.base[None, cols]
        E[:, cols] = kernels.thresholded_sums(Y, T2)
    if (~cols).any():
        E[:, ~cols] = row_sum[:, None]
    W = sig[:, None] * pre.w_unit[None, :]
    s_hat, fallback = kernels.lepski_select(E, W, pre.s0 - 1)
    est = E[np.arange(R), s_hat - 1]
    return est, s_hat, fallback, sig


def _estimate_batch(kind: str, Y: np.ndarray, s: int, sigma: float,
                    cfg: EstimatorConfig, pre: _AdaptivePrecomp | None):
    """Batched counterpart of the reference estimators.  Returns
    (estimates, aux) where aux may hold 's_hat' and 'sigma_hat' arrays."""
    d = Y.shape[1]
    if kind == "zero":
        return np.zeros(Y.shape[0]), {}
    if kind == "oracle":
        if s * s < d:
            t2 = 2.0 * sigma * sigma * math.log1p(d / (s * s))
            return kernels.thresholded_sums(Y, np.array([t2]))[:, 0], {}
        return Y.sum(axis=1), {}
    if kind == "collection":
        if 2.0 * (s * s) <= d * math.log(d):
            t2 = cfg.alpha * (sigma * sigma) * math.log1p(d * math.log(d) / (s * s))
            return kernels.thresholded_sums(Y, np.array([t2]))[:, 0], {}
        return Y.sum(axis=1), {}
    if kind == "adaptive":
        est, s_hat, _, _ = _adaptive_batch(Y, sigma, pre)
        return est, {"s_hat": s_hat}
    if kind == "adaptive_unknown_sigma":
        est, s_hat, _, sig = _adaptive_batch(Y, None, pre)
        return est, {"s_hat": s_hat, "sigma_hat": sig}
    raise ValueError(f"unknown estimator kind {kind!r}")


def _chunk_bounds(reps: int, d: int) -> Iterable[tuple[int, int]]:
    step = max(1, _CHUNK_FLOATS // max(d, 1))
    for lo in range(0, reps, step):
        yield lo, min(reps, lo + step)


def _draw_chunk(member: FamilyMember, d: int, sigma: float, seed: int,
                coord_index: int, theta_index: int, lo: int, hi: int):
    """Observations and functional values for replicates [lo, hi).  A random
    member draws theta first, then the noise, from the replicate's stream."""
    R = hi - lo
    Y = np.empty((R, d))
    L = np.empty(R)
    for k in range(R):
        gen = RngStream(seed, pack_stream_id(coord_index, theta_index, lo + k)).generator()
        if member.random:
            dense, l_val = member.sampler(gen)
        else:
            dense, l_val = member.dense, member.l_value
        gen.standard_normal(d, out=Y[k])
        Y[k] *= sigma
        Y[k] += dense
        L[k] = l_val
    return Y, L


def _validate_coordinate(kind: str, d: int, s: int, sigma: float, reps: int) -> None:
    if kind not in ESTIMATOR_KINDS + ("zero",):
        raise ValueError(f"unknown estimator kind {kind!r}")
    rates.RateQuery(d, s, sigma)  # d >= 3, 1 <= s <= d, sigma > 0
    if not (isinstance(reps, (int, np.integer)) and reps >= 1):
        raise ValueError(f"reps must be >= 1: got {reps!r}")


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------

def mc_risk(d: int, s: int, sigma: float, theta_family: ThetaFamily, estimator: str,
            cfg: EstimatorConfig, reps: int, seed: int,
            coord_index: int = 0) -> tuple[RiskEstimate, dict]:
    """Empirical worst-case risk: for each family member, average the squared
    error over `reps` replicates (per-replicate streams); return the maximum
    over members with the maximizer recorded.

    Also returns a details dict: per-member mse/std_error, pooled s_hat
    histogram for adaptive runs, and sigma_hat coverage stats for unknown-noise
    runs.
    """
    _validate_coordinate(estimator, d, s, sigma, reps)
    members = theta_family.members(d, s, sigma, cfg)
    pre = _AdaptivePrecomp(d, cfg) if estimator in ("adaptive", "adaptive_unknown_sigma") else None

    per_theta: dict[str, dict] = {}
    hist: dict[int, int] = {}
    cover_min = None
    sig4_max = None
    best: tuple[float, float, str] | None = None
    for t_idx, member in enumerate(members):
        acc = RunningMoments()
        sig4 = RunningMoments()
        cover = 0
        for lo, hi in _chunk_bounds(reps, d):
            Y, L = _draw_chunk(member, d, sigma, seed, coord_index, t_idx, lo, hi)
            est, aux = _estimate_batch(estimator, Y, s, sigma, cfg, pre)
            err = est - L
            acc.update(err * err)
            if "s_hat" in aux:
                vals, counts = np.unique(aux["s_hat"], return_counts=True)
                for v, c in zip(vals, counts):
                    hist[int(v)] = hist.get(int(v), 0) + int(c)
            if "sigma_hat" in aux:
                sh = aux["sigma_hat"]
                cover += int(np.count_nonzero((sh >= sigma) & (sh <= 10.0 * sigma)))
                sig4.update((sh / sigma) ** 4)
        per_theta[member.theta_id] = {"mse": acc.mean, "std_error": acc.std_error}
        if estimator == "adaptive_unknown_sigma":
            cov = cover / reps
            cover_min = cov if cover_min is None else min(cover_min, cov)
            sig4_max = sig4.mean if sig4_max is None else max(sig4_max, sig4.mean)
        if best is None or acc.mean > best[0]:
            best = (acc.mean, acc.std_error, member.theta_id)

    details: dict = {"per_theta": per_theta}
    if hist:
        details["s_hat_hist"] = {str(k): v for k, v in sorted(hist.items())}
    if cover_min is not None:
        details["sigma_hat_coverage"] = cover_min
        details["sigma_hat_fourth_moment_ratio"] = sig4_max
    return RiskEstimate(best[0], best[1], reps, seed, best[2]), details


def selection_error_frequency(d: int, s: int, sigma: float, theta_family: ThetaFamily,
                              cfg: EstimatorConfig, reps: int, seed: int,
                              unknown_sigma: bool = False, coord_index: int = 0) -> float:
    """Worst empirical frequency of {selected index > s} over the family.

    Requires s <= sqrt(d*log(d)/2) and tuning constants satisfying the
    selection-reliability hypotheses (alpha > 48 with the matching beta), i.e.
    the theoretical preset.
    """
    _validate_coordinate("adaptive", d, s, sigma, reps)
    if not 2.0 * (s * s) <= d * math.log(d):
        raise ValueError(f"s={s} exceeds sqrt(d*log(d)/2) for d={d}")
    if not cfg.satisfies_guarantee_hypotheses():
        raise ValueError("selection reliability requires alpha > 48 and the matching beta "
                         "(use EstimatorConfig.theoretical())")
    pre = _AdaptivePrecomp(d, cfg)
    worst = 0.0
    for t_idx, member in enumerate(theta_family.members(d, s, sigma, cfg)):
        exceed = 0
        for lo, hi in _chunk_bounds(reps, d):
            Y, _ = _draw_chunk(member, d, sigma, seed, coord_index, t_idx, lo, hi)
            _, s_hat, _, _ = _adaptive_batch(Y, None if unknown_sigma else sigma, pre)
            exceed += int(np.count_nonzero(s_hat > s))
        worst = max(worst, exceed / reps)
    return worst


def sigma_hat_coverage(d: int, s: int, sigma: float, theta_family: ThetaFamily,
                       reps: int, seed: int, cfg: EstimatorConfig | None = None,
                       coord_index: int = 0) -> tuple[float, float]:
    """Empirical P(sigma <= sigma_hat <= 10*sigma) (worst member, i.e. minimum)
    and E[sigma_hat^4]/sigma^4 (worst member, i.e. maximum).  Requires s < d/2."""
    cfg = cfg or EstimatorConfig.practical()
    _validate_coordinate("adaptive_unknown_sigma", d, s, sigma, reps)
    if not 2 * s < d:
        raise ValueError(f"sigma_hat coverage requires s < d/2: got s={s}, d={d}")
    cover_min = 1.0
    ratio_max = 0.0
    for t_idx, member in enumerate(theta_family.members(d, s, sigma, cfg)):
        cover = 0
        sig4 = RunningMoments()
        for lo, hi in _chunk_bounds(reps, d):
            Y, _ = _draw_chunk(member, d, sigma, seed, coord_index, t_idx, lo, hi)
            sh = 9.0 * np.sqrt(kernels.lower_half_mean(Y, d // 2))
            cover += int(np.count_nonzero((sh >= sigma) & (sh <= 10.0 * sigma)))
            sig4.update((sh / sigma) ** 4)
        cover_min = min(cover_min, cover / reps)
        ratio_max = max(ratio_max, sig4.mean)
    return cover_min, ratio_max


@dataclass(frozen=True)
class LowerBoundConsistency:
    """Evaluated two-term risk functional of one estimator, the analytic
    testing bound it must dominate, and the Monte Carlo standard error of the
    evaluation (two independent terms combined in quadrature)."""

    r_hat: float
    bound: float
    std_error: float

    @property
    def margin(self) -> float:
        return self.r_hat - self.bound


def lower_bound_consistency(d: int, a: float, s: int, sigma: float, estimator: str,
                            cfg: EstimatorConfig, reps: int, seed: int,
                            coord_index: int = 0) -> LowerBoundConsistency:
    """Evaluate, for one implemented estimator T,

        E_0[T^2] / (sigma^2 d^(3a - 1/2))  +  E_prior[(T - L)^2] / phi_L(d, s, sigma)

    by Monte Carlo, with the second expectation taken under the uniform-support
    spike prior at the least-favorable magnitude (a valid lower bound on the
    worst case over the sparsity class).  Any implemented estimator, including
    the constant zero, must land above the analytic testing bound.
    """
    rates.LowerBoundQuery(d, a, s, sigma)
    _validate_coordinate(estimator, d, s, sigma, reps)
    pre = _AdaptivePrecomp(d, cfg) if estimator in ("adaptive", "adaptive_unknown_sigma") else None
    weight_null = math.exp((0.5 - 3.0 * a) * math.log(d)) / (sigma * sigma)
    phi = rates.phi_L(d, s, sigma)

    rho = rates.rho_lower_bound(d, s, a)
    members = [
        FamilyMember("null", dense=np.zeros(d), l_value=0.0),
        FamilyMember("prior", sampler=_spike_sampler(d, s, sigma * rho)),
    ]
    moments = []
    for t_idx, member in enumerate(members):
        acc = RunningMoments()
        for lo, hi in _chunk_bounds(reps, d):
            Y, L = _draw_chunk(member, d, sigma, seed, coord_index, t_idx, lo, hi)
            est, _ = _estimate_batch(estimator, Y, s, sigma, cfg, pre)
            err = est - L
            acc.update(err * err)
        moments.append(acc)
    r_hat = weight_null * moments[0].mean + moments[1].mean / phi
    se = math.hypot(weight_null * moments[0].std_error, moments[1].std_error / phi)
    bound = rates.lower_bound_value(d, a, s).bound
    return LowerBoundConsistency(r_hat, bound, se)


def sigma_impossibility_demo(d: int, a_grid: Sequence[float], reps: int, seed: int,
                             cfg: EstimatorConfig | None = None) -> list[dict]:
    """Risk of the fully adaptive estimator under dense Gaussian signals.

    For each a, draws theta ~ N(0, a^2 I) per replicate (noise level fixed at
    1), runs the unknown-noise adaptive estimator and reports
    E[(estimate - L)^2] / (a^2 d), together with an empirical check of the
    mixture identity: pooled per-coordinate mean and variance of y against
    N(0, 1 + a^2).  The a = 0 row is the degenerate theta = 0 baseline (ratio
    reported as NaN).
    """
    cfg = cfg or EstimatorConfig.practical()
    if d < 3:
        raise ValueError("demo requires d >= 3")
    pre = _AdaptivePrecomp(d, cfg)
    rows = []
    for idx, a in enumerate(a_grid):
        if a < 0:
            raise ValueError(f"a must be >= 0: got {a!r}")
        if a == 0:
            member = FamilyMember("zero", dense=np.zeros(d), l_value=0.0)
        else:
            member = FamilyMember(f"gaussian_prior[a={a:g}]", sampler=_gaussian_sampler(d, float(a)))
        acc = RunningMoments()
        y_moments = RunningMoments()
        for lo, hi in _chunk_bounds(reps, d):
            Y, L = _draw_chunk(member, d, 1.0, seed, idx, 0, lo, hi)
            est, _, _, _ = _adaptive_batch(Y, None, pre)
            err = est - L
            acc.update(err * err)
            y_moments.update(Y.ravel())
        rows.append({
            "a": float(a),
            "risk": acc.mean,
            "risk_ratio": (acc.mean / (a * a * d)) if a > 0 else math.nan,
            "mean_observed": y_moments.mean,
            "var_observed": y_moments.variance,
            "var_expected": 1.0 + a * a,
            "reps": reps,
        })
    return rows


# ---------------------------------------------------------------------------
# Declarative experiment grids
# ---------------------------------------------------------------------------

def resolve_s_expression(token, d: int) -> int:
    """Resolve an s-grid entry at dimension d.

    Accepted forms: a plain integer, "d^<power>", "sqrt(d)", "sqrt(d log d)"
    or "sqrt(d log d / 2)".  Expressions resolve to ceil(value) clamped to
    [1, d].
    """
    if isinstance(token, (int, np.integer)):
        value = int(token)
        if not 1 <= value <= d:
            raise ValueError(f"s={value} outside [1, {d}]")
        return value
    text = str(token).strip().lower().replace(" ", "")
    if text.isdigit():
        return resolve_s_expression(int(text), d)
    if text.startswith("d^"):
        raw = d ** float(text[2:])
    elif text == "sqrt(d)":
        raw = math.sqrt(d)
    elif text in ("sqrt(dlogd)", "sqrt(d*log(d))", "sqrt(dlog(d))"):
        raw = math.sqrt(d * math.log(d))
    elif text in ("sqrt(dlogd/2)", "sqrt(d*log(d)/2)"):
        raw = math.sqrt(d * math.log(d) / 2.0)
    else:
        raise ValueError(f"cannot parse s expression {token!r}")
    return min(max(int(math.ceil(raw)), 1), d)


@dataclass
class ExperimentSpec:
    """Declarative grid: cartesian product of d_grid x s_grid x sigma values x
    estimator kinds, one family/preset/reps/seed for the whole run."""

    d_grid: list[int]
    s_grid: list
    sigma: float | list[float]
    theta_family: ThetaFamily
    estimator: str | list[str]
    preset: EstimatorConfig
    reps: int
    seed: int
    ratio_budget: float | None = None

    @property
    def sigmas(self) -> list[float]:
        return [float(v) for v in (self.sigma if isinstance(self.sigma, (list, tuple)) else [self.sigma])]

    @property
    def estimators(self) -> list[str]:
        return list(self.estimator) if isinstance(self.estimator, (list, tuple)) else [self.estimator]

    def expand(self) -> list["Coordinate"]:
        coords = []
        index = 0
        for d in self.d_grid:
            for s_tok in self.s_grid:
                s = resolve_s_expression(s_tok, d)
                for sigma in self.sigmas:
                    for kind in self.estimators:
                        if kind not in ESTIMATOR_KINDS:
                            raise ValueError(f"unknown estimator kind {kind!r}")
                        _validate_coordinate(kind, d, s, sigma, self.reps)
                        coords.append(Coordinate(index, int(d), s, float(sigma), kind))
                        index += 1
        return coords

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ExperimentSpec":
        preset = obj.get("preset", "practical")
        if isinstance(preset, str):
            cfg = EstimatorConfig.from_preset(preset)
        else:
            cfg = EstimatorConfig.custom(float(preset["alpha"]), float(preset["beta"]))
        budget = obj.get("ratio_budget")
        return cls(
            d_grid=[int(v) for v in obj["d_grid"]],
            s_grid=list(obj["s_grid"]),
            sigma=obj["sigma"],
            theta_family=ThetaFamily.from_json(obj.get("theta_family", "zero")),
            estimator=obj.get("estimator", "adaptive"),
            preset=cfg,
            reps=int(obj.get("reps", 10_000)),
            seed=int(obj.get("seed", 0)),
            ratio_budget=None if budget is None else float(budget),
        )


@dataclass(frozen=True)
class Coordinate:
    index: int
    d: int
    s: int
    sigma: float
    estimator: str


@dataclass
class ResultRow:
    """One CSV row: the coordinate, its risk estimate, and rate normalizations."""

    d: int
    s: int
    sigma: float
    theta_family: str
    estimator: str
    preset: str
    alpha: float
    beta: float
    reps: int
    seed: int
    mse: float
    std_error: float
    phi_L: float
    psi_star: float
    ratio_to_phi: float
    worst_theta_id: str
    extra: dict = field(default_factory=dict)

    def to_csv_values(self) -> list[str]:
        def num(v) -> str:
            return repr(float(v))

        return [
            str(self.d), str(self.s), num(self.sigma), self.theta_family, self.estimator,
            self.preset, num(self.alpha), num(self.beta), str(self.reps), str(self.seed),
            num(self.mse), num(self.std_error), num(self.phi_L), num(self.psi_star),
            num(self.ratio_to_phi), self.worst_theta_id,
            json.dumps(self.extra, sort_keys=True),
        ]


def _run_coordinate(spec: ExperimentSpec, coord: Coordinate) -> ResultRow:
    label = spec.theta_family.label(spec.preset)
    common = dict(
        d=coord.d, s=coord.s, sigma=coord.sigma, theta_family=label,
        estimator=coord.estimator, preset=spec.preset.preset,
        alpha=spec.preset.alpha, beta=spec.preset.beta,
        reps=spec.reps, seed=spec.seed,
    )
    try:
        risk, details = mc_risk(coord.d, coord.s, coord.sigma, spec.theta_family,
                                coord.estimator, spec.preset, spec.reps, spec.seed,
                                coord_index=coord.index)
        phi = rates.phi_L(coord.d, coord.s, coord.sigma)
        psi = rates.psi_star(coord.d, coord.s, coord.sigma)
        extra = details
        ratio = risk.mse / phi
        if spec.ratio_budget is not None:
            extra["budget_ok"] = bool(ratio <= spec.ratio_budget)
        return ResultRow(**common, mse=risk.mse, std_error=risk.std_error,
                         phi_L=phi, psi_star=psi, ratio_to_phi=ratio,
                         worst_theta_id=risk.worst_theta_id, extra=extra)
    except Exception as exc:  # failure isolation: error row, not a crash
        return ResultRow(**common, mse=math.nan, std_error=math.nan,
                         phi_L=math.nan, psi_star=math.nan, ratio_to_phi=math.nan,
                         worst_theta_id="", extra={"error": f"{type(exc).__name__}: {exc}"})


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> list[ResultRow]:
    """Expand the grid and evaluate every coordinate.  Coordinates are
    independent; with threads > 1 they run concurrently, but each coordinate's
    streams are fixed by its grid position, so the output is identical to the
    serial run."""
    coords = spec.expand()
    if threads <= 1 or len(coords) <= 1:
        return [_run_coordinate(spec, c) for c in coords]
    rows: list[ResultRow | None] = [None] * len(coords)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {pool.submit(_run_coordinate, spec, c): c.index for c in coords}
        for fut, idx in futures.items():
            rows[idx] = fut.result()
    return rows  # type: ignore[return-value]


def write_csv(rows: Iterable[ResultRow], fileobj) -> None:
    import csv

    writer = csv.writer(fileobj, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.to_csv_values())


def calibrate_d0(d_grid: Sequence[int] = (20, 50, 100, 200, 500, 1000),
                 reps: int = 2000, seed: int = 0) -> tuple[list[dict], int | None]:
    """Scan dimensions and report, per d, whether all high-probability checks
    hold empirically (selection reliability for known and estimated noise at
    s=1, and noise-estimate coverage).  Returns the per-d table and the
    smallest d at which everything passes (the operational analogue of the
    unspecified minimum dimension in the guarantees)."""
    cfg = EstimatorConfig.theoretical()
    family = ThetaFamily.spikes()
    rows = []
    d0 = None
    for d in d_grid:
        freq_known = selection_error_frequency(d, 1, 1.0, family, cfg, reps, seed)
        freq_unknown = selection_error_frequency(d, 1, 1.0, family, cfg, reps, seed,
                                                 unknown_sigma=True)
        coverage, _ = sigma_hat_coverage(d, 1, 1.0, family, reps, seed)
        ok = freq_known <= 1e-3 and freq_unknown <= 1e-3 and coverage >= 0.999
        rows.append({"d": d, "selection_freq": freq_known,
                     "selection_freq_unknown_sigma": freq_unknown,
                     "sigma_hat_coverage": coverage, "all_pass": ok})
        if ok and d0 is None:
            d0 = d
    return rows, d0
