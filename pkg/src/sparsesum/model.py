# Ground-truth data model: sparse signals, the observation process y = theta + sigma*xi,
# and the target functional L(theta) = sum_i theta_i.
#
# Conventions
# -----------
# - Signal indices are 1-based everywhere they are visible (in-memory `entries`
#   mappings, JSON artifacts, ids).  Dense arrays are plain 0-based numpy arrays.
# - Randomness: every sampler takes an RngStream.  A stream is a (seed, stream_id)
#   pair mapped to numpy's counter-based Philox generator through
#   SeedSequence(entropy=seed, spawn_key=(stream_id,)), so identical pairs
#   reproduce identical draws regardless of execution order or thread count.

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = [
    "RngStream",
    "SparseSignal",
    "ObservationVector",
    "linear_functional",
    "sample_observation",
    "sample_from_spike_prior",
    "sample_from_gaussian_prior",
]

_UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by (seed, stream_id).

    Two streams with the same pair produce bit-identical draws; streams with
    different stream_ids are statistically independent.  Both fields must fit
    in 64 bits.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not (0 <= int(v) <= _UINT64_MAX):
                raise ValueError(f"{name} must be an integer in [0, 2^64): got {v!r}")

    def generator(self) -> np.random.Generator:
        """Fresh Philox generator for this stream."""
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, stream_id: int) -> "RngStream":
        """Same seed, different stream."""
        return RngStream(self.seed, stream_id)


class SparseSignal:
    """A vector theta in R^d stored by its (1-based) support and values.

    All stored values are nonzero, so the support size equals ``len(values)``
    and is the sparsity ||theta||_0.  Dense vectors (e.g. Gaussian-prior draws)
    are stored the same way with full support.
    """

    __slots__ = ("dim", "indices", "values")

    def __init__(self, dim: int, indices: np.ndarray, values: np.ndarray):
        if not isinstance(dim, (int, np.integer)) or dim < 1:
            raise ValueError(f"dim must be a positive integer: got {dim!r}")
        indices = np.asarray(indices, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if indices.ndim != 1 or values.ndim != 1 or indices.shape != values.shape:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if indices.size:
            order = np.argsort(indices)
            indices = indices[order]
            values = values[order]
            if indices[0] < 1 or indices[-1] > dim:
                raise ValueError("signal indices must lie in 1..dim")
            if np.any(np.diff(indices) == 0):
                raise ValueError("signal indices must be distinct")
            if np.any(values == 0.0):
                raise ValueError("stored signal entries must be nonzero")
            if not np.all(np.isfinite(values)):
                raise ValueError("signal entries must be finite")
        self.dim = int(dim)
        self.indices = indices
        self.values = values

    @classmethod
    def zero(cls, dim: int) -> "SparseSignal":
        return cls(dim, np.empty(0, dtype=np.int64), np.empty(0))

    @classmethod
    def from_entries(cls, dim: int, entries: Mapping[int, float]) -> "SparseSignal":
        idx = np.fromiter((int(k) for k in entries.keys()), dtype=np.int64, count=len(entries))
        val = np.fromiter((float(v) for v in entries.values()), dtype=np.float64, count=len(entries))
        return cls(dim, idx, val)

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SparseSignal":
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 1:
            raise ValueError("dense signal must be a 1-d array")
        nz = np.nonzero(dense)[0]
        return cls(dense.size, nz + 1, dense[nz])

    @property
    def support_size(self) -> int:
        return int(self.values.size)

    @property
    def entries(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.indices, self.values)}

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim)
        dense[self.indices - 1] = self.values
        return dense

    def to_json_dict(self) -> dict:
        return {"dim": self.dim, "entries": {str(int(i)): float(v) for i, v in zip(self.indices, self.values)}}

    @classmethod
    def from_json_dict(cls, obj: Mapping) -> "SparseSignal":
        return cls.from_entries(int(obj["dim"]), {int(k): float(v) for k, v in obj["entries"].items()})

    def __repr__(self) -> str:
        return f"SparseSignal(dim={self.dim}, support_size={self.support_size})"


@dataclass
class ObservationVector:
    """Observed vector y = theta + sigma*xi.

    ``sigma_true`` is the noise level used by the simulator; estimators that
    adapt to unknown noise must not read it.
    """

    dim: int
    values: np.ndarray
    sigma_true: float | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size != self.dim:
            raise ValueError(f"values must be a 1-d array of length dim={self.dim}")

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "values": [float(v) for v in self.values],
            "sigma": None if self.sigma_true is None else float(self.sigma_true),
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping) -> "ObservationVector":
        sigma = obj.get("sigma")
        return cls(int(obj["dim"]), np.asarray(obj["values"], dtype=np.float64),
                   None if sigma is None else float(sigma))


def linear_functional(theta: SparseSignal) -> float:
    """L(theta): the sum of all coordinates of theta."""
    return float(theta.values.sum())


def add_noise(theta_dense: np.ndarray, sigma: float, xi: np.ndarray) -> np.ndarray:
    """The observation map (theta, xi) -> theta + sigma*xi on dense arrays."""
    return theta_dense + sigma * xi


def sample_observation(theta: SparseSignal, sigma: float, rng: RngStream) -> ObservationVector:
    """Draw y = theta + sigma*xi with xi i.i.d. standard normal from ``rng``.

    Deterministic given (rng.seed, rng.stream_id).
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0: got {sigma!r}")
    xi = rng.generator().standard_normal(theta.dim)
    return ObservationVector(theta.dim, add_noise(theta.to_dense(), float(sigma), xi), float(sigma))


def _uniform_subset(d: int, s: int, gen: np.random.Generator) -> np.ndarray:
    # Partial Fisher-Yates: after s swap steps the first s slots hold a
    # uniformly random size-s subset of {0..d-1}.
    idx = np.arange(d, dtype=np.int64)
    for i in range(s):
        j = i + int(gen.integers(d - i))
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:s]


def sample_from_spike_prior(d: int, s: int, rho: float, sigma: float, rng: RngStream) -> SparseSignal:
    """Draw theta with support uniform over size-s subsets of {1..d} and every
    supported entry equal to sigma*rho.

    Every draw has exactly s nonzero coordinates (rho and sigma must be > 0).
    """
    if not (isinstance(s, (int, np.integer)) and 1 <= s <= d):
        raise ValueError(f"s must be an integer in [1, d]: got s={s!r}, d={d!r}")
    if not rho > 0:
        raise ValueError(f"rho must be > 0: got {rho!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0: got {sigma!r}")
    support = np.sort(_uniform_subset(d, int(s), rng.generator())) + 1
    return SparseSignal(d, support, np.full(int(s), float(sigma) * float(rho)))


def sample_from_gaussian_prior(d: int, a: float, rng: RngStream) -> SparseSignal:
    """Draw a dense theta with i.i.d. N(0, a^2) coordinates (stored with full
    support; coordinates that happen to be exactly 0.0 are dropped)."""
    if not a > 0:
        raise ValueError(f"a must be > 0: got {a!r}")
    return SparseSignal.from_dense(float(a) * rng.generator().standard_normal(d))
