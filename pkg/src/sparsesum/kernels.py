# Hot numeric kernels for the Monte Carlo paths, in two interchangeable
# backends:
#
#   - "numba": @njit(cache=True, nogil=True) per-replicate loops (default when
#     numba imports cleanly);
#   - "numpy": pure-numpy batched fallback.
#
# Selection: set SPARSESUM_BACKEND to "numba", "numpy", or "auto" (default).
# "numba" raises if numba is unavailable; "auto" silently falls back to numpy.
# Both backends compute the same quantities; results agree to floating
# rounding (summation orders differ, so bit-identity is only guaranteed when
# rerunning on one backend).
#
# Shapes: Y is (R, d) — R replicate rows of a d-dimensional observation.
# Thresholds may be shared, shape (m,), or per-row, shape (R, m).

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "active_backend",
    "thresholded_sums",
    "lepski_select",
    "lower_half_mean",
]

_ENV_VAR = "SPARSESUM_BACKEND"


# ---------------------------------------------------------------------------
# numpy backend
# ---------------------------------------------------------------------------

def _row_searchsorted_right(A: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Vectorized per-row searchsorted: counts[i, k] = #{j : A[i, j] <= V[i, k]}
    for rows of A sorted ascending.  Plain bisection broadcast over (R, m)."""
    R, d = A.shape
    rows = np.arange(R)[:, None]
    lo = np.zeros(V.shape, dtype=np.int64)
    hi = np.full(V.shape, d, dtype=np.int64)
    while np.any(lo < hi):
        mid = (lo + hi) // 2
        le = A[rows, mid] <= V
        lo = np.where(le, mid + 1, lo)
        hi = np.where(le, hi, mid)
    return lo


def _thresholded_sums_numpy(Y: np.ndarray, T2: np.ndarray) -> np.ndarray:
    sq = Y * Y
    order = np.argsort(sq, axis=1, kind="stable")
    sq_sorted = np.take_along_axis(sq, order, axis=1)
    y_sorted = np.take_along_axis(Y, order, axis=1)
    prefix = np.zeros((Y.shape[0], Y.shape[1] + 1))
    np.cumsum(y_sorted, axis=1, out=prefix[:, 1:])
    total = prefix[:, -1][:, None]
    cnt = _row_searchsorted_right(sq_sorted, T2)
    return total - np.take_along_axis(prefix, cnt, axis=1)


def _lepski_select_numpy(E: np.ndarray, W: np.ndarray, n_candidates: int) -> tuple[np.ndarray, np.ndarray]:
    R, s0 = E.shape
    s_hat = np.full(R, s0, dtype=np.int64)
    fallback = np.ones(R, dtype=np.bool_)
    chunk = max(1, (1 << 22) // (s0 * s0 + 1))
    for lo in range(0, R, chunk):
        hi = min(R, lo + chunk)
        diffs = np.abs(E[lo:hi, :, None] - E[lo:hi, None, :])  # (r, s, s')
        viol = diffs > W[lo:hi, None, :]
        upper = np.triu(np.ones((s0, s0), dtype=np.bool_), k=1)  # s' > s only
        admissible = ~np.any(viol & upper[None, :, :], axis=2)  # (r, s)
        admissible = admissible[:, :n_candidates]
        any_adm = np.any(admissible, axis=1)
        first = np.argmax(admissible, axis=1) + 1
        s_hat[lo:hi] = np.where(any_adm, first, s0)
        fallback[lo:hi] = ~any_adm
    return s_hat, fallback


def _lower_half_mean_numpy(Y: np.ndarray, count: int) -> np.ndarray:
    sq = np.partition(Y * Y, count - 1, axis=1)[:, :count]
    return sq.mean(axis=1)


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

_NUMBA_IMPORT_ERROR: Exception | None = None
try:
    from numba import njit

    @njit(cache=True, nogil=True)
    def _thresholded_sums_numba(Y, T2):  # pragma: no cover - exercised via dispatch
        R, d = Y.shape
        m = T2.shape[1]
        out = np.empty((R, m))
        for i in range(R):
            sq = Y[i] * Y[i]
            order = np.argsort(sq)
            sq_sorted = np.empty(d)
            prefix = np.empty(d + 1)
            prefix[0] = 0.0
            for k in range(d):
                j = order[k]
                sq_sorted[k] = sq[j]
                prefix[k + 1] = prefix[k] + Y[i, j]
            total = prefix[d]
            for t in range(m):
                c = np.searchsorted(sq_sorted, T2[i, t], side="right")
                out[i, t] = total - prefix[c]
        return out

    @njit(cache=True, nogil=True)
    def _lepski_select_numba(E, W, n_candidates):  # pragma: no cover
        R, s0 = E.shape
        s_hat = np.empty(R, dtype=np.int64)
        fallback = np.empty(R, dtype=np.bool_)
        for i in range(R):
            chosen = s0
            found = False
            for s in range(1, n_candidates + 1):
                ok = True
                for sp in range(s + 1, s0 + 1):
                    if abs(E[i, s - 1] - E[i, sp - 1]) > W[i, sp - 1]:
                        ok = False
                        break
                if ok:
                    chosen = s
                    found = True
                    break
            s_hat[i] = chosen
            fallback[i] = not found
        return s_hat, fallback

    @njit(cache=True, nogil=True)
    def _lower_half_mean_numba(Y, count):  # pragma: no cover
        R = Y.shape[0]
        out = np.empty(R)
        for i in range(R):
            sq = np.partition(Y[i] * Y[i], count - 1)
            acc = 0.0
            for k in range(count):
                acc += sq[k]
            out[i] = acc / count
        return out

except ImportError as exc:  # pragma: no cover - depends on environment
    _NUMBA_IMPORT_ERROR = exc


def _resolve_backend() -> str:
    choice = os.environ.get(_ENV_VAR, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"{_ENV_VAR} must be 'auto', 'numba' or 'numpy': got {choice!r}")
    if choice == "numpy":
        return "numpy"
    if _NUMBA_IMPORT_ERROR is not None:
        if choice == "numba":
            raise ImportError(f"{_ENV_VAR}=numba but numba is unavailable") from _NUMBA_IMPORT_ERROR
        return "numpy"
    return "numba"


_BACKEND = _resolve_backend()


def active_backend() -> str:
    """Backend selected at import time ('numba' or 'numpy')."""
    return _BACKEND


def _as_row_matrix(arr: np.ndarray, rows: int) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        return np.ascontiguousarray(np.broadcast_to(arr, (rows, arr.size)))
    if arr.ndim == 2 and arr.shape[0] == rows:
        return arr
    raise ValueError(f"expected shape ({rows}, m) or (m,): got {arr.shape}")


def thresholded_sums(Y: np.ndarray, T2) -> np.ndarray:
    """Per-row thresholded sums: out[i, k] = sum_j Y[i, j] * 1{Y[i, j]^2 > T2[.., k]}.

    T2 holds *squared* thresholds, shared (m,) or per-row (R, m).
    """
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    T2 = _as_row_matrix(np.atleast_1d(np.asarray(T2, dtype=np.float64)), Y.shape[0])
    if _BACKEND == "numba":
        return _thresholded_sums_numba(Y, T2)
    return _thresholded_sums_numpy(Y, T2)


def lepski_select(E: np.ndarray, W, n_candidates: int) -> tuple[np.ndarray, np.ndarray]:
    """Smallest admissible index per row.

    Row i of E holds estimates for scales s = 1..s0; W the matching test
    thresholds (shared (s0,) or per-row (R, s0)).  Index s <= n_candidates is
    admissible when |E[s] - E[s']| <= W[s'] for every s' in (s, s0].  Returns
    (s_hat, fallback): the smallest admissible index, or s0 with fallback=True
    when none is admissible.
    """
    E = np.ascontiguousarray(E, dtype=np.float64)
    if not 1 <= n_candidates < E.shape[1]:
        raise ValueError(f"n_candidates must lie in [1, s0): got {n_candidates} with s0={E.shape[1]}")
    W = _as_row_matrix(W, E.shape[0])
    if W.shape[1] != E.shape[1]:
        raise ValueError("W must have one threshold per scale")
    if _BACKEND == "numba":
        return _lepski_select_numba(E, W, n_candidates)
    return _lepski_select_numpy(E, W, n_candidates)


def lower_half_mean(Y: np.ndarray, count: int) -> np.ndarray:
    """Per-row mean of the `count` smallest squared entries."""
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if not 1 <= count <= Y.shape[1]:
        raise ValueError(f"count must lie in [1, d]: got {count} with d={Y.shape[1]}")
    if _BACKEND == "numba":
        return _lower_half_mean_numba(Y, count)
    return _lower_half_mean_numpy(Y, count)
