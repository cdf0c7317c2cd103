"""Numeric substrate: validated matrices, column standardization, a stable
logistic link and a counter-based deterministic random stream."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "as_matrix",
    "StandardizationParams",
    "standardize_fit",
    "standardize_apply",
    "sigmoid",
    "RngHandle",
    "RngStream",
    "derive_seed",
]

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_STREAM_MULT = 0xD1B54A32D192ED69


def as_matrix(X, name: str = "X") -> np.ndarray:
    """Return ``X`` as a C-contiguous 2-D float64 array, rejecting non-finite entries."""
    A = np.ascontiguousarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite values")
    return A


@dataclass(frozen=True)
class StandardizationParams:
    means: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        scales = np.asarray(self.scales, dtype=np.float64)
        if means.shape != scales.shape or means.ndim != 1:
            raise ValueError("means and scales must be 1-D arrays of equal length")
        if np.any(scales <= 0):
            raise ValueError("scales must be strictly positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "scales", scales)

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "scales": self.scales.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationParams":
        return cls(np.array(d["means"], dtype=np.float64), np.array(d["scales"], dtype=np.float64))


def standardize_fit(X, numeric_cols=None) -> StandardizationParams:
    """Column means and population standard deviations.

    Columns outside ``numeric_cols`` (all columns when ``None``) and constant
    columns keep scale 1; non-numeric columns also keep mean 0.
    """
    A = np.asarray(X, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] == 0:
        raise ValueError("empty design matrix")
    d = A.shape[1]
    cols = np.arange(d) if numeric_cols is None else np.asarray(sorted(numeric_cols), dtype=int)
    if cols.size and (cols.min() < 0 or cols.max() >= d):
        raise IndexError("numeric column index out of range")
    means = np.zeros(d)
    scales = np.ones(d)
    if cols.size:
        sub = A[:, cols]
        mu = sub.mean(axis=0)
        sd = sub.std(axis=0)
        means[cols] = mu
        # Exact-zero and round-off-level variances are both treated as constant.
        tiny = sd <= 1e-12 * np.maximum(1.0, np.abs(mu))
        scales[cols] = np.where(tiny, 1.0, sd)
    return StandardizationParams(means, scales)


def standardize_apply(X, p: StandardizationParams) -> np.ndarray:
    A = np.asarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.shape[1] != p.means.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix has {A.shape[1]} columns, params have {p.means.shape[0]}"
        )
    return (A - p.means) / p.scales


def sigmoid(z):
    """Logistic function without overflow for large ``|z|``.

    Works on scalars and arrays; NaN propagates.
    """
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    neg = ~pos
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[neg])
    out[neg] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def _mix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *labels) -> int:
    """Fold integer or string labels into a 64-bit seed (stable across runs and platforms)."""
    s = _mix64(int(seed) & _MASK64)
    for lab in labels:
        if isinstance(lab, str):
            v = int.from_bytes(lab.encode("utf-8")[:32].ljust(32, b"\0"), "little")
            v ^= len(lab)
        else:
            v = int(lab)
        while True:
            s = _mix64(s ^ (v & _MASK64) ^ _GAMMA)
            v >>= 64
            if not v:
                break
    return s


@dataclass(frozen=True)
class RngHandle:
    """Identity of a random stream: the same ``(seed, stream_id)`` always
    produces the same sequence."""

    seed: int
    stream_id: int = 0

    def stream(self) -> "RngStream":
        return RngStream(self)

    def child(self, *labels) -> "RngHandle":
        return RngHandle(derive_seed(self.seed, self.stream_id, *labels), 0)


@dataclass
class RngStream:
    """Counter-based splitmix64 generator.

    Output ``i`` is ``mix64(key + (i + 1) * gamma)`` where ``key`` depends
    only on the handle, so draws are reproducible bit-for-bit.
    """

    handle: RngHandle
    counter: int = 0
    _key: int = field(init=False, repr=False)

    def __post_init__(self):
        seed = int(self.handle.seed) & _MASK64
        stream = int(self.handle.stream_id) & _MASK64
        self._key = _mix64(_mix64(seed) ^ ((stream * _STREAM_MULT) & _MASK64))

    def next_u64(self, size: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + 1 + size, dtype=np.uint64)
        self.counter += size
        with np.errstate(over="ignore"):
            z = np.uint64(self._key) + idx * np.uint64(_GAMMA)
        return _mix64_array(z)

    def uniform(self, size: int | None = None):
        """Uniform reals in [0, 1) with 53 random bits each."""
        n = 1 if size is None else int(size)
        u = (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
        return float(u[0]) if size is None else u

    def integers(self, high: int, size: int | None = None):
        """Integers in ``[0, high)``."""
        if high <= 0:
            raise ValueError("high must be positive")
        n = 1 if size is None else int(size)
        r = np.minimum((self.uniform(n) * high).astype(np.int64), high - 1)
        return int(r[0]) if size is None else r

    def normal(self, size: int) -> np.ndarray:
        """Standard normals by Box-Muller."""
        m = (size + 1) // 2
        u1 = 1.0 - self.uniform(m)  # (0, 1]
        u2 = self.uniform(m)
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
        return z[:size]

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of ``range(n)``."""
        out = np.arange(n)
        if n < 2:
            return out
        u = self.uniform(n - 1)
        for k, i in enumerate(range(n - 1, 0, -1)):
            j = min(int(u[k] * (i + 1)), i)
            out[i], out[j] = out[j], out[i]
        return out

    def shuffle(self, items) -> list:
        items = list(items)
        return [items[i] for i in self.permutation(len(items))]

    def bootstrap_indices(self, n: int) -> np.ndarray:
        """``n`` indices drawn with replacement from ``range(n)``."""
        return self.integers(n, n)

    def choice(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct indices from ``range(n)`` (partial Fisher-Yates)."""
        if not 0 <= k <= n:
            raise ValueError("cannot draw more items than available")
        out = np.arange(n)
        u = self.uniform(k) if k else np.empty(0)
        for i in range(k):
            j = i + min(int(u[i] * (n - i)), n - i - 1)
            out[i], out[j] = out[j], out[i]
        return out[:k]
