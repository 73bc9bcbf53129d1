"""
Truncated two-sided power series in w.

Coefficients are stored densely from the lowest power `lo` upward. Products
are clipped to a working window [k_lo, k_hi] that travels with the result so
callers can tell which powers are exact.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

Window = Tuple[int, int]


def working_window(n: int, guard: Optional[int] = None) -> Window:
    """Default window [-(n + guard), n]; guard defaults to n."""
    if guard is None:
        guard = n
    if n < 0 or guard < 0:
        raise ValueError(f"truncation order and guard must be non-negative, got n={n}, guard={guard}")
    return (-(n + guard), n)


@dataclass(frozen=True, eq=False)
class LaurentSeries:
    lo: int
    coeffs: np.ndarray
    window: Optional[Window] = field(default=None, compare=False)

    __array_ufunc__ = None

    def __post_init__(self):
        data = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        if data.ndim != 1 or data.size == 0:
            raise ValueError("Laurent series needs a non-empty 1-D coefficient array")
        object.__setattr__(self, "coeffs", data)

    @property
    def hi(self) -> int:
        return self.lo + len(self.coeffs) - 1

    @classmethod
    def monomial(cls, power: int, value: complex = 1.0, window: Optional[Window] = None) -> "LaurentSeries":
        return cls(power, np.array([value], dtype=complex), window)

    @classmethod
    def zero(cls, window: Optional[Window] = None) -> "LaurentSeries":
        return cls(0, np.zeros(1, dtype=complex), window)

    def powers(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def coefficient(self, k: int) -> complex:
        if k < self.lo or k > self.hi:
            return 0j
        return complex(self.coeffs[k - self.lo])

    def evaluate(self, w):
        w = np.asarray(w, dtype=complex)
        total = np.zeros_like(w)
        for power, value in zip(self.powers(), self.coeffs):
            if value != 0:
                total = total + value * w ** int(power)
        return total

    def allclose(self, other: "LaurentSeries", atol: float = 1e-12) -> bool:
        diff = add(self, scale(other, -1.0))
        return bool(np.all(np.abs(diff.coeffs) <= atol))

    def __add__(self, other):
        if np.isscalar(other):
            other = LaurentSeries.monomial(0, other)
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return scale(self, -1.0)

    def __sub__(self, other):
        return self + (-other if isinstance(other, LaurentSeries) else -other)

    def __mul__(self, other):
        if isinstance(other, LaurentSeries):
            return multiply(self, other, self.window or other.window)
        return scale(self, other)

    __rmul__ = __mul__


def truncate(series: LaurentSeries, window: Optional[Window]) -> LaurentSeries:
    """Drop powers outside the window; idempotent."""
    if window is None:
        return series
    k_lo, k_hi = window
    lo = max(series.lo, k_lo)
    hi = min(series.hi, k_hi)
    if hi < lo:
        return LaurentSeries(k_lo, np.zeros(1, dtype=complex), window)
    return LaurentSeries(lo, series.coeffs[lo - series.lo : hi - series.lo + 1].copy(), window)


def multiply(a: LaurentSeries, b: LaurentSeries, window: Optional[Window] = None) -> LaurentSeries:
    """Cauchy product, keeping only powers inside the window."""
    product = LaurentSeries(a.lo + b.lo, np.convolve(a.coeffs, b.coeffs))
    return truncate(product, window)


def add(a: LaurentSeries, b: LaurentSeries) -> LaurentSeries:
    lo = min(a.lo, b.lo)
    hi = max(a.hi, b.hi)
    data = np.zeros(hi - lo + 1, dtype=complex)
    data[a.lo - lo : a.hi - lo + 1] += a.coeffs
    data[b.lo - lo : b.hi - lo + 1] += b.coeffs
    return LaurentSeries(lo, data, a.window or b.window)


def scale(a: LaurentSeries, factor: complex) -> LaurentSeries:
    return LaurentSeries(a.lo, a.coeffs * factor, a.window)


def shift_power(a: LaurentSeries, p: int) -> LaurentSeries:
    """Multiply by w**p."""
    return truncate(LaurentSeries(a.lo + p, a.coeffs.copy(), a.window), a.window)


def coefficient(a: LaurentSeries, k: int) -> complex:
    return a.coefficient(k)
