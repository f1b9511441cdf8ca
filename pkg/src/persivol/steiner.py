"""Turning Euler-characteristic profiles into intrinsic-volume estimates.

The pipeline here is purely arithmetic: step functions of the Euler
characteristic over an interval [0, R] are integrated exactly against
polynomials, projected onto the orthonormal Legendre basis of L^2([0, R]),
and the monomial coefficients of the projection are rescaled into the
intrinsic-volume normalization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "PolynomialR",
    "ChiProfile",
    "chi_profile",
    "integrate_chi_poly",
    "legendre_basis",
    "project_and_extract",
    "unit_ball_volume",
    "error_constant",
    "theoretical_bound",
    "extraction_matrix",
]

MAX_BASIS_DEGREE = 10


@dataclass(frozen=True)
class PolynomialR:
    """Real polynomial stored as monomial coefficients, ascending degree.

    The coefficient tuple has fixed arity: trailing zeros are kept so that a
    degree-<=d family always carries d+1 entries.
    """

    coeffs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        # Horner evaluation, works on scalars and numpy arrays.
        acc = np.zeros_like(np.asarray(x, dtype=float))
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc if acc.shape else float(acc)

    def antiderivative(self) -> "PolynomialR":
        return PolynomialR((0.0,) + tuple(c / (i + 1) for i, c in enumerate(self.coeffs)))

    def integral(self, lo: float, hi: float) -> float:
        anti = self.antiderivative()
        return anti(hi) - anti(lo)

    def inner_product(self, other: "PolynomialR", R: float) -> float:
        """Exact L^2([0, R]) inner product via the coefficient convolution."""
        total = 0.0
        for i, ci in enumerate(self.coeffs):
            if ci == 0.0:
                continue
            for j, cj in enumerate(other.coeffs):
                if cj == 0.0:
                    continue
                m = i + j
                total += ci * cj * R ** (m + 1) / (m + 1)
        return total

    def to_json(self) -> str:
        return json.dumps(list(self.coeffs))

    @classmethod
    def from_json(cls, text: str) -> "PolynomialR":
        return cls(tuple(json.loads(text)))


@dataclass(frozen=True)
class ChiProfile:
    """Canonical step function on [0, R].

    ``values[k]`` holds on the piece between consecutive breakpoints, with the
    implicit outer breakpoints 0 and R; breakpoints are strictly increasing
    and strictly inside (0, R), and neighbouring values differ.
    """

    breakpoints: tuple[float, ...]
    values: tuple[int, ...]
    R: float

    def __post_init__(self):
        if len(self.values) != len(self.breakpoints) + 1:
            raise ValueError("values must have exactly one more entry than breakpoints")
        if any(b <= 0.0 or b >= self.R for b in self.breakpoints):
            raise ValueError("breakpoints must lie strictly inside (0, R)")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError("breakpoints must be strictly increasing")

    def __call__(self, r: float) -> int:
        """Value of the step function at r (right-continuous pieces)."""
        if r < 0.0 or r > self.R:
            raise ValueError(f"r={r} outside [0, {self.R}]")
        idx = 0
        for b in self.breakpoints:
            if r >= b:
                idx += 1
            else:
                break
        return self.values[idx]

    def edges(self) -> tuple[float, ...]:
        return (0.0,) + self.breakpoints + (self.R,)


def chi_profile(diagram, R: float) -> ChiProfile:
    """Exact Euler-characteristic step function of a diagram on [0, R].

    A bar (degree j, birth b, death d) contributes (-1)^j on [b, d); births
    and deaths are clipped to the window.  Bars born after R are ignored.
    """
    if R <= 0.0:
        raise ConfigurationError(f"R must be positive, got {R}")
    events: dict[float, int] = {}
    base = 0
    for bar in diagram.bars:
        sign = -1 if bar.dim % 2 else 1
        b, d = bar.birth, bar.death
        if b > R or d <= b:
            continue
        if b <= 0.0:
            base += sign
        else:
            events[b] = events.get(b, 0) + sign
        if d < R:
            if d <= 0.0:
                base -= sign
            else:
                events[d] = events.get(d, 0) - sign
    breakpoints: list[float] = []
    values: list[int] = [base]
    cur = base
    for pos in sorted(events):
        delta = events[pos]
        if delta == 0:
            continue
        cur += delta
        breakpoints.append(pos)
        values.append(cur)
    return ChiProfile(tuple(breakpoints), tuple(values), float(R))


def integrate_chi_poly(profile: ChiProfile, poly: PolynomialR) -> float:
    """Exact integral of the step function against the polynomial on [0, R]."""
    anti = poly.antiderivative()
    edges = profile.edges()
    anti_vals = [anti(e) for e in edges]
    total = 0.0
    for k, v in enumerate(profile.values):
        if v:
            total += v * (anti_vals[k + 1] - anti_vals[k])
    return total


def _shifted_legendre_int_coeffs(j: int) -> list[int]:
    # Coefficients of the shifted Legendre polynomial on [0, 1]:
    # L_j(x) = sum_i (-1)^(j+i) C(j, i) C(j+i, i) x^i, all integers.
    return [
        (-1) ** (j + i) * math.comb(j, i) * math.comb(j + i, i) for i in range(j + 1)
    ]


def legendre_basis(d: int, R: float) -> list[PolynomialR]:
    """Orthonormal polynomial basis of degree <= d for L^2([0, R]).

    Coefficients are assembled from exact integer binomial products before the
    single irrational scaling sqrt((2j+1)/R) is applied, so no cancellation
    happens in floating point.  Every polynomial is padded to arity d+1.
    """
    if R <= 0.0:
        raise ConfigurationError(f"R must be positive, got {R}")
    if d < 0 or d > MAX_BASIS_DEGREE:
        raise ConfigurationError(f"basis degree must be in 0..{MAX_BASIS_DEGREE}, got {d}")
    basis = []
    for j in range(d + 1):
        ints = _shifted_legendre_int_coeffs(j)
        scale = math.sqrt((2 * j + 1) / R)
        coeffs = [0.0] * (d + 1)
        for i, c in enumerate(ints):
            coeffs[i] = c * scale / R**i
        basis.append(PolynomialR(tuple(coeffs)))
    return basis


def unit_ball_volume(i: int) -> float:
    """Volume of the unit ball in dimension i (1, 2, pi, 4pi/3, ...)."""
    if i < 0:
        raise ConfigurationError(f"dimension must be non-negative, got {i}")
    return math.pi ** (i / 2) / math.gamma(i / 2 + 1)


def extraction_matrix(d: int, R: float) -> np.ndarray:
    """Linear map from basis inner products to intrinsic volumes.

    Row i gives V_i as a combination of the inner products a_0..a_d: the
    reconstructed polynomial sum_j a_j P_j has monomial coefficient
    c_k = omega_k V_{d-k}, so V_i = c_{d-i} / omega_{d-i}.
    """
    basis = legendre_basis(d, R)
    mat = np.zeros((d + 1, d + 1))
    for i in range(d + 1):
        k = d - i
        omega = unit_ball_volume(k)
        for j, poly in enumerate(basis):
            mat[i, j] = poly.coeffs[k] / omega
    return mat


def project_and_extract(inner_products, R: float, d: int) -> tuple[float, ...]:
    """Intrinsic volumes from L^2([0, R]) projection coefficients.

    ``inner_products[j]`` is the inner product of the profile integral with
    the j-th orthonormal basis polynomial; the result is (V_0, ..., V_d).
    """
    a = np.asarray(inner_products, dtype=float)
    if a.shape != (d + 1,):
        raise ConfigurationError(f"expected {d + 1} inner products, got shape {a.shape}")
    return tuple(float(v) for v in extraction_matrix(d, R) @ a)


def error_constant(i: int, d: int) -> float:
    """Convergence-rate constant P(i, d) in the linear error bound."""
    if not 0 <= i <= d:
        raise ConfigurationError(f"need 0 <= i <= d, got i={i}, d={d}")
    total = sum(
        (2 * j + 1) * math.comb(j, i) * math.comb(i + j, i) for j in range(i, d + 1)
    )
    return 4 * total / unit_ball_volume(d - i)


def theoretical_bound(
    i: int, d: int, eps: float, mu: float, R: float, vol_term: float, mass_term: float
) -> float:
    """Worst-case bound eps * P(i,d) / (mu * R^(i+1)) * (vol + mass).

    The volume and curvature-mass terms are caller-supplied; nothing here
    estimates them.
    """
    if mu <= 0.0:
        raise ConfigurationError(f"mu must be positive, got {mu}")
    if R <= 0.0:
        raise ConfigurationError(f"R must be positive, got {R}")
    if eps < 0.0:
        raise ConfigurationError(f"eps must be non-negative, got {eps}")
    return eps * error_constant(i, d) / (mu * R ** (i + 1)) * (vol_term + mass_term)
