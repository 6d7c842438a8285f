"""
Internal-model regulator driven by the reconstructed tracking error

    xi' = Phi_c(xi) - G k e_hat
    u   = xi_1 - k e_hat

Phi_c is the observer-form chain (xi_2, ..., xi_d, -phi_c(xi)), phi_c a
compactly supported copy of the immersion nonlinearity phi, and G the
high-gain injection vector G_i = kappa^i c_{d-i}.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence, Tuple

import numpy as np

from src.errors import NotHurwitz
from src.sim.boxes import Box

logger = logging.getLogger(__name__)

DEFAULT_BLEND_WIDTH = 0.5
DEFAULT_SUPPORT_GROWTH = 0.25


def is_hurwitz(coeffs: Sequence[float]) -> bool:
    """
    Routh-Hurwitz test for a0 s^n + a1 s^(n-1) + ... + an, a0 > 0.
    Marginal cases (a zero in the first column) count as not Hurwitz.
    """
    a = [float(c) for c in coeffs]
    n = len(a) - 1
    if n < 1 or a[0] <= 0 or any(c <= 0 for c in a):
        return False
    width = (n + 2) // 2 + 1
    first = a[0::2] + [0.0] * (width - len(a[0::2]))
    second = a[1::2] + [0.0] * (width - len(a[1::2]))
    rows = [first, second]
    for _ in range(n - 1):
        upper, lower = rows[-2], rows[-1]
        if lower[0] <= 0:
            return False
        new = [(lower[0] * upper[j + 1] - upper[0] * lower[j + 1]) / lower[0] for j in range(width - 1)]
        rows.append(new + [0.0])
    return all(row[0] > 0 for row in rows[: n + 1])


@dataclass(frozen=True)
class GainSpec:
    """
    kappa: observer gain; c = (c_0, ..., c_{d-1}) with
    lambda^d + c_0 lambda^(d-1) + ... + c_{d-1} Hurwitz; k: error gain
    """
    kappa: float
    c: Tuple[float, ...]
    k: float

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.k <= 0:
            raise ValueError(f"error gain k must be positive, got {self.k}")
        if not is_hurwitz((1.0,) + tuple(self.c)):
            raise NotHurwitz(f"lambda^{len(self.c)} + {self.c} is not Hurwitz")

    @property
    def d(self) -> int:
        return len(self.c)

    @cached_property
    def G(self) -> np.ndarray:
        return build_gain_vector(self, self.d)


def build_gain_vector(spec: GainSpec, d: int) -> np.ndarray:
    """G_i = kappa^i c_{d-i}, i = 1..d"""
    if len(spec.c) != d:
        raise ValueError(f"gain spec has {len(spec.c)} coefficients, internal model order is {d}")
    if not is_hurwitz((1.0,) + tuple(spec.c)):
        raise NotHurwitz(f"lambda^{d} + {spec.c} is not Hurwitz")
    return np.array([spec.kappa ** i * spec.c[d - i] for i in range(1, d + 1)], dtype=float)


@dataclass(frozen=True)
class InternalModelSpec:
    d: int
    phi: Callable[[np.ndarray], np.ndarray]
    support_box: Box
    blend_width: float = DEFAULT_BLEND_WIDTH

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"internal model order must be positive, got d={self.d}")
        if self.support_box.dim != self.d:
            raise ValueError(f"support box has dimension {self.support_box.dim}, expected d={self.d}")
        if self.blend_width <= 0:
            raise ValueError(f"blend_width must be positive, got {self.blend_width}")


@dataclass
class RegulatorState:
    xi: np.ndarray


class CompactPhi:
    """
    phi_c(eta) = beta(eta) * phi(clip(eta)), beta the product over axes of a
    piecewise-linear bump: 1 on the support box S, 0 outside S grown by the
    blend width. Accepts a single point (d,) or rows (m, d).
    """

    def __init__(self, spec: InternalModelSpec):
        self.phi = spec.phi
        self.support = spec.support_box
        self.outer = spec.support_box.inflate(spec.blend_width)
        self.blend_width = spec.blend_width
        self._lo = self.support.lo_array
        self._hi = self.support.hi_array
        self._outer_lo = self.outer.lo_array
        self._outer_hi = self.outer.hi_array

    def bump(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        dist = np.maximum(np.maximum(self._lo - eta, eta - self._hi), 0.0)
        return np.prod(np.clip(1.0 - dist / self.blend_width, 0.0, 1.0), axis=-1)

    def __call__(self, eta):
        eta = np.asarray(eta, dtype=float)
        beta = self.bump(eta)
        if eta.ndim == 1:
            if beta == 0.0:
                return 0.0
            return float(beta * self.phi(np.clip(eta, self._outer_lo, self._outer_hi)))
        values = beta * self.phi(np.clip(eta, self._outer_lo, self._outer_hi))
        return np.where(beta == 0.0, 0.0, values)


def build_phi_c(spec: InternalModelSpec) -> CompactPhi:
    return CompactPhi(spec)


def internal_model_field(xi, phi_c: Callable) -> np.ndarray:
    """Phi_c(xi) = (xi_2, ..., xi_d, -phi_c(xi))"""
    xi = np.asarray(xi, dtype=float)
    out = np.empty_like(xi)
    out[:-1] = xi[1:]
    out[-1] = -phi_c(xi)
    return out


def regulator_rhs(state: RegulatorState, e_hat: float, gains: GainSpec, phi_c: Callable) -> Tuple[np.ndarray, float]:
    """(xi', u) = (Phi_c(xi) - G k e_hat, xi_1 - k e_hat)"""
    injection = gains.k * e_hat
    xi_dot = internal_model_field(state.xi, phi_c) - gains.G * injection
    u = float(state.xi[0]) - injection
    return xi_dot, u


def observer_rhs(xi, u: float, gains: GainSpec, phi_c: Callable) -> np.ndarray:
    """Internal model in observer form driven by an input u: Phi_c(xi) + G (u - xi_1)"""
    xi = np.asarray(xi, dtype=float)
    return internal_model_field(xi, phi_c) + gains.G * (u - xi[0])
