"""
Zooming quantized encoder/decoder pair for the remote exosystem state

Both ends run a copy of the exosystem flow and, at every sample kT, correct
it by the quantized innovation w_q(k) * L(k) / N. The zoom length L(k)
contracts geometrically by sqrt(r) * M(T) / N per sample.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from src.errors import BudgetTooSmall, FrameIndexMismatch
from src.sim.boxes import Box
from src.sim.hybrid import VectorField

logger = logging.getLogger(__name__)


def bits_per_component(N: int) -> int:
    """ceil(log2 N), exact for integers"""
    return (N - 1).bit_length()


@dataclass(frozen=True)
class ExoSpec:
    """
    Remote exosystem w' = s(w) with reference output y_r(w)

    W is W0 grown by W_margin on every axis and stands in for the invariant
    set of initial conditions. log_norm, when known, bounds the Euclidean
    logarithmic norm of the Jacobian of s everywhere, so no pair separates
    faster than exp(log_norm * t).
    """
    r: int
    s: VectorField
    y_r: Callable[[np.ndarray], np.ndarray]
    W0: Box
    W_margin: float = 0.0
    name: str = "exo"
    log_norm: Optional[float] = None

    def __post_init__(self):
        if self.s.dimension != self.r or self.W0.dim != self.r:
            raise ValueError(f"exosystem {self.name}: field/box dimension does not match r={self.r}")
        if self.W_margin < 0:
            raise ValueError(f"W_margin must be nonnegative, got {self.W_margin}")

    @property
    def W(self) -> Box:
        return self.W0.inflate(self.W_margin)


@dataclass(frozen=True)
class ChannelSpec:
    N_b: int
    N: int
    T: float
    L0: float
    M_T: float
    r: int

    def __post_init__(self):
        if self.N < 2:
            raise BudgetTooSmall(f"need at least 2 quantization levels, got N={self.N}")
        if self.r * bits_per_component(self.N) > self.N_b:
            raise BudgetTooSmall(
                f"N={self.N} needs {self.r * bits_per_component(self.N)} bits per sample, budget is {self.N_b}"
            )
        if self.T <= 0:
            raise ValueError(f"sampling interval must be positive, got T={self.T}")
        if self.L0 <= 0:
            raise ValueError(f"initial zoom length must be positive, got L0={self.L0}")
        if self.M_T < 1.0:
            raise ValueError(f"expansion factor must be >= 1, got M_T={self.M_T}")

    @classmethod
    def from_budget(cls, N_b: int, r: int, T: float, L0: float, M_T: float) -> "ChannelSpec":
        return cls(N_b=N_b, N=derive_levels(N_b, r), T=T, L0=L0, M_T=M_T, r=r)

    @property
    def frame_bits(self) -> int:
        return self.r * bits_per_component(self.N)

    @property
    def zoom_ratio(self) -> float:
        return math.sqrt(self.r) * self.M_T / self.N

    def zoom_length(self, k: int) -> float:
        """L(k) = L0 * (sqrt(r) * M_T / N) ** k"""
        return self.L0 * self.zoom_ratio ** k

    def reconstruction_bound(self, k: int) -> float:
        """Bound on |w(kT) - w_hat(kT)| right after sample k"""
        return math.sqrt(self.r) * self.zoom_length(k) / (2 * self.N)


@dataclass(frozen=True)
class CodecState:
    """w_hat is w_e on the encoder side and w_d on the decoder side; L = L(k)"""
    w_hat: np.ndarray
    L: float
    k: int = 0

    @classmethod
    def initial(cls, w_hat0, channel: ChannelSpec) -> "CodecState":
        return cls(w_hat=np.array(w_hat0, dtype=float), L=channel.L0, k=0)

    def with_w_hat(self, w_hat) -> "CodecState":
        return CodecState(w_hat=np.array(w_hat, dtype=float), L=self.L, k=self.k)


@dataclass(frozen=True)
class SymbolVector:
    symbols: np.ndarray
    k: int
    saturated: bool = False

    @property
    def r(self) -> int:
        return len(self.symbols)


def compute_L0(W0: Box) -> float:
    """max |x_i - y_i| over W0 x W0, i.e. the largest side of the box"""
    return float(np.max(W0.side_lengths()))


def derive_levels(N_b: int, r: int) -> int:
    """Largest N with r * ceil(log2 N) <= N_b"""
    if r < 1:
        raise ValueError(f"dimension must be positive, got r={r}")
    bits = N_b // r
    if bits < 1:
        raise BudgetTooSmall(f"N_b={N_b} bits cannot carry 1 bit for each of r={r} components")
    return 2 ** bits


def quantize_vector(delta, L: float, N: int) -> Tuple[np.ndarray, bool]:
    """
    Componentwise zooming quantizer on the half-integer (N even) or integer
    (N odd) grid; sgn(0) is +1. Returns (symbols, saturated).
    """
    if L <= 0:
        raise ValueError(f"zoom length must be positive, got L={L}")
    delta = np.asarray(delta, dtype=float)
    sign = np.where(delta >= 0.0, 1.0, -1.0)
    scaled = N * np.abs(delta) / L
    if N % 2 == 0:
        # a zero difference takes the smallest positive level
        mag = np.maximum(np.ceil(scaled), 1.0) - 0.5
    else:
        mag = np.ceil(scaled - 0.5)
    limit = (N - 1) / 2.0
    saturated = bool(np.any(mag > limit))
    symbols = sign * np.minimum(mag, limit) + 0.0
    return symbols, saturated


def quantize_component(delta: float, L: float, N: int) -> Tuple[float, bool]:
    symbols, saturated = quantize_vector(np.array([delta]), L, N)
    return float(symbols[0]), saturated


def _apply_innovation(state: CodecState, symbols: np.ndarray, channel: ChannelSpec) -> CodecState:
    w_hat = state.w_hat + symbols * (state.L / channel.N)
    k = state.k + 1
    return CodecState(w_hat=w_hat, L=channel.zoom_length(k), k=k)


def encoder_jump(state: CodecState, w_true, channel: ChannelSpec) -> Tuple[CodecState, SymbolVector]:
    """
    Quantize w(kT) - w_e(kT-) and reset the encoder copy
    """
    delta = np.asarray(w_true, dtype=float) - state.w_hat
    symbols, saturated = quantize_vector(delta, state.L, channel.N)
    if saturated:
        logger.warning(
            f"⚠️ quantizer saturated at k={state.k}: |delta|={np.max(np.abs(delta)):.4g} > L/2={state.L / 2:.4g}"
        )
    sv = SymbolVector(symbols=symbols, k=state.k, saturated=saturated)
    return _apply_innovation(state, symbols, channel), sv


def decoder_jump(state: CodecState, symbols: SymbolVector, channel: ChannelSpec) -> CodecState:
    """
    Same reset law as the encoder, driven by the received symbols
    """
    if symbols.k != state.k:
        raise FrameIndexMismatch(f"decoder at k={state.k} received symbols for k={symbols.k}")
    return _apply_innovation(state, np.asarray(symbols.symbols, dtype=float), channel)
