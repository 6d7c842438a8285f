"""
Expansion bound M(T) and the rate condition relating it to the channel

M(T) bounds |w1(T) - w2(T)| / |w1(0) - w2(0)| over initial pairs in W. It is
estimated here by Monte Carlo over uniformly drawn pairs; all pairs are
flowed together as one batched state so the estimate is a single RK4 run.
"""

import logging
import math
from typing import Optional

import numpy as np

from src.cache.expansion_cache import expansion_cache
from src.codec.zoom_codec import ExoSpec, bits_per_component
from src.sim.hybrid import DEFAULT_STEP, integrate_flow

logger = logging.getLogger(__name__)

DEFAULT_SAFETY = 1.2
MIN_PAIRS = 1000
ISOMETRY_TOLERANCE = 1e-9


def estimate_expansion(
    spec: ExoSpec,
    T: float,
    n_pairs: int = 2000,
    seed: int = 0,
    h: float = DEFAULT_STEP,
    safety: float = DEFAULT_SAFETY,
    use_cache: bool = True,
) -> float:
    """
    Safety-scaled Monte Carlo estimate of M(T), floored at 1.

    The safety factor only multiplies a measured expansion: a flow whose
    largest sampled ratio is <= 1 (isometries, contractions) returns exactly 1.
    When the exosystem carries a log_norm bound, the scaled value is capped at
    exp(log_norm * T) but never drops below the sampled ratio.
    """
    if T <= 0:
        raise ValueError(f"horizon must be positive, got T={T}")
    if n_pairs < MIN_PAIRS:
        raise ValueError(f"n_pairs must be at least {MIN_PAIRS}, got {n_pairs}")

    def compute() -> float:
        raw = max_expansion_ratio(spec, T, n_pairs, seed, h)
        estimate = 1.0 if raw <= 1.0 + ISOMETRY_TOLERANCE else max(1.0, safety * raw)
        ceiling = separation_bound(spec, T)
        if ceiling is not None and estimate > ceiling:
            estimate = max(raw, ceiling)
        logger.info(
            f"📐 M({T:g}) for {spec.name}: raw max ratio {raw:.6f}, estimate {estimate:.6f} "
            f"({n_pairs} pairs, seed {seed})"
        )
        return estimate

    if not use_cache:
        return compute()
    key = expansion_cache.cache_key(
        exo=spec.name, W=spec.W.as_bounds(), log_norm=spec.log_norm,
        T=T, n_pairs=n_pairs, seed=seed, h=h, safety=safety,
    )
    return expansion_cache.get_or_compute(key, compute)


def separation_bound(spec: ExoSpec, T: float) -> Optional[float]:
    """exp(log_norm * T), or None when the exosystem carries no log_norm"""
    if spec.log_norm is None:
        return None
    return math.exp(spec.log_norm * T)


def max_expansion_ratio(spec: ExoSpec, T: float, n_pairs: int, seed: int, h: float = DEFAULT_STEP) -> float:
    """Largest sampled |w1(T) - w2(T)| / |w1(0) - w2(0)| over pairs drawn from W"""
    rng = np.random.default_rng(seed)
    W = spec.W
    first = W.sample(rng, n_pairs)
    second = W.sample(rng, n_pairs)
    stacked = np.concatenate([first, second], axis=0)
    batched = spec.s.batched(2 * n_pairs)
    traj = integrate_flow(batched, stacked.reshape(-1), 0.0, T, h)
    final = traj.final_state.reshape(2 * n_pairs, spec.r)
    d0 = np.linalg.norm(first - second, axis=1)
    dT = np.linalg.norm(final[:n_pairs] - final[n_pairs:], axis=1)
    valid = d0 > 0
    if not np.any(valid):
        return 1.0
    return float(np.max(dT[valid] / d0[valid]))


def check_rate_condition(N: int, r: int, M_T: float) -> bool:
    """N > sqrt(r) * M(T), strictly"""
    return N > math.sqrt(r) * M_T


def min_levels_for_rate(r: int, M_T: float) -> int:
    """Smallest N satisfying the rate condition"""
    return int(math.floor(math.sqrt(r) * M_T)) + 1


def min_bits_for_rate(r: int, M_T: float) -> int:
    """Bits per sample the rate condition demands: r * ceil(log2 N_min)"""
    return r * bits_per_component(max(2, min_levels_for_rate(r, M_T)))


def bit_rate(N_b: int, T: float) -> float:
    """Channel usage in bits per second"""
    return N_b / T
