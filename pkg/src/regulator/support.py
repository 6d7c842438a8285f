"""
Support box S for the compactly supported immersion nonlinearity

S must contain the image under tau of the steady-state attractor. It is
sampled by flowing the exosystem (and the plant zero dynamics driven by
y = y_r(w)) from the corners of W0, dropping the first half as transient,
and bounding (u_ss, u_ss', ..., u_ss^(d-1)) over the rest.
"""

import logging
from typing import Callable, Optional

import numpy as np

from src.cache.expansion_cache import support_cache
from src.codec.zoom_codec import ExoSpec
from src.data.models import PlantSpec
from src.regulator.internal_model import DEFAULT_SUPPORT_GROWTH
from src.sim.boxes import Box
from src.sim.hybrid import VectorField, integrate_flow

logger = logging.getLogger(__name__)

SUPPORT_DURATION = 100.0
SUPPORT_STEP = 1e-2


def _zero_dynamics_samples(exo: ExoSpec, plant: PlantSpec, duration: float, h: float):
    corners = exo.W0.corners()
    m, r, n = len(corners), exo.r, plant.n
    z0 = plant.Z_box.center if (n and plant.Z_box is not None) else np.zeros(n)
    x0 = np.concatenate([np.concatenate([c, z0]) for c in corners])

    def fn(x):
        rows = x.reshape(m, r + n)
        w = rows[:, :r]
        dw = exo.s.fn(w)
        dz = plant.f(rows[:, r:], exo.y_r(w), plant.mu)
        return np.concatenate([dw, dz], axis=1).reshape(-1)

    traj = integrate_flow(VectorField(dimension=m * (r + n), fn=fn, name="zero-dynamics"), x0, 0.0, duration, h)
    states = traj.states.reshape(len(traj.times), m, r + n)
    return states[..., :r], states[..., r:]


def steady_state_input_derivatives(
    exo: ExoSpec, plant: PlantSpec, d: int, duration: float = SUPPORT_DURATION, h: float = SUPPORT_STEP
) -> np.ndarray:
    """
    Samples of (u_ss, ..., u_ss^(d-1)) over the second half of the run, shape (samples, d).
    u_ss = L_s y_r(w) - q(z, y_r(w), mu); derivatives by central differences.
    """
    w, z = _zero_dynamics_samples(exo, plant, duration, h)
    y = exo.y_r(w)
    u = np.gradient(y, h, axis=0) - plant.q(z, y, plant.mu)
    columns = [u]
    for _ in range(d - 1):
        columns.append(np.gradient(columns[-1], h, axis=0))
    keep = slice(len(u) // 2, None)
    return np.stack([c[keep].reshape(-1) for c in columns], axis=-1)


def compute_support_box(
    exo: ExoSpec,
    plant: PlantSpec,
    d: int,
    growth: float = DEFAULT_SUPPORT_GROWTH,
    duration: float = SUPPORT_DURATION,
    h: float = SUPPORT_STEP,
    tau: Optional[Callable] = None,
) -> Box:
    """
    Bounding box of tau over the attractor grown by `growth` per axis.
    With tau given in closed form it is evaluated on the exosystem samples.
    """
    def compute() -> Box:
        if tau is not None:
            w, _ = _zero_dynamics_samples(exo, plant, duration, h)
            samples = tau(w[len(w) // 2:].reshape(-1, exo.r))
        else:
            samples = steady_state_input_derivatives(exo, plant, d, duration, h)
        box = Box.bounding(samples).scale(growth)
        logger.info(f"📦 Support box for {exo.name} / {plant.name}: {box.as_bounds()}")
        return box

    key = support_cache.cache_key(
        exo=exo.name, plant=plant.name, W0=exo.W0.as_bounds(), d=d, growth=growth,
        duration=duration, h=h, closed_form=tau is not None,
    )
    return support_cache.get_or_compute(key, compute)
