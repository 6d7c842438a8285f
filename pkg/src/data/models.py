"""
Built-in exosystems, plants and immersions - the scenario model catalogue
Names are normalized the same way everywhere (aliases accepted from configs)
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from src.codec.zoom_codec import ExoSpec
from src.sim.boxes import Box
from src.sim.hybrid import VectorField

logger = logging.getLogger(__name__)

EXOSYSTEM_MASTER = {
    "van_der_pol": {
        "description": "w1' = w2 + eps (w1 - a w1^3), w2' = -w1, y_r = w2",
        "variants": ["vdp", "vanderpol", "van-der-pol"],
        "r": 2,
        "params": {"eps": 1.5, "a": 1.0},
    },
    "harmonic": {
        "description": "w1' = omega w2, w2' = -omega w1, y_r = w2",
        "variants": ["oscillator", "rotation", "harmonic_oscillator"],
        "r": 2,
        "params": {"omega": 1.0},
    },
    "frozen": {
        "description": "w' = 0, y_r = last component",
        "variants": ["constant", "static"],
        "r": None,  # any dimension
        "params": {},
    },
}

PLANT_MASTER = {
    "integrator": {
        "description": "y' = u (no zero dynamics)",
        "variants": ["single_integrator"],
        "n": 0,
        "params": {},
    },
    "lag": {
        "description": "z' = -alpha z + y, y' = mu z + u",
        "variants": ["first_order_lag", "lag_zero_dynamics"],
        "n": 1,
        "params": {"alpha": 1.0, "mu": 0.5},
    },
}


def _normalize(input_text: str, master: Dict) -> Optional[str]:
    if not input_text:
        return None
    input_lower = input_text.lower().strip()
    if input_lower in master:
        return input_lower
    for key, data in master.items():
        if input_lower in [v.lower() for v in data["variants"]]:
            return key
    return None


def normalize_exosystem_name(input_text: str) -> Optional[str]:
    return _normalize(input_text, EXOSYSTEM_MASTER)


def normalize_plant_name(input_text: str) -> Optional[str]:
    return _normalize(input_text, PLANT_MASTER)


def list_supported_exosystems():
    return list(EXOSYSTEM_MASTER.keys())


def list_supported_plants():
    return list(PLANT_MASTER.keys())


def merged_params(master: Dict, name: str, params: Optional[Dict]) -> Dict[str, float]:
    """Defaults from the catalogue overridden by params; unknown names rejected"""
    defaults = dict(master[name]["params"])
    for key in (params or {}):
        if key not in defaults:
            raise ValueError(f"unknown parameter '{key}' for model '{name}' (known: {sorted(defaults)})")
    defaults.update({k: float(v) for k, v in (params or {}).items()})
    return defaults


def model_label(name: str, params: Dict[str, float]) -> str:
    inner = ",".join(f"{k}={params[k]!r}" for k in sorted(params))
    return f"{name}({inner})"


# Van der Pol

def vdp_field(eps: float, a: float) -> VectorField:
    def fn(w):
        w1 = w[..., 0]
        w2 = w[..., 1]
        return np.stack([w2 + eps * (w1 - a * w1 ** 3), -w1], axis=-1)

    return VectorField(dimension=2, fn=fn, name=model_label("van_der_pol", {"eps": eps, "a": a}))


def vdp_log_norm(eps: float, a: float) -> Optional[float]:
    """
    Sup of the Euclidean logarithmic norm of the Van der Pol Jacobian.

    The symmetric part is diag(eps (1 - 3 a w1^2), 0), whose top eigenvalue
    never exceeds eps when eps, a >= 0. Otherwise it is unbounded.
    """
    if eps < 0 or a < 0:
        return None
    return eps


def tau_vdp(w, eps: float, a: float) -> np.ndarray:
    """
    (u_ss, u_ss') along the oscillator for the integrator plant, u_ss = -w1
    """
    w = np.asarray(w, dtype=float)
    w1 = w[..., 0]
    w2 = w[..., 1]
    return np.stack([-w1, -w2 - eps * (w1 - a * w1 ** 3)], axis=-1)


def vdp_phi(eps: float, a: float) -> Callable:
    """u'' + phi(u, u') = 0 with phi(xi) = xi_1 - eps (xi_2 - 3 a xi_1^2 xi_2)"""
    def phi(xi):
        xi = np.asarray(xi, dtype=float)
        x1 = xi[..., 0]
        x2 = xi[..., 1]
        return x1 - eps * (x2 - 3.0 * a * x1 ** 2 * x2)

    return phi


# Harmonic oscillator

def harmonic_field(omega: float) -> VectorField:
    def fn(w):
        return np.stack([omega * w[..., 1], -omega * w[..., 0]], axis=-1)

    return VectorField(dimension=2, fn=fn, name=model_label("harmonic", {"omega": omega}))


def tau_harmonic(w, omega: float) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return np.stack([-omega * w[..., 0], -omega ** 2 * w[..., 1]], axis=-1)


def harmonic_phi(omega: float) -> Callable:
    """u'' + omega^2 u = 0"""
    def phi(xi):
        xi = np.asarray(xi, dtype=float)
        return omega ** 2 * xi[..., 0]

    return phi


def frozen_field(r: int) -> VectorField:
    return VectorField(dimension=r, fn=lambda w: np.zeros_like(w), name=f"frozen(r={r})")


def _last_component(w):
    return np.asarray(w)[..., -1]


def build_exosystem(name: str, params: Optional[Dict], W0: Box, W_margin: float) -> ExoSpec:
    key = normalize_exosystem_name(name)
    if key is None:
        raise ValueError(f"unknown exosystem '{name}'. Supported: {list_supported_exosystems()}")
    p = merged_params(EXOSYSTEM_MASTER, key, params)
    if key == "van_der_pol":
        s = vdp_field(p["eps"], p["a"])
        log_norm = vdp_log_norm(p["eps"], p["a"])
    elif key == "harmonic":
        s = harmonic_field(p["omega"])
        log_norm = 0.0
    else:
        s = frozen_field(W0.dim)
        log_norm = 0.0
    return ExoSpec(
        r=s.dimension, s=s, y_r=_last_component, W0=W0, W_margin=W_margin, name=s.name, log_norm=log_norm
    )


@dataclass(frozen=True)
class PlantSpec:
    """
    z' = f(z, y, mu), y' = q(z, y, mu) + u; f and q accept stacked rows
    """
    n: int
    f: Callable
    q: Callable
    mu: Tuple[float, ...] = ()
    Z_box: Optional[Box] = None
    Y_box: Optional[Box] = None
    name: str = "plant"


def build_plant(name: str, params: Optional[Dict], Z_box: Optional[Box] = None, Y_box: Optional[Box] = None) -> PlantSpec:
    key = normalize_plant_name(name)
    if key is None:
        raise ValueError(f"unknown plant '{name}'. Supported: {list_supported_plants()}")
    p = merged_params(PLANT_MASTER, key, params)
    label = model_label(key, p)
    if key == "integrator":
        return PlantSpec(
            n=0,
            f=lambda z, y, mu: np.zeros_like(z),
            q=lambda z, y, mu: np.zeros_like(np.asarray(y, dtype=float)),
            Z_box=Z_box,
            Y_box=Y_box,
            name=label,
        )
    alpha = p["alpha"]
    return PlantSpec(
        n=1,
        f=lambda z, y, mu: -alpha * z + np.asarray(y)[..., None],
        q=lambda z, y, mu: mu[0] * z[..., 0],
        mu=(p["mu"],),
        Z_box=Z_box,
        Y_box=Y_box,
        name=label,
    )


@dataclass(frozen=True)
class Immersion:
    """Order d, phi with u^(d) + phi(u, ..., u^(d-1)) = 0, and tau when known in closed form"""
    d: int
    phi: Callable
    tau: Optional[Callable] = None
    notes: str = ""


def immersion_for(exo_name: str, exo_params: Optional[Dict], plant_name: str) -> Immersion:
    """
    Immersions known for the catalogue; other pairs need phi supplied by code
    """
    exo = normalize_exosystem_name(exo_name)
    plant = normalize_plant_name(plant_name)
    p = merged_params(EXOSYSTEM_MASTER, exo, exo_params) if exo else {}
    if exo == "van_der_pol" and plant == "integrator":
        eps, a = p["eps"], p["a"]
        return Immersion(d=2, phi=vdp_phi(eps, a), tau=lambda w: tau_vdp(w, eps, a))
    if exo == "harmonic" and plant in ("integrator", "lag"):
        omega = p["omega"]
        tau = (lambda w: tau_harmonic(w, omega)) if plant == "integrator" else None
        return Immersion(d=2, phi=harmonic_phi(omega), tau=tau)
    if exo == "frozen" and plant == "integrator":
        return Immersion(d=1, phi=lambda xi: np.zeros(np.shape(xi)[:-1]), tau=lambda w: np.zeros(np.shape(w)[:-1] + (1,)))
    raise ValueError(f"no built-in immersion for exosystem '{exo_name}' with plant '{plant_name}'")
