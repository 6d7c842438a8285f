"""
Run diagnostics: tracking errors, decoder error, zoom lengths, summary metrics, CSV export
"""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Dict, List, Optional

import numpy as np

from src.sim.hybrid import TAG_POST, TAG_PRE, Trajectory

if TYPE_CHECKING:
    from src.closedloop.system import RunResult, SampleRecord, Scenario, StateLayout

logger = logging.getLogger(__name__)

DIAGNOSTIC_COLUMNS = ["u", "e", "e_hat", "dec_err", "L"]
JUMP_COLUMN = "jump"
DWELL_TOLERANCE = 1e-9


@dataclass
class Diagnostics:
    t: np.ndarray
    e: np.ndarray
    e_hat: np.ndarray
    u: np.ndarray
    dec_err: np.ndarray
    L: np.ndarray


@dataclass
class TrackingError:
    times: np.ndarray
    e: np.ndarray
    t_tail: Optional[float]
    tail_sup: Optional[float]


def tail_sup(times: np.ndarray, values: np.ndarray, t_tail: float) -> float:
    """sup |values(t)| over t >= t_tail (0 when the tail is empty)"""
    mask = times >= t_tail
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(values[mask])))


def compute_tracking_error(
    times, w, y, y_r: Callable, t_tail: Optional[float] = None
) -> TrackingError:
    """e(t) = y(t) - y_r(w(t)) pointwise, plus the sup over the tail t >= t_tail"""
    times = np.asarray(times, dtype=float)
    e = np.asarray(y, dtype=float) - np.asarray(y_r(np.asarray(w, dtype=float)), dtype=float)
    sup = tail_sup(times, e, t_tail) if t_tail is not None else None
    return TrackingError(times=times, e=e, t_tail=t_tail, tail_sup=sup)


def check_dwell_compat(T_star_estimate: float, T_bar: float) -> int:
    """Smallest positive ell with ell * T_bar >= T*"""
    if T_bar <= 0:
        raise ValueError(f"T_bar must be positive, got {T_bar}")
    ratio = T_star_estimate / T_bar
    return max(1, math.ceil(ratio - DWELL_TOLERANCE))


def _zoom_column(traj: Trajectory, samples: List["SampleRecord"], L0: float) -> np.ndarray:
    """
    Zoom length used at the most recent sample; post rows of a sample count it
    """
    if not samples:
        return np.full(len(traj), L0)
    sample_times = np.array([s.t for s in samples])
    used = np.array([s.L for s in samples])
    is_post = np.array([tag == TAG_POST for tag in traj.tags])
    done = np.where(
        is_post,
        np.searchsorted(sample_times, traj.times, side="right"),
        np.searchsorted(sample_times, traj.times, side="left"),
    )
    return np.where(done == 0, L0, used[np.maximum(done - 1, 0)])


def compute_diagnostics(sc: "Scenario", layout: "StateLayout", traj: Trajectory, samples: List["SampleRecord"]) -> Diagnostics:
    states = traj.states
    w = states[:, layout.w]
    y = states[:, layout.y]
    xi1 = states[:, layout.xi.start]
    e = compute_tracking_error(traj.times, w, y, sc.exo.y_r).e
    e_hat = y - sc.exo.y_r(states[:, layout.active_decoder])
    injected = e if sc.use_true_error else e_hat
    return Diagnostics(
        t=traj.times,
        e=e,
        e_hat=e_hat,
        u=xi1 - sc.gains.k * injected,
        dec_err=np.linalg.norm(w - states[:, layout.w_d], axis=1),
        L=_zoom_column(traj, samples, sc.channel.L0),
    )


def deadbeat_violations(result: "RunResult") -> int:
    """Samples where |w(kT) - w_d(kT)| exceeds sqrt(r) L(k) / (2N)"""
    channel = result.scenario.channel
    count = 0
    for s in result.samples:
        bound = math.sqrt(channel.r) * s.L / (2 * channel.N)
        if np.linalg.norm(s.w - s.w_d) > bound * (1 + 1e-12):
            count += 1
    return count


def containment_violations(result: "RunResult", tol: float = 0.0) -> int:
    """Recorded times where w_d (and w_d' when present) lies outside W"""
    W = result.scenario.exo.W
    states = result.trajectory.states
    outside = ~W.contains_rows(states[:, result.layout.w_d], tol)
    if result.layout.second_level:
        outside |= ~W.contains_rows(states[:, result.layout.w_dprime], tol)
    return int(np.count_nonzero(outside))


def zoom_ratio_deviation(result: "RunResult") -> float:
    """max over k of |L(k)/L(k-1) - sqrt(r) M_T / N| relative to the nominal ratio"""
    nominal = result.scenario.channel.zoom_ratio
    L = np.array([s.L for s in result.samples])
    if len(L) < 2:
        return 0.0
    return float(np.max(np.abs(L[1:] / L[:-1] - nominal)) / nominal)


def summarize(result: "RunResult", t_tail: float) -> Dict[str, float]:
    """Scalar metrics of one run, in a fixed key order"""
    sc = result.scenario
    times = result.trajectory.times
    diag = result.diagnostics
    from src.codec.expansion import bit_rate

    return {
        "tail_tracking_error": tail_sup(times, diag.e, t_tail),
        "tail_reconstructed_error": tail_sup(times, diag.e_hat, t_tail),
        "tail_decoder_error": tail_sup(times, diag.dec_err, t_tail),
        "max_state_norm": float(np.max(np.abs(result.trajectory.states))),
        "zoom_ratio": sc.channel.zoom_ratio,
        "zoom_ratio_deviation": zoom_ratio_deviation(result),
        "final_zoom_length": float(diag.L[-1]),
        "M_T": sc.channel.M_T,
        "N": sc.channel.N,
        "N_b": sc.channel.N_b,
        "T": sc.channel.T,
        "bit_rate": bit_rate(sc.channel.N_b, sc.channel.T),
        "rate_condition": bool(result.rate_condition),
        "samples": len(result.samples),
        "saturations": result.saturation_count,
        "deadbeat_violations": deadbeat_violations(result),
        "containment_violations": containment_violations(result),
        "t_tail": t_tail,
    }


def csv_header(layout: "StateLayout") -> List[str]:
    return ["t"] + layout.column_names() + DIAGNOSTIC_COLUMNS + [JUMP_COLUMN]


def write_run_csv(result: "RunResult", path) -> int:
    """
    One row per recorded time; jump instants appear twice, flagged pre/post
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    traj, diag = result.trajectory, result.diagnostics
    extra = np.column_stack([diag.u, diag.e, diag.e_hat, diag.dec_err, diag.L])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(csv_header(result.layout))
        for i in range(len(traj)):
            flag = traj.tags[i] if traj.tags[i] in (TAG_PRE, TAG_POST) else ""
            row = [repr(float(traj.times[i]))]
            row += [repr(float(v)) for v in traj.states[i]]
            row += [repr(float(v)) for v in extra[i]]
            row.append(flag)
            writer.writerow(row)
    logger.info(f"💾 Trajectory CSV written: {path} ({len(traj)} rows)")
    return len(traj)
