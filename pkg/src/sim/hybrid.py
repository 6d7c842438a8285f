"""
Fixed-step hybrid simulation: RK4 flows interleaved with time-scheduled jumps
Developer approach: fixed step only, so every jump lands on a step boundary
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import NonFiniteState, ScheduleConflict, StepMisaligned

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-3
ALIGN_TOLERANCE = 1e-9

TAG_FLOW = "flow"
TAG_PRE = "pre"    # kT-
TAG_POST = "post"  # kT


@dataclass(frozen=True)
class VectorField:
    """
    Autonomous vector field x' = fn(x) on R^dimension
    """
    dimension: int
    fn: Callable[[np.ndarray], np.ndarray]
    name: str = "field"

    def eval(self, x: np.ndarray) -> np.ndarray:
        return self.fn(x)

    def batched(self, copies: int) -> "VectorField":
        """
        Same field acting on `copies` stacked states, flattened into one vector.
        fn must accept arrays of shape (copies, dimension).
        """
        dim = self.dimension

        def fn(x: np.ndarray) -> np.ndarray:
            return np.asarray(self.fn(x.reshape(copies, dim))).reshape(-1)

        return VectorField(dimension=dim * copies, fn=fn, name=f"{self.name}x{copies}")


@dataclass(frozen=True)
class JumpSchedule:
    """
    Jumps at t0 + phase + k*period for k >= 0.

    A jump falling exactly on the start time only fires when at_start is set.
    `order` must be declared on every schedule that can coincide with another.
    """
    period: float
    action: Callable[[float, np.ndarray], np.ndarray]
    phase: float = 0.0
    at_start: bool = False
    order: Optional[int] = None
    name: str = "jump"


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    tags: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def jump_indices(self) -> List[Tuple[int, int]]:
        """(pre, post) index pairs, in time order"""
        return [(i, i + 1) for i, tag in enumerate(self.tags) if tag == TAG_PRE]

    def post_jump_states(self) -> List[np.ndarray]:
        return [self.states[i] for i, tag in enumerate(self.tags) if tag == TAG_POST]

    def jump_times(self) -> List[float]:
        return [float(self.times[i]) for i, tag in enumerate(self.tags) if tag == TAG_POST]


def step_count(t0: float, t1: float, h: float) -> int:
    """
    Number of h-steps spanning [t0, t1]; raises StepMisaligned when not an integer
    """
    if h <= 0:
        raise StepMisaligned(f"step size must be positive, got {h}")
    ratio = (t1 - t0) / h
    n = int(round(ratio))
    if abs(ratio - n) > ALIGN_TOLERANCE * max(1.0, abs(ratio)):
        raise StepMisaligned(
            f"interval [{t0}, {t1}] is {ratio:.12g} steps of h={h}, not an integer"
        )
    return n


def _check_state(x: np.ndarray, t: float, ceiling: Optional[float]) -> None:
    if not np.all(np.isfinite(x)):
        raise NonFiniteState(f"non-finite state at t={t:.6f}", t=t)
    if ceiling is not None and np.max(np.abs(x)) > ceiling:
        raise NonFiniteState(
            f"state norm {np.max(np.abs(x)):.3g} exceeded ceiling {ceiling:g} at t={t:.6f}", t=t
        )


def _rk4_segment(
    vf: VectorField,
    x0: np.ndarray,
    t0: float,
    t1: float,
    n: int,
    h: float,
    ceiling: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    times = t0 + np.arange(n + 1) * h
    times[-1] = t1
    states = np.empty((n + 1, vf.dimension))
    x = np.array(x0, dtype=float).reshape(-1)
    states[0] = x
    f = vf.fn
    half = 0.5 * h
    sixth = h / 6.0
    for i in range(n):
        k1 = f(x)
        k2 = f(x + half * k1)
        k3 = f(x + half * k2)
        k4 = f(x + h * k3)
        x = x + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_state(x, times[i + 1], ceiling)
        states[i + 1] = x
    return times, states


def integrate_flow(
    vf: VectorField,
    x0,
    t0: float,
    t1: float,
    h: float = DEFAULT_STEP,
    state_ceiling: Optional[float] = None,
) -> Trajectory:
    """
    Classical RK4 from t0 to t1 with fixed step h, sampled at every step
    """
    if t1 <= t0:
        raise StepMisaligned(f"t1={t1} must be greater than t0={t0}")
    n = step_count(t0, t1, h)
    x0 = np.array(x0, dtype=float).reshape(-1)
    if x0.shape[0] != vf.dimension:
        raise ValueError(f"x0 has dimension {x0.shape[0]}, field {vf.name} expects {vf.dimension}")
    out = np.asarray(vf.fn(x0))
    if out.shape != (vf.dimension,):
        raise ValueError(f"field {vf.name} returned shape {out.shape}, expected ({vf.dimension},)")
    times, states = _rk4_segment(vf, x0, t0, t1, n, h, state_ceiling)
    return Trajectory(times=times, states=states, tags=[TAG_FLOW] * len(times))


def _event_table(
    schedules: Sequence[JumpSchedule], t0: float, total_steps: int, h: float
) -> List[Tuple[int, float, List[JumpSchedule]]]:
    """
    (step index, timestamp, schedules firing in application order), sorted by time
    """
    fired: Dict[int, List[Tuple[int, float, JumpSchedule]]] = {}
    for pos, sched in enumerate(schedules):
        if sched.period <= 0:
            raise StepMisaligned(f"schedule {sched.name} has non-positive period {sched.period}")
        period_steps = step_count(0.0, sched.period, h)
        phase_steps = step_count(0.0, sched.phase, h) if sched.phase > 0 else 0
        k = 0
        while True:
            s = phase_steps + k * period_steps
            if s > total_steps:
                break
            if s > 0 or sched.at_start:
                t = t0 + sched.phase + k * sched.period
                fired.setdefault(s, []).append((pos, t, sched))
            k += 1

    table = []
    for s in sorted(fired):
        group = fired[s]
        if len(group) > 1:
            undeclared = [sched.name for _, _, sched in group if sched.order is None]
            if undeclared:
                raise ScheduleConflict(
                    f"schedules {[sched.name for _, _, sched in group]} coincide at step {s} "
                    f"without a declared order ({undeclared})"
                )
            group = sorted(group, key=lambda item: (item[2].order, item[0]))
        table.append((s, group[0][1], [sched for _, _, sched in group]))
    return table


def run_hybrid(
    vf: VectorField,
    x0,
    schedules: Sequence[JumpSchedule],
    t_end: float,
    h: float = DEFAULT_STEP,
    t0: float = 0.0,
    state_ceiling: Optional[float] = None,
) -> Trajectory:
    """
    Flow under vf, applying scheduled jumps; both kT- and kT values are recorded
    """
    total = step_count(t0, t_end, h)
    events = _event_table(schedules, t0, total, h)
    logger.debug(f"run_hybrid: {total} steps, {len(events)} jump instants")

    x = np.array(x0, dtype=float).reshape(-1)
    if x.shape[0] != vf.dimension:
        raise ValueError(f"x0 has dimension {x.shape[0]}, field {vf.name} expects {vf.dimension}")
    _check_state(x, t0, state_ceiling)

    time_chunks: List[np.ndarray] = [np.array([t0])]
    state_chunks: List[np.ndarray] = [x.reshape(1, -1)]
    tags: List[str] = [TAG_FLOW]
    t_cur, s_cur = t0, 0

    for s, t_ev, firing in events:
        if s > s_cur:
            times, states = _rk4_segment(vf, x, t_cur, t_ev, s - s_cur, h, state_ceiling)
            time_chunks.append(times[1:])
            state_chunks.append(states[1:])
            tags.extend([TAG_FLOW] * (len(times) - 1))
            x = states[-1]
            t_cur, s_cur = t_ev, s
        tags[-1] = TAG_PRE
        for sched in firing:
            x = np.array(sched.action(t_ev, x.copy()), dtype=float).reshape(-1)
        _check_state(x, t_ev, state_ceiling)
        time_chunks.append(np.array([t_ev]))
        state_chunks.append(x.reshape(1, -1))
        tags.append(TAG_POST)

    if total > s_cur:
        times, states = _rk4_segment(vf, x, t_cur, t_end, total - s_cur, h, state_ceiling)
        time_chunks.append(times[1:])
        state_chunks.append(states[1:])
        tags.extend([TAG_FLOW] * (len(times) - 1))

    return Trajectory(
        times=np.concatenate(time_chunks),
        states=np.concatenate(state_chunks, axis=0),
        tags=tags,
    )
