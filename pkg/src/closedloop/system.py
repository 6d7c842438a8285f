"""
Closed-loop hybrid system: exosystem -> encoder -> channel -> decoder(s) -> regulator -> plant

Continuous state (w, w_e, w_d, [w_d'], z, y, xi) flows under the composite
field; at every kT the encoder and then the decoder jump, and at every
k*ell*T_bar (when configured) the second-level decoder copies w_d.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.closedloop.diagnostics import Diagnostics, compute_diagnostics
from src.codec.expansion import check_rate_condition
from src.codec.frames import ChannelFrame, pack_frame, unpack_frame
from src.codec.zoom_codec import ChannelSpec, CodecState, ExoSpec, decoder_jump, encoder_jump
from src.data.models import PlantSpec
from src.regulator.internal_model import GainSpec, InternalModelSpec, RegulatorState, build_phi_c, regulator_rhs
from src.sim.hybrid import DEFAULT_STEP, JumpSchedule, Trajectory, VectorField, run_hybrid, step_count

logger = logging.getLogger(__name__)

DEFAULT_STATE_CEILING = 1e3

ORDER_CODEC = 0
ORDER_SECOND_LEVEL = 1


@dataclass(frozen=True)
class SecondLevel:
    ell: int
    T_bar: float

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError(f"ell must be a positive integer, got {self.ell}")
        if self.T_bar <= 0:
            raise ValueError(f"T_bar must be positive, got {self.T_bar}")

    @property
    def period(self) -> float:
        return self.ell * self.T_bar


@dataclass(frozen=True)
class InitialConditions:
    w0: np.ndarray
    w_hat0: np.ndarray  # w_e(0-) = w_d(0-)
    z0: np.ndarray
    y0: float
    xi0: np.ndarray


@dataclass(frozen=True)
class Scenario:
    exo: ExoSpec
    channel: ChannelSpec
    plant: PlantSpec
    im: InternalModelSpec
    gains: GainSpec
    initial: InitialConditions
    t_end: float
    h: float = DEFAULT_STEP
    second_level: Optional[SecondLevel] = None
    state_ceiling: float = DEFAULT_STATE_CEILING
    use_true_error: bool = False
    name: str = "scenario"

    def validate(self) -> List[str]:
        """
        Raises on hard errors (misaligned steps); returns soft warnings
        """
        warnings = []
        step_count(0.0, self.channel.T, self.h)
        step_count(0.0, self.t_end, self.h)
        if self.second_level is not None:
            step_count(0.0, self.second_level.T_bar, self.h)
            step_count(0.0, self.second_level.period, self.h)
        ic = self.initial
        if len(ic.w0) != self.exo.r or len(ic.w_hat0) != self.exo.r:
            raise ValueError(f"initial w0/w_hat0 must have dimension r={self.exo.r}")
        if len(ic.z0) != self.plant.n:
            raise ValueError(f"initial z0 must have dimension n={self.plant.n}")
        if len(ic.xi0) != self.im.d or self.gains.d != self.im.d:
            raise ValueError(f"internal model order mismatch: xi0 {len(ic.xi0)}, gains {self.gains.d}, d={self.im.d}")
        if self.channel.r != self.exo.r:
            raise ValueError(f"channel built for r={self.channel.r}, exosystem has r={self.exo.r}")
        if not self.exo.W0.contains(ic.w0):
            warnings.append(f"w0={list(ic.w0)} lies outside W0")
        if not self.exo.W0.contains(ic.w_hat0):
            warnings.append(f"w_e(0-)={list(ic.w_hat0)} lies outside W0")
        if not check_rate_condition(self.channel.N, self.exo.r, self.channel.M_T):
            warnings.append(
                f"rate condition fails: N={self.channel.N} <= sqrt({self.exo.r})*M_T={math.sqrt(self.exo.r) * self.channel.M_T:.4f}"
            )
        return warnings


@dataclass(frozen=True)
class StateLayout:
    r: int
    n: int
    d: int
    second_level: bool

    @property
    def w(self) -> slice:
        return slice(0, self.r)

    @property
    def w_e(self) -> slice:
        return slice(self.r, 2 * self.r)

    @property
    def w_d(self) -> slice:
        return slice(2 * self.r, 3 * self.r)

    @property
    def w_dprime(self) -> Optional[slice]:
        return slice(3 * self.r, 4 * self.r) if self.second_level else None

    @property
    def _after_decoders(self) -> int:
        return (4 if self.second_level else 3) * self.r

    @property
    def z(self) -> slice:
        start = self._after_decoders
        return slice(start, start + self.n)

    @property
    def y(self) -> int:
        return self._after_decoders + self.n

    @property
    def xi(self) -> slice:
        start = self.y + 1
        return slice(start, start + self.d)

    @property
    def dimension(self) -> int:
        return self.y + 1 + self.d

    @property
    def active_decoder(self) -> slice:
        return self.w_dprime if self.second_level else self.w_d

    def column_names(self) -> List[str]:
        names = [f"w_{i + 1}" for i in range(self.r)]
        names += [f"w_e_{i + 1}" for i in range(self.r)]
        names += [f"w_d_{i + 1}" for i in range(self.r)]
        if self.second_level:
            names += [f"w_dprime_{i + 1}" for i in range(self.r)]
        names += [f"z_{i + 1}" for i in range(self.n)]
        names.append("y")
        names += [f"xi_{i + 1}" for i in range(self.d)]
        return names


@dataclass(frozen=True)
class SampleRecord:
    """One channel use at t = kT"""
    k: int
    t: float
    L: float
    symbols: np.ndarray
    saturated: bool
    w: np.ndarray
    w_e: np.ndarray
    w_d: np.ndarray


@dataclass
class RunResult:
    scenario: Scenario
    layout: StateLayout
    trajectory: Trajectory
    frames: List[ChannelFrame]
    samples: List[SampleRecord]
    diagnostics: Diagnostics
    rate_condition: bool
    warnings: List[str] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        names = self.layout.column_names()
        if name in names:
            return self.trajectory.states[:, names.index(name)]
        return getattr(self.diagnostics, name)

    @property
    def saturation_count(self) -> int:
        return sum(1 for s in self.samples if s.saturated)

    def symbol_alphabet(self) -> set:
        return {float(v) for s in self.samples for v in s.symbols}


class ClosedLoopRunner:
    """
    Owns the discrete codec states while run_hybrid owns the continuous ones
    """

    def __init__(self, sc: Scenario):
        self.sc = sc
        self.layout = StateLayout(r=sc.exo.r, n=sc.plant.n, d=sc.im.d, second_level=sc.second_level is not None)
        self.phi_c = build_phi_c(sc.im)
        self.encoder = CodecState.initial(sc.initial.w_hat0, sc.channel)
        self.decoder = CodecState.initial(sc.initial.w_hat0, sc.channel)
        self.frames: List[ChannelFrame] = []
        self.samples: List[SampleRecord] = []

    def initial_state(self) -> np.ndarray:
        lay, ic = self.layout, self.sc.initial
        x = np.zeros(lay.dimension)
        x[lay.w] = ic.w0
        x[lay.w_e] = ic.w_hat0
        x[lay.w_d] = ic.w_hat0
        if lay.second_level:
            x[lay.w_dprime] = ic.w_hat0
        x[lay.z] = ic.z0
        x[lay.y] = ic.y0
        x[lay.xi] = ic.xi0
        return x

    def error_signal(self, x: np.ndarray) -> float:
        lay, exo = self.layout, self.sc.exo
        reference = x[lay.w] if self.sc.use_true_error else x[lay.active_decoder]
        return float(x[lay.y] - exo.y_r(reference))

    def field(self) -> VectorField:
        lay, sc = self.layout, self.sc
        s = sc.exo.s.fn
        plant = sc.plant
        gains = sc.gains
        phi_c = self.phi_c
        decoder_slices = [lay.w, lay.w_e, lay.w_d] + ([lay.w_dprime] if lay.second_level else [])

        def fn(x: np.ndarray) -> np.ndarray:
            dx = np.empty_like(x)
            for sl in decoder_slices:
                dx[sl] = s(x[sl])
            z = x[lay.z]
            y = x[lay.y]
            xi_dot, u = regulator_rhs(RegulatorState(xi=x[lay.xi]), self.error_signal(x), gains, phi_c)
            if plant.n:
                dx[lay.z] = plant.f(z, y, plant.mu)
            dx[lay.y] = plant.q(z, y, plant.mu) + u
            dx[lay.xi] = xi_dot
            return dx

        return VectorField(dimension=lay.dimension, fn=fn, name=f"closed-loop[{sc.name}]")

    def codec_jump(self, t: float, x: np.ndarray) -> np.ndarray:
        lay, channel = self.layout, self.sc.channel
        encoder = self.encoder.with_w_hat(x[lay.w_e])
        L_used = encoder.L
        self.encoder, symbols = encoder_jump(encoder, x[lay.w], channel)
        frame = pack_frame(symbols, channel.N)
        self.frames.append(frame)
        received = unpack_frame(frame, channel.N, channel.r)
        self.decoder = decoder_jump(self.decoder.with_w_hat(x[lay.w_d]), received, channel)
        x[lay.w_e] = self.encoder.w_hat
        x[lay.w_d] = self.decoder.w_hat
        self.samples.append(
            SampleRecord(
                k=symbols.k, t=t, L=L_used, symbols=symbols.symbols, saturated=symbols.saturated,
                w=x[lay.w].copy(), w_e=x[lay.w_e].copy(), w_d=x[lay.w_d].copy(),
            )
        )
        logger.debug(f"sample k={symbols.k} t={t:.4f} symbols={symbols.symbols.tolist()} L={L_used:.4g}")
        return x

    def second_level_jump(self, t: float, x: np.ndarray) -> np.ndarray:
        x[self.layout.w_dprime] = x[self.layout.w_d]
        return x

    def schedules(self) -> List[JumpSchedule]:
        schedules = [
            JumpSchedule(period=self.sc.channel.T, action=self.codec_jump, at_start=True, order=ORDER_CODEC, name="codec")
        ]
        if self.sc.second_level is not None:
            schedules.append(
                JumpSchedule(
                    period=self.sc.second_level.period,
                    action=self.second_level_jump,
                    at_start=True,
                    order=ORDER_SECOND_LEVEL,
                    name="second-level",
                )
            )
        return schedules

    def run(self) -> RunResult:
        sc = self.sc
        warnings = sc.validate()
        for w in warnings:
            logger.warning(f"⚠️ {sc.name}: {w}")
        rate_ok = check_rate_condition(sc.channel.N, sc.exo.r, sc.channel.M_T)
        logger.info(
            f"🔄 Running {sc.name}: N={sc.channel.N}, T={sc.channel.T}, M_T={sc.channel.M_T:.4f}, "
            f"k={sc.gains.k}, kappa={sc.gains.kappa}, t_end={sc.t_end}, h={sc.h}"
        )
        traj = run_hybrid(
            self.field(), self.initial_state(), self.schedules(), sc.t_end, sc.h, state_ceiling=sc.state_ceiling
        )
        diagnostics = compute_diagnostics(sc, self.layout, traj, self.samples)
        result = RunResult(
            scenario=sc,
            layout=self.layout,
            trajectory=traj,
            frames=self.frames,
            samples=self.samples,
            diagnostics=diagnostics,
            rate_condition=rate_ok,
            warnings=warnings,
        )
        if result.saturation_count:
            logger.warning(f"⚠️ {sc.name}: quantizer saturated on {result.saturation_count} samples")
        logger.info(f"✅ {sc.name} finished: {len(traj)} records, {len(self.frames)} frames")
        return result


def run_scenario(sc: Scenario) -> RunResult:
    return ClosedLoopRunner(sc).run()
