"""
Acceptance suite: both built-in scenarios plus the property checks

Every check yields a CheckResult (name, measured value, threshold, verdict);
errors raised while building or running a check become failed checks.
"""

import dataclasses
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from src.cli.runner import execute_run
from src.cli.sweep import ScenarioSweep
from src.closedloop.system import SecondLevel, run_scenario
from src.codec.frames import pack_frame, unpack_frame
from src.codec.zoom_codec import SymbolVector, bits_per_component
from src.config.scenario_config import ScenarioConfig, build_scenario, load_builtin
from src.data.models import immersion_for
from src.errors import NonFiniteState, RemoteTrackError
from src.regulator.internal_model import build_phi_c, observer_rhs
from src.sim.hybrid import VectorField, integrate_flow

logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-12
ZOOM_TOLERANCE = 1e-12
IMMERSION_TOLERANCE = 1e-2
OBSERVER_TOLERANCE = 1e-2
OBSERVER_HORIZON = 10.0
RK4_ORDER_RANGE = (14.0, 18.0)
RK4_ORDER_STEPS = (1e-2, 5e-3, 2.5e-3)
SHORT_HORIZON = 5.0
K_SWEEP = "k=1,2,4,8,16"


@dataclass
class CheckResult:
    name: str
    value: Any
    threshold: Any
    passed: bool
    detail: str = ""


@dataclass
class AcceptanceReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, value: Any, threshold: Any, passed: bool, detail: str = "") -> CheckResult:
        check = CheckResult(name=name, value=value, threshold=threshold, passed=bool(passed), detail=detail)
        self.checks.append(check)
        icon = "✅" if check.passed else "❌"
        logger.info(f"{icon} {name}: {value} (threshold {threshold})")
        return check

    def failed(self, name: str, error: Exception) -> CheckResult:
        return self.add(name, None, None, False, detail=f"{type(error).__name__}: {error}")

    def failures(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def render(self) -> str:
        lines = [f"{'check':<48} {'value':>14} {'threshold':>14}  verdict"]
        for c in self.checks:
            value = _fmt(c.value)
            threshold = _fmt(c.threshold)
            verdict = "PASS" if c.passed else "FAIL"
            lines.append(f"{c.name:<48} {value:>14} {threshold:>14}  {verdict}")
            if c.detail and not c.passed:
                lines.append(f"    {c.detail}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'} ({len(self.failures())} failed of {len(self.checks)})")
        return "\n".join(lines)


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    if v is None:
        return "-"
    return str(v)


def full_alphabet(N: int) -> List[float]:
    return [j - (N - 1) / 2.0 for j in range(N)]


def check_scenario(report: AcceptanceReport, cfg: ScenarioConfig, seed: Optional[int] = None):
    name = cfg.name
    try:
        outcome = execute_run(cfg, None, seed=seed)
    except NonFiniteState as e:
        report.failed(f"{name}: run", e)
        th = cfg.thresholds
        report.add(f"{name}: tail tracking error", math.inf, th.tracking_error, False, detail="run diverged")
        report.add(f"{name}: tail decoder error", math.inf, th.decoder_error, False, detail="run diverged")
        return None
    except (RemoteTrackError, ValueError) as e:
        report.failed(f"{name}: run", e)
        return None

    result, m = outcome.result, outcome.metrics
    th = cfg.thresholds
    channel = result.scenario.channel
    report.add(f"{name}: tail tracking error", m["tail_tracking_error"], th.tracking_error,
               m["tail_tracking_error"] <= th.tracking_error)
    report.add(f"{name}: tail decoder error", m["tail_decoder_error"], th.decoder_error,
               m["tail_decoder_error"] <= th.decoder_error)

    expected = full_alphabet(channel.N)
    alphabet = sorted(result.symbol_alphabet())
    report.add(f"{name}: symbol alphabet", alphabet, expected, alphabet == expected)

    ratio_ok = m["zoom_ratio_deviation"] <= ZOOM_TOLERANCE and (not m["rate_condition"] or channel.zoom_ratio < 1)
    report.add(f"{name}: zoom law", m["zoom_ratio_deviation"], ZOOM_TOLERANCE, ratio_ok,
               detail=f"ratio {channel.zoom_ratio:.6f}")
    report.add(f"{name}: dead-beat bound violations", m["deadbeat_violations"], 0, m["deadbeat_violations"] == 0)
    report.add(f"{name}: decoder containment violations", m["containment_violations"], 0,
               m["containment_violations"] == 0)
    ceiling = result.scenario.state_ceiling
    report.add(f"{name}: max state norm", m["max_state_norm"], ceiling, m["max_state_norm"] < ceiling)

    w = result.trajectory.states[:, result.layout.w]
    w_active = result.trajectory.states[:, result.layout.active_decoder]
    y_r = result.scenario.exo.y_r
    gap = (result.diagnostics.e_hat - result.diagnostics.e) - (y_r(w) - y_r(w_active))
    report.add(f"{name}: error identity", float(np.max(np.abs(gap))), IDENTITY_TOLERANCE,
               np.max(np.abs(gap)) <= IDENTITY_TOLERANCE)

    encoder = result.trajectory.states[:, result.layout.w_e]
    decoder = result.trajectory.states[:, result.layout.w_d]
    report.add(f"{name}: encoder/decoder bit-identical", bool(np.array_equal(encoder, decoder)), True,
               np.array_equal(encoder, decoder))
    return result


def _guarded(report: AcceptanceReport, name: str, check: Callable[[], None]):
    try:
        check()
    except (RemoteTrackError, ValueError) as e:
        report.failed(name, e)


def check_internal_model(report: AcceptanceReport, cfg: ScenarioConfig):
    sc = build_scenario(cfg)
    exo, im, gains = sc.exo, sc.im, sc.gains
    tau = immersion_for(cfg.exo.model, cfg.exo.params, cfg.plant.model).tau
    if tau is None:
        raise ValueError(f"no closed-form tau for {cfg.exo.model} / {cfg.plant.model}")
    h = sc.h
    # settle on the attractor, then follow one stretch of it
    settle = integrate_flow(exo.s, sc.initial.w0, 0.0, 20.0, 1e-2).final_state
    cycle = integrate_flow(exo.s, settle, 0.0, 10.0, h)
    xi = tau(cycle.states)
    chain = np.gradient(xi, h, axis=0)[1:-1]
    residual_1 = np.abs(chain[:, 0] - xi[1:-1, 1])
    residual_2 = np.abs(chain[:, 1] + im.phi(xi[1:-1]))
    residual = float(max(residual_1.max(), residual_2.max()))
    report.add("immersion residual on limit cycle", residual, IMMERSION_TOLERANCE, residual <= IMMERSION_TOLERANCE)

    phi_c = build_phi_c(im)
    d, r = im.d, exo.r
    # observer driven by u_ss(t) = tau_1(w(t)), exosystem state appended
    def fn(x):
        w = x[:r]
        return np.concatenate([exo.s.fn(w), observer_rhs(x[r:], float(tau(w)[0]), gains, phi_c)])

    x0 = np.concatenate([settle, np.zeros(d)])
    traj = integrate_flow(VectorField(dimension=r + d, fn=fn, name="observer"), x0, 0.0, OBSERVER_HORIZON, h)
    final = traj.final_state
    err = float(np.linalg.norm(final[r:] - tau(final[:r])))
    report.add("open-loop observer error at 10 s", err, OBSERVER_TOLERANCE, err <= OBSERVER_TOLERANCE)

    rng = np.random.default_rng(0)
    inside = im.support_box.sample(rng, 200)
    agree = bool(np.array_equal(phi_c(inside), im.phi(inside)))
    outer = im.support_box.inflate(im.blend_width)
    far = outer.hi_array + 1.0 + rng.random((200, d))
    vanish = bool(np.all(phi_c(far) == 0.0))
    report.add("phi_c equals phi on S", agree, True, agree)
    report.add("phi_c vanishes outside blend band", vanish, True, vanish)


def check_codec_bijection(report: AcceptanceReport):
    mismatches = 0
    oversized = 0
    for N, r in itertools.product((2, 3, 4, 8), (1, 2, 3)):
        alphabet = full_alphabet(N)
        budget = r * bits_per_component(N)
        for k, combo in enumerate(itertools.product(alphabet, repeat=r)):
            sv = SymbolVector(symbols=np.array(combo), k=k)
            frame = pack_frame(sv, N)
            if frame.n_bits > budget:
                oversized += 1
            back = unpack_frame(frame, N, r)
            if back.k != k or not np.array_equal(back.symbols, sv.symbols):
                mismatches += 1
    report.add("codec round-trip mismatches", mismatches, 0, mismatches == 0)
    report.add("frames over budget", oversized, 0, oversized == 0)


def check_second_level(report: AcceptanceReport, cfg: ScenarioConfig):
    base = build_scenario(cfg)
    short = dataclasses.replace(base, t_end=SHORT_HORIZON)
    plain = run_scenario(short)
    layered = run_scenario(dataclasses.replace(short, second_level=SecondLevel(ell=1, T_bar=short.channel.T)))
    same = all(
        np.array_equal(plain.column(c), layered.column(c))
        for c in ["y", "u", "e_hat"] + [f"xi_{i + 1}" for i in range(short.im.d)]
    )
    report.add("second level (ell=1, T_bar=T) bit-identical", same, True, same)

    again = run_scenario(short)
    repeat = bool(np.array_equal(plain.trajectory.states, again.trajectory.states))
    report.add("repeated runs bit-identical", repeat, True, repeat)


def rk4_order_factors(steps: Sequence[float] = RK4_ORDER_STEPS, t_end: float = 1.0) -> List[float]:
    """
    Endpoint error ratios between consecutive steps on x' = -x, x(0) = 1

    Each step should halve the previous one; fourth order gives 16.
    """
    decay = VectorField(dimension=1, fn=lambda x: -x, name="decay")
    exact = math.exp(-t_end)
    errors = [abs(integrate_flow(decay, [1.0], 0.0, t_end, h).final_state[0] - exact) for h in steps]
    return [float(coarse / fine) for coarse, fine in zip(errors, errors[1:])]


def check_numerics(report: AcceptanceReport):
    factors = rk4_order_factors()
    lo, hi = RK4_ORDER_RANGE
    report.add("RK4 order factors", [round(f, 3) for f in factors], f"[{lo:g}, {hi:g}]",
               all(lo <= f <= hi for f in factors))


def check_gain_sweep(report: AcceptanceReport, cfg: ScenarioConfig):
    sweep = ScenarioSweep(cfg, [K_SWEEP])
    rows = sweep.run()
    passing = [r.overrides["k"] for r in rows if r.metrics.get("passed")]
    report.add("k sweep has a passing gain", passing, ">= 1 value", len(passing) > 0)


def run_acceptance(
    configs: Optional[Dict[str, ScenarioConfig]] = None,
    properties: bool = True,
    seed: Optional[int] = None,
) -> AcceptanceReport:
    """
    configs defaults to the built-in scenarios; properties=False runs only the scenario checks
    """
    report = AcceptanceReport()
    if configs is None:
        configs = {}
        for name in ("scenario1", "scenario2"):
            try:
                configs[name] = load_builtin(name)
            except RemoteTrackError as e:
                report.failed(f"{name}: config", e)

    for name, cfg in configs.items():
        logger.info(f"🔄 Acceptance: {name}")
        check_scenario(report, cfg, seed=seed)

    if properties:
        reference = next(iter(configs.values()), None)
        _guarded(report, "codec bijection", lambda: check_codec_bijection(report))
        _guarded(report, "numerics", lambda: check_numerics(report))
        if reference is not None:
            _guarded(report, "internal model", lambda: check_internal_model(report, reference))
            _guarded(report, "second level / determinism", lambda: check_second_level(report, reference))
            _guarded(report, "k sweep", lambda: check_gain_sweep(report, reference))

    logger.info(f"📊 Acceptance: {'PASS' if report.passed else 'FAIL'} ({len(report.failures())} failed)")
    return report
