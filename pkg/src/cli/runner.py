"""
Run one configured scenario and write its artifacts
(trajectory CSV, frame log, metrics.json)
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from src.closedloop.diagnostics import summarize, write_run_csv
from src.closedloop.system import RunResult, run_scenario
from src.codec.expansion import min_bits_for_rate
from src.codec.frames import write_frame_log
from src.config.scenario_config import ScenarioConfig, build_scenario

logger = logging.getLogger(__name__)


@dataclass
class RunOutcome:
    result: RunResult
    metrics: Dict[str, Any]
    paths: Dict[str, Path] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.metrics["passed"])


def run_metrics(result: RunResult, cfg: ScenarioConfig, seed: int) -> Dict[str, Any]:
    th = cfg.thresholds
    metrics: Dict[str, Any] = {"name": cfg.name}
    metrics.update(summarize(result, th.t_tail))
    metrics["M_T_forced"] = cfg.channel.M_T is not None
    metrics["expansion_seed"] = seed
    metrics["min_bits_for_rate"] = min_bits_for_rate(result.scenario.exo.r, result.scenario.channel.M_T)
    metrics["symbol_alphabet"] = sorted(result.symbol_alphabet())
    metrics["tracking_threshold"] = th.tracking_error
    metrics["decoder_threshold"] = th.decoder_error
    metrics["passed"] = (
        metrics["tail_tracking_error"] <= th.tracking_error
        and metrics["tail_decoder_error"] <= th.decoder_error
        and math.isfinite(metrics["max_state_norm"])
    )
    metrics["warnings"] = list(result.warnings)
    return metrics


def execute_run(cfg: ScenarioConfig, out_dir: Optional[Path] = None, seed: Optional[int] = None) -> RunOutcome:
    """
    Build, simulate, and (when out_dir is given) write the artifacts.
    Errors from build or run propagate to the caller.
    """
    seed = cfg.expansion.seed if seed is None else seed
    scenario = build_scenario(cfg, seed=seed)
    result = run_scenario(scenario)
    metrics = run_metrics(result, cfg, seed)
    outcome = RunOutcome(result=result, metrics=metrics)

    if not metrics["rate_condition"]:
        logger.warning(f"⚠️ {cfg.name}: rate condition false, convergence is not expected")

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "trajectory": out_dir / cfg.output.trajectory,
            "frames": out_dir / cfg.output.frames,
            "metrics": out_dir / cfg.output.metrics,
        }
        write_run_csv(result, paths["trajectory"])
        write_frame_log(result.frames, paths["frames"])
        with open(paths["metrics"], "w") as fh:
            json.dump(metrics, fh, indent=2)
        outcome.paths = paths
        logger.info(f"💾 Artifacts for {cfg.name} written to {out_dir}")

    status = "✅" if outcome.passed else "❌"
    logger.info(
        f"{status} {cfg.name}: tail |e| = {metrics['tail_tracking_error']:.3e}, "
        f"tail |w - w_d| = {metrics['tail_decoder_error']:.3e}"
    )
    return outcome
