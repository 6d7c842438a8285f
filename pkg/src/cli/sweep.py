"""
Parameter sweeps over a scenario config

Developer approach:
1. Expand --grid axes into an ordered list of override points
2. Run every point (optionally on a thread pool), each into its own directory
3. A failing point is logged and recorded, the sweep carries on
4. The coordinator writes one merged table in point order
"""

import csv
import itertools
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import yaml

from src.cli.runner import execute_run
from src.config.scenario_config import ScenarioConfig, with_overrides
from src.errors import ConfigError, NonFiniteState, RemoteTrackError

logger = logging.getLogger(__name__)

THREADS_ENV = "REMOTE_TRACK_THREADS"

SWEEP_METRICS = [
    "tail_tracking_error",
    "tail_decoder_error",
    "max_state_norm",
    "zoom_ratio",
    "M_T",
    "N",
    "N_b",
    "T",
    "bit_rate",
    "rate_condition",
    "saturations",
    "deadbeat_violations",
    "containment_violations",
    "passed",
]

STATUS_OK = "ok"
STATUS_DIVERGED = "diverged"
STATUS_FAILED = "failed"


@dataclass(frozen=True)
class GridAxis:
    """One --grid flag; linked keys vary together"""
    keys: Tuple[str, ...]
    values: Tuple[Tuple[Any, ...], ...]


@dataclass
class SweepRow:
    index: int
    overrides: Dict[str, Any]
    status: str
    error: str = ""
    metrics: Dict[str, Any] = field(default_factory=dict)


def _scalar(token: str) -> Any:
    try:
        return yaml.safe_load(token.strip())
    except yaml.YAMLError as e:
        raise ConfigError(f"grid value '{token}' is not a scalar", [(token, None, str(e))]) from e


def parse_grid_axis(spec: str) -> GridAxis:
    """
    'k=1,2,4' or linked 'T/N_b=0.15/2,0.5/4'
    """
    if "=" not in spec:
        raise ConfigError(f"grid axis '{spec}' must look like key=v1,v2,...", [(spec, None, "missing '='")])
    lhs, rhs = spec.split("=", 1)
    keys = tuple(k.strip() for k in lhs.split("/") if k.strip())
    if not keys:
        raise ConfigError(f"grid axis '{spec}' names no key", [(spec, None, "empty key")])
    values = []
    for token in (t for t in rhs.split(",") if t.strip()):
        parts = token.split("/")
        if len(parts) != len(keys):
            raise ConfigError(
                f"grid axis '{spec}': value '{token}' has {len(parts)} parts for {len(keys)} keys",
                [("/".join(keys), None, "linked value arity mismatch")],
            )
        values.append(tuple(_scalar(p) for p in parts))
    return GridAxis(keys=keys, values=tuple(values))


def expand_grid(axes: Sequence[GridAxis]) -> List[Dict[str, Any]]:
    """Cartesian product in flag order; no axes (or an empty axis) gives no points"""
    if not axes:
        return []
    points = []
    for combo in itertools.product(*(axis.values for axis in axes)):
        point: Dict[str, Any] = {}
        for axis, values in zip(axes, combo):
            point.update(dict(zip(axis.keys, values)))
        points.append(point)
    return points


def worker_count(points: int) -> int:
    try:
        requested = int(os.getenv(THREADS_ENV, "1"))
    except ValueError:
        logger.warning(f"⚠️ {THREADS_ENV} is not an integer, running sweep serially")
        requested = 1
    return max(1, min(requested, points))


class ScenarioSweep:
    """
    Runs a config over a grid of overrides
    """

    def __init__(self, cfg: ScenarioConfig, grid: Sequence[str], out_dir: Optional[Path] = None, seed: Optional[int] = None):
        self.cfg = cfg
        self.axes = [parse_grid_axis(g) for g in grid]
        self.points = expand_grid(self.axes)
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.seed = seed
        logger.info(f"🎯 Sweep of {cfg.name} over {len(self.points)} grid points")

    @property
    def grid_keys(self) -> List[str]:
        return [k for axis in self.axes for k in axis.keys]

    def run_point(self, index: int, overrides: Dict[str, Any]) -> SweepRow:
        label = ", ".join(f"{k}={v}" for k, v in overrides.items())
        try:
            logger.info(f"🔄 Point {index}: {label}")
            cfg = with_overrides(self.cfg, overrides)
            point_dir = self.out_dir / f"point_{index:03d}" if self.out_dir is not None else None
            outcome = execute_run(cfg, point_dir, seed=self.seed)
            return SweepRow(index=index, overrides=overrides, status=STATUS_OK, metrics=outcome.metrics)
        except NonFiniteState as e:
            logger.error(f"❌ Point {index} ({label}) diverged: {e}")
            return SweepRow(index=index, overrides=overrides, status=STATUS_DIVERGED, error=str(e))
        except (RemoteTrackError, ValueError) as e:
            logger.error(f"❌ Point {index} ({label}) failed: {type(e).__name__}: {e}")
            return SweepRow(index=index, overrides=overrides, status=STATUS_FAILED, error=f"{type(e).__name__}: {e}")
        except Exception as e:
            logger.exception(f"❌ Point {index} ({label}) crashed: {type(e).__name__}: {e}")
            return SweepRow(index=index, overrides=overrides, status=STATUS_FAILED, error=f"{type(e).__name__}: {e}")

    def run(self) -> List[SweepRow]:
        start_time = datetime.now()
        workers = worker_count(len(self.points))
        indexed = list(enumerate(self.points))
        if workers == 1:
            rows = [self.run_point(i, p) for i, p in indexed]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(lambda item: self.run_point(*item), indexed))

        duration = (datetime.now() - start_time).total_seconds()
        ok = sum(1 for r in rows if r.status == STATUS_OK)
        passed = sum(1 for r in rows if r.metrics.get("passed"))
        logger.info(f"📊 Sweep completed in {duration:.1f} seconds ({workers} worker(s)):")
        logger.info(f"   ✅ Completed: {ok}")
        logger.info(f"   🏁 Within thresholds: {passed}")
        logger.info(f"   ❌ Failed: {len(rows) - ok}")
        return rows

    def header(self) -> List[str]:
        return ["point"] + self.grid_keys + ["status", "error"] + SWEEP_METRICS

    def write_table(self, rows: Sequence[SweepRow], path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.header())
            for row in rows:
                writer.writerow(
                    [row.index]
                    + [row.overrides.get(k, "") for k in self.grid_keys]
                    + [row.status, row.error]
                    + [row.metrics.get(m, "") for m in SWEEP_METRICS]
                )
        logger.info(f"💾 Sweep table written: {path} ({len(rows)} rows)")
        return path
