"""
In-memory memo for expensive, deterministic precomputations
(Monte Carlo M(T) estimates, internal-model support boxes)
Keyed on every input that affects the value, so entries never go stale
"""

import json
import logging
import threading
from typing import Any, Callable, Dict, Optional

logger = logging.getLogger(__name__)


class SimulationCache:
    """
    Thread-safe memo shared by sweep workers
    """

    def __init__(self, name: str):
        self.name = name
        self.cache: Dict[str, Any] = {}
        self.hits = 0
        self.misses = 0
        self._lock = threading.RLock()

    def cache_key(self, **params) -> str:
        """
        Stable key from keyword parameters (floats keep full repr precision)
        """
        return json.dumps(params, sort_keys=True, default=repr)

    def get(self, key: str) -> Optional[Any]:
        with self._lock:
            if key in self.cache:
                self.hits += 1
                logger.debug(f"{self.name} HIT: {key}")
                return self.cache[key]
            self.misses += 1
        logger.debug(f"{self.name} MISS: {key}")
        return None

    def set(self, key: str, value: Any):
        with self._lock:
            self.cache[key] = value
        logger.debug(f"{self.name} SET: {key}")

    def get_or_compute(self, key: str, compute: Callable[[], Any]) -> Any:
        """
        Concurrent callers with the same key may both compute; the result is
        deterministic so either value is the right one.
        """
        value = self.get(key)
        if value is None:
            value = compute()
            self.set(key, value)
        return value

    def invalidate(self, key: str) -> bool:
        with self._lock:
            if key in self.cache:
                del self.cache[key]
                logger.debug(f"{self.name} INVALIDATED: {key}")
                return True
        return False

    def clear(self):
        with self._lock:
            cleared_count = len(self.cache)
            self.cache.clear()
            self.hits = 0
            self.misses = 0
        logger.info(f"{self.name} CLEARED: {cleared_count} entries")

    def get_stats(self) -> Dict:
        with self._lock:
            return {
                "name": self.name,
                "total_entries": len(self.cache),
                "hits": self.hits,
                "misses": self.misses,
            }


# Global cache instances
expansion_cache = SimulationCache("expansion")   # M(T) estimates
support_cache = SimulationCache("support")       # internal-model support boxes
