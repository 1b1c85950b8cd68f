"""
Caching layer for the CU robust toolkit.

Thread-safe memo for stage values that repeat across a sweep, e.g. the
decoupled portfolio values, which depend on the asset correlation and the
allocation but not on the time correlation.
"""

from threading import Lock
from typing import Any, Callable, Dict, Hashable, Optional

_MISSING = object()


class StageValueCache:
    """Thread-safe in-memory memo keyed by hashable tuples."""

    def __init__(self, max_items: Optional[int] = None):
        """
        Initialize the cache.

        Args:
            max_items: Refuse new entries beyond this count (None = unbounded)
        """
        self._cache: Dict[Hashable, Any] = {}
        self._lock = Lock()
        self._max_items = max_items
        self._hits = 0
        self._misses = 0

    def _lookup(self, key: Hashable) -> Any:
        with self._lock:
            if key not in self._cache:
                self._misses += 1
                return _MISSING
            self._hits += 1
            return self._cache[key]

    def get(self, key: Hashable) -> Optional[Any]:
        """
        Get a cached value.

        Returns:
            The stored value or None if absent
        """
        value = self._lookup(key)
        return None if value is _MISSING else value

    def set(self, key: Hashable, value: Any) -> None:
        with self._lock:
            if self._max_items is not None and len(self._cache) >= self._max_items and key not in self._cache:
                return
            self._cache[key] = value

    def get_or_compute(self, key: Hashable, compute: Callable[[], Any]) -> Any:
        """
        Cached value for key, computing and storing it on a miss.

        compute runs outside the lock; two threads missing the same key
        both compute and the later store wins with an equal value.
        """
        value = self._lookup(key)
        if value is _MISSING:
            value = compute()
            self.set(key, value)
        return value

    def clear(self) -> None:
        """Clear all cached data."""
        with self._lock:
            self._cache.clear()
            self._hits = 0
            self._misses = 0

    def get_stats(self) -> Dict[str, Any]:
        """Get cache statistics."""
        with self._lock:
            total = self._hits + self._misses
            hit_rate = (self._hits / total * 100) if total > 0 else 0.0

            return {
                "hits": self._hits,
                "misses": self._misses,
                "total_requests": total,
                "hit_rate_pct": round(hit_rate, 1),
                "cached_items": len(self._cache),
            }


_cache_instance: Optional[StageValueCache] = None


def get_cache() -> StageValueCache:
    """Get the global cache instance (singleton)."""
    global _cache_instance
    if _cache_instance is None:
        _cache_instance = StageValueCache()
    return _cache_instance
