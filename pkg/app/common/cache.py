"""Named memoization caches on top of cachetools.LRUCache.

Feature modules register a namespace at import time and then memoize
through the shared ``cache_service``:

    cache_service.register("bia_blocks", maxsize=64)
    block = cache_service.get_or_build("bia_blocks", (L, G), lambda: _construct(L, G))

Cached values are shared between callers, so store immutable objects only.
"""

import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, List, TypeVar

from cachetools import LRUCache

V = TypeVar("V")

_MISSING = object()


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0


@dataclass
class _Namespace:
    store: LRUCache  # type: ignore[type-arg]
    stats: CacheStats = field(default_factory=CacheStats)

    def lookup(self, key: Hashable) -> Any:
        value = self.store.get(key, _MISSING)
        if value is _MISSING:
            self.stats.misses += 1
        else:
            self.stats.hits += 1
        return value

    def reset(self) -> None:
        self.store.clear()
        self.stats = CacheStats()


class CacheService:
    """Registry of LRU namespaces with hit/miss accounting."""

    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._spaces: Dict[str, _Namespace] = {}

    # ==================== Registration ====================

    def register(self, name: str, *, maxsize: int = 128) -> None:
        """Create namespace *name*; re-registering keeps the existing entries."""
        with self._lock:
            self._spaces.setdefault(name, _Namespace(LRUCache(maxsize=maxsize)))

    def _space(self, name: str) -> _Namespace:
        try:
            return self._spaces[name]
        except KeyError:
            raise KeyError(f"cache namespace {name!r} is not registered") from None

    # ==================== Lookups ====================

    def get(self, name: str, key: Hashable, default: Any = None) -> Any:
        with self._lock:
            value = self._space(name).lookup(key)
        return default if value is _MISSING else value

    def set(self, name: str, key: Hashable, value: Any) -> None:
        with self._lock:
            self._space(name).store[key] = value

    def has(self, name: str, key: Hashable) -> bool:
        """Membership test that does not touch the hit/miss counters."""
        with self._lock:
            return key in self._space(name).store

    def get_or_build(self, name: str, key: Hashable, build: Callable[[], V]) -> V:
        """Cached value for *key*, calling *build* and storing its result on a miss.

        The builder runs outside the lock; two racing threads may both build,
        the later store wins.
        """
        with self._lock:
            value = self._space(name).lookup(key)
        if value is not _MISSING:
            return value
        value = build()
        self.set(name, key, value)
        return value

    # ==================== Maintenance ====================

    def clear(self, name: str) -> bool:
        """Empty one namespace. False if it was never registered."""
        with self._lock:
            space = self._spaces.get(name)
            if space is None:
                return False
            space.reset()
            return True

    def clear_all(self) -> None:
        with self._lock:
            for space in self._spaces.values():
                space.reset()

    @property
    def namespaces(self) -> List[str]:
        return list(self._spaces)

    def stats(self) -> Dict[str, Dict[str, int]]:
        """Size, capacity and hit/miss counts per namespace."""
        with self._lock:
            return {
                name: {
                    "size": int(space.store.currsize),
                    "maxsize": int(space.store.maxsize),
                    "hits": space.stats.hits,
                    "misses": space.stats.misses,
                }
                for name, space in self._spaces.items()
            }


cache_service = CacheService()
