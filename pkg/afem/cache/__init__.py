"""Cache module for AFEM."""

from afem.cache.base import BaseCacheManager, SimpleCacheManager
from afem.cache.reference import ReferenceSolutionCache

__all__ = [
    "BaseCacheManager",
    "ReferenceSolutionCache",
    "SimpleCacheManager",
]
