"""Cache of converged reference solutions using DiskCache."""

import hashlib
import logging
from pathlib import Path
from typing import Any

import numpy as np

from afem.cache.base import SimpleCacheManager
from afem.core.assembly import FeFunction
from afem.core.mesh import Mesh
from afem.models.problem import ProblemSpec

logger = logging.getLogger(__name__)


class ReferenceSolutionCache(SimpleCacheManager):
    """Stores fine-mesh solutions keyed by problem, mesh size and Newton tolerance."""

    def __init__(self, cache_dir: Path) -> None:
        super().__init__(cache_dir, cache_subdir="reference")

    def _generate_cache_key(self, spec: ProblemSpec, h_ref: float, eps: float) -> str:
        """Readable prefix plus a digest of the full problem data."""
        digest = hashlib.sha256(spec.fingerprint().encode("utf-8")).hexdigest()[:16]
        return f"{spec.name}_h{h_ref!r}_eps{eps!r}_{digest}"

    def get_solution(self, spec: ProblemSpec, h_ref: float, eps: float) -> tuple[Mesh, FeFunction] | None:
        """Cached reference mesh and solution, or None."""
        key = self._generate_cache_key(spec, h_ref, eps)
        cached = self.load(key)
        if not isinstance(cached, dict):
            return None
        try:
            payload: dict[str, Any] = cached
            mesh = Mesh.from_arrays(
                payload["vertices"],
                payload["triangles"],
                ref_edges=payload["ref_edges"],
                sigma=payload["sigma"],
                partition=spec.partition,
                generation=int(payload["generation"]),
            )
            solution = FeFunction.from_values(mesh, payload["coeffs"])
        except Exception as e:
            logger.warning(f"Discarding unreadable cache entry {key}: {e}")
            return None
        logger.info(f"Loaded reference solution {key} ({mesh.n_vertices} dofs) from cache")
        return mesh, solution

    def save_solution(self, spec: ProblemSpec, h_ref: float, eps: float, mesh: Mesh, solution: FeFunction) -> None:
        key = self._generate_cache_key(spec, h_ref, eps)
        self.save(
            key,
            {
                "vertices": np.ascontiguousarray(mesh.vertices),
                "triangles": np.ascontiguousarray(mesh.triangles),
                "ref_edges": np.ascontiguousarray(mesh.ref_edges),
                "sigma": np.ascontiguousarray(mesh.sigma),
                "generation": mesh.generation,
                "coeffs": np.ascontiguousarray(solution.coeffs),
            },
        )
