"""Scene checks: mesh invariants, rest intersections and the adapted
localization radii."""

from dataclasses import dataclass, field

import numpy as np

from .mesh import MeshError, SceneFormatError, load_scene
from .potential import adapt_epsilon
from .proximity import intersecting_pairs

__all__ = ["ValidationReport", "validate", "validate_scene"]


@dataclass
class ValidationReport:
    ok: bool
    failures: list = field(default_factory=list)
    summary: str = ""
    eps_counts: np.ndarray | None = None
    eps_edges: np.ndarray | None = None
    eps_vertex: np.ndarray | None = None

    def format(self):
        lines = ["OK" if self.ok else "FAILED"]
        if self.summary:
            lines.append(self.summary)
        lines += [f"  failure: {f}" for f in self.failures]
        if self.eps_counts is not None:
            lines.append("adapted vertex eps (fraction of eps_trg):")
            for lo, hi, c in zip(self.eps_edges[:-1], self.eps_edges[1:], self.eps_counts):
                lines.append(f"  [{lo:9.3g}, {hi:9.3g}) {int(c):6d}")
        return "\n".join(lines)


def _eps_histogram(ratio, bins=8):
    ratio = np.clip(ratio, 1e-12, 1.0)
    lo = min(ratio.min(), 0.5)
    edges = np.geomspace(lo, 1.0, bins + 1)
    edges[-1] = 1.0 + 1e-12
    counts, _ = np.histogram(ratio, bins=edges)
    return counts, edges


def validate_scene(scene):
    """Check a loaded scene; never raises for geometric problems."""
    mesh = scene.mesh
    failures = []
    rest = intersecting_pairs(mesh, mesh.rest_positions)
    for a, b in rest[:20]:
        failures.append(f"rest boundary elements {int(a)} and {int(b)} intersect")
    if len(rest) > 20:
        failures.append(f"... {len(rest) - 20} more intersecting pairs")
    if not np.allclose(mesh.positions, mesh.rest_positions):
        cur = intersecting_pairs(mesh, mesh.positions)
        if len(cur):
            failures.append(f"{len(cur)} intersecting pairs in the initial positions")
    summary = f"{mesh!r}"
    report = ValidationReport(not failures, failures, summary)
    if failures:
        return report
    ev, _, _ = adapt_epsilon(mesh, scene.params)
    ratio = ev[mesh.boundary_vertices] / scene.params.eps_trg
    report.eps_vertex = ev
    report.eps_counts, report.eps_edges = _eps_histogram(ratio)
    shrunk = int(np.sum(ratio < 1))
    report.summary += f"\n{shrunk} of {len(ratio)} surface vertices have eps < eps_trg"
    return report


def validate(path):
    """Load and check a scene file; load errors become report failures."""
    try:
        scene = load_scene(path)
    except (MeshError, SceneFormatError, OSError) as exc:
        return ValidationReport(False, [f"{type(exc).__name__}: {exc}"])
    return validate_scene(scene)
