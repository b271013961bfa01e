from dataclasses import dataclass, field, replace

import numpy as np


@dataclass
class PotentialParams:
    """Parameters of the geometric contact potential.

    ``eps_vertex``, ``eps_edge`` and ``eps_face`` hold the per-primitive
    localization radii; when left as ``None`` every primitive uses ``eps_trg``.
    """

    eps_trg: float
    alpha: float = 0.5
    beta: float = 0.1
    c: float = 0.01
    p: int | None = None
    kappa: float = 1e4
    eps_vertex: np.ndarray | None = field(default=None, repr=False)
    eps_edge: np.ndarray | None = field(default=None, repr=False)
    eps_face: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.eps_trg > 0:
            raise ValueError("eps_trg must be positive")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.p is not None and (int(self.p) != self.p or self.p < 1):
            raise ValueError("p must be a positive integer")
        for name in ("eps_vertex", "eps_edge", "eps_face"):
            eps = getattr(self, name)
            if eps is not None and np.any(np.asarray(eps) > self.eps_trg * (1 + 1e-12)):
                raise ValueError(f"{name} exceeds eps_trg")

    def exponent(self, dim):
        return dim - 1 if self.p is None else int(self.p)

    def with_eps(self, eps_vertex, eps_edge, eps_face=None):
        return replace(self, eps_vertex=eps_vertex, eps_edge=eps_edge, eps_face=eps_face)
