"""Scalar smoothing and barrier kernels.

Every function accepts python floats, numpy arrays or jax arrays and
broadcasts elementwise. Results are numpy for numpy input and jax for jax
input, so the same code is used for plain evaluation and under autodiff.
"""

from dataclasses import dataclass

import jax
import numpy as np

from ._array import xp_of

__all__ = [
    "BarrierSpec",
    "bspline3",
    "h_eps",
    "barrier",
    "heaviside",
    "step",
    "delta",
    "mollify_h",
    "mollify_hc",
    "ipc_log_barrier",
]


@dataclass(frozen=True)
class BarrierSpec:
    """Localization radius ``eps`` and singularity exponent ``p``."""

    eps: float
    p: int = 1

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p must be a positive integer, got {self.p}")

    @classmethod
    def for_dimension(cls, eps, dim):
        return cls(eps=eps, p=dim - 1)


def _asarray(v):
    xp = xp_of(v)
    return xp, xp.asarray(v, dtype=float)


def bspline3(v):
    """Centered cubic B-spline, support ``|v| < 2``, unit integral."""
    xp, v = _asarray(v)
    a = xp.abs(v)
    inner = 2.0 / 3.0 - a**2 + 0.5 * a**3
    outer = (2.0 - a) ** 3 / 6.0
    return xp.where(a < 1.0, inner, xp.where(a < 2.0, outer, 0.0))


def _is_traced(value):
    return isinstance(value, jax.core.Tracer)


def _check_positive(name, value):
    if not _is_traced(value) and np.any(np.asarray(value) <= 0):
        raise ValueError(f"{name} must be positive")


def h_eps(z, eps):
    """Localizing spline ``1.5 * B3(2 z / eps)``; equals 1 at 0 and 0 for z >= eps."""
    _check_positive("eps", eps)
    xp, z = _asarray(z)
    return 1.5 * bspline3(2.0 * z / eps)


def barrier(z, spec):
    """Localized barrier ``h_eps(z) / z**p``.

    ``z`` must be positive; the caller guarantees a contact-free state.
    """
    xp, z = _asarray(z)
    return h_eps(z, spec.eps) / z**spec.p


def heaviside(z, alpha):
    """Smoothed C2 step ``H(z / alpha)``: 0 below ``-3 alpha``, 1 from 0 upwards."""
    _check_positive("alpha", alpha)
    xp, z = _asarray(z)
    s = z / alpha
    p1 = (3.0 + s) ** 3 / 6.0
    p2 = (3.0 - 9.0 * s - 9.0 * s**2 - 2.0 * s**3) / 6.0
    p3 = 1.0 + s**3 / 6.0
    return xp.where(
        s < -3.0,
        0.0,
        xp.where(s < -2.0, p1, xp.where(s < -1.0, p2, xp.where(s < 0.0, p3, 1.0))),
    )


def step(z, width):
    """Smoothed step that is exactly 0 for ``z <= -width`` and 1 for ``z >= 0``.

    This is ``heaviside`` rescaled so its transition band is ``[-width, 0]``;
    the directional filters are stated in terms of this band.
    """
    return heaviside(z, width / 3.0)


def delta(z, alpha):
    """Spline bump ``(2/alpha) B3(2 z / alpha)`` with unit integral."""
    _check_positive("alpha", alpha)
    xp, z = _asarray(z)
    return 2.0 / alpha * bspline3(2.0 * z / alpha)


def mollify_h(z):
    """C1 ramp ``z (2 - z)`` on [0, 1), clamped to 0 below and 1 above."""
    xp, z = _asarray(z)
    return xp.where(z < 0.0, 0.0, xp.where(z < 1.0, z * (2.0 - z), 1.0))


def mollify_hc(s, c=0.01):
    """Ratio mollifier ``h((s - 1) / c)``: 0 at s = 1, 1 from s = 1 + c."""
    _check_positive("c", c)
    return mollify_h((s - 1.0) / c)


def ipc_log_barrier(d, dhat):
    """Log barrier ``-(d - dhat)^2 log(d / dhat)`` used as the comparison baseline."""
    xp, d = _asarray(d)
    if not _is_traced(d) and np.any(np.asarray(d) <= 0):
        raise ValueError("distance must be positive")
    inside = d < dhat
    ds = xp.where(inside, d, dhat)
    return xp.where(inside, -((ds - dhat) ** 2) * xp.log(ds / dhat), 0.0)
