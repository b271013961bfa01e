"""Array-namespace dispatch so the same math runs under numpy or traced jax."""

import os
from pathlib import Path

import jax
import jax.numpy as jnp
import numpy as np

jax.config.update("jax_enable_x64", True)


def _enable_compilation_cache():
    """Persist compiled kernels across processes.

    ``CONTACTBARRIER_JAX_CACHE`` names the cache directory; ``0`` or an empty
    value disables it. Default: ``~/.cache/contactbarrier/jax``.
    """
    path = os.environ.get("CONTACTBARRIER_JAX_CACHE", str(Path.home() / ".cache" / "contactbarrier" / "jax"))
    if path in ("", "0") or jax.config.jax_compilation_cache_dir:
        return
    try:
        Path(path).mkdir(parents=True, exist_ok=True)
    except OSError:
        return
    jax.config.update("jax_compilation_cache_dir", path)
    jax.config.update("jax_persistent_cache_min_compile_time_secs", 0.5)


_enable_compilation_cache()


def xp_of(*arrays):
    for a in arrays:
        if isinstance(a, jax.Array):
            return jnp
    return np


def safe_norm(x, axis=-1, keepdims=False):
    xp = xp_of(x)
    sq = xp.sum(x * x, axis=axis, keepdims=keepdims)
    # double-where keeps gradients finite at the origin
    pos = sq > 0
    return xp.where(pos, xp.sqrt(xp.where(pos, sq, 1.0)), 0.0)


def unit(x, axis=-1):
    return x / safe_norm(x, axis=axis, keepdims=True)


def cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def cross3(a, b):
    xp = xp_of(a, b)
    return xp.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def dot(a, b):
    xp = xp_of(a, b)
    return xp.sum(a * b, axis=-1)
