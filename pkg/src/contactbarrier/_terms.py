"""Per-pair energies written in jax for batched autodiff.

Every term function maps local vertex coordinates ``x`` of shape
``(n_local, dim)`` plus per-term auxiliary data to ``(energy, info)``.
``info`` carries the distance, the factor breakdown, the weight, the force
magnitude and the signed closest-point weights used by friction.

Geometric terms assume the closest points are interior to their primitives;
the assembly only submits such pairs, and the mollifier drives the term to
zero before the closest point can leave the interior.
"""

import functools

import jax
import jax.numpy as jnp

from ._array import cross3, dot, safe_norm, unit
from .filters import (edge_factors_3d, edge_ge_2d, face_ge_3d, mollifier_ee,
                      mollifier_ev, mollifier_vf, vertex_factors_2d,
                      vertex_factors_3d)
from .kernels import h_eps, ipc_log_barrier


def _barrier_fn(p):
    return lambda z, eps: h_eps(z, eps) / z**p


def _finish(aux, p, d, gm_a, ge_a, gm_b, ge_b, M, w, wts, normal):
    gamma = gm_a * ge_a * gm_b * ge_b * M
    bar = _barrier_fn(p)
    eps = aux["eps"]
    scale = aux["kappa"] * aux["wconst"] * w
    e = scale * gamma * bar(d, eps)
    slope = jax.grad(bar)(d, eps)
    info = dict(d=d, gm_a=gm_a, ge_a=ge_a, gm_b=gm_b, ge_b=ge_b, M=M, gamma=gamma,
                weight=aux["wconst"] * w, barrier=bar(d, eps),
                lam=scale * gamma * jnp.abs(slope), wts=wts, normal=normal)
    return e, info


def _vv2(x, aux, p):
    pa, ya, na, pb, yb, nb = x
    diff = ya - yb
    d = safe_norm(diff)
    v = diff / d
    gm_a, ge_a = vertex_factors_2d(pa, ya, na, v, aux["alpha"], aux["beta"])
    gm_b, ge_b = vertex_factors_2d(pb, yb, nb, -v, aux["alpha"], aux["beta"])
    wts = jnp.array([0.0, 1.0, 0.0, 0.0, -1.0, 0.0])
    return _finish(aux, p, d, gm_a, ge_a, gm_b, ge_b, 1.0, 1.0, wts, v)


def _ev2(x, aux, p):
    ea, eb, pv, y, nv = x
    ab = eb - ea
    t = dot(y - ea, ab) / dot(ab, ab)
    q = ea + t * ab
    diff = q - y
    d = safe_norm(diff)
    v = diff / d
    ge_a = edge_ge_2d(ea, eb, v, aux["beta"])
    gm_b, ge_b = vertex_factors_2d(pv, y, nv, -v, aux["alpha"], aux["beta"])
    M = mollifier_ev(y, ea, eb, d, aux["c"])
    wts = jnp.stack([1.0 - t, t, 0.0, -1.0, 0.0])
    return _finish(aux, p, d, 1.0, ge_a, gm_b, ge_b, M, safe_norm(ab), wts, v)


def _vv3(x, aux, p):
    K = aux["mask_a"].shape[-1]
    ya, ra, yb, rb = x[0], x[1:1 + K], x[1 + K], x[2 + K:]
    diff = ya - yb
    d = safe_norm(diff)
    v = diff / d
    gm_a, ge_a = vertex_factors_3d(ya, ra, aux["mask_a"], aux["prev_a"], v, aux["alpha"], aux["beta"])
    gm_b, ge_b = vertex_factors_3d(yb, rb, aux["mask_b"], aux["prev_b"], -v, aux["alpha"], aux["beta"])
    wts = jnp.zeros(2 + 2 * K).at[0].set(1.0).at[1 + K].set(-1.0)
    return _finish(aux, p, d, gm_a, ge_a, gm_b, ge_b, 1.0, 1.0, wts, v)


def _ev3(x, aux, p):
    K = aux["mask_b"].shape[-1]
    ea, eb, o1, o2, y, r = x[0], x[1], x[2], x[3], x[4], x[5:]
    ab = eb - ea
    t = dot(y - ea, ab) / dot(ab, ab)
    q = ea + t * ab
    diff = q - y
    d = safe_norm(diff)
    v = diff / d
    gm_a, ge_a = edge_factors_3d(ea, eb, o1, o2, v, aux["alpha"], aux["beta"])
    gm_b, ge_b = vertex_factors_3d(y, r, aux["mask_b"], aux["prev_b"], -v, aux["alpha"], aux["beta"])
    M = mollifier_ev(y, ea, eb, d, aux["c"])
    wts = jnp.zeros(5 + K).at[0].set(1.0 - t).at[1].set(t).at[4].set(-1.0)
    return _finish(aux, p, d, gm_a, ge_a, gm_b, ge_b, M, safe_norm(ab), wts, v)


def _vf3(x, aux, p):
    K = aux["mask_a"].shape[-1]
    y, r, f0, f1, f2 = x[0], x[1:1 + K], x[1 + K], x[2 + K], x[3 + K]
    nrm = cross3(f1 - f0, f2 - f0)
    nn = dot(nrm, nrm)
    ap = y - f0
    w1 = dot(cross3(ap, f2 - f0), nrm) / nn
    w2 = dot(cross3(f1 - f0, ap), nrm) / nn
    q = f0 + w1 * (f1 - f0) + w2 * (f2 - f0)
    diff = y - q
    d = safe_norm(diff)
    v = diff / d
    gm_a, ge_a = vertex_factors_3d(y, r, aux["mask_a"], aux["prev_a"], v, aux["alpha"], aux["beta"])
    ge_b = face_ge_3d(f0, f1, f2, -v, aux["beta"])
    M = mollifier_vf(y, f0, f1, f2, d, aux["c"])
    area = 0.5 * jnp.sqrt(nn)
    wts = jnp.zeros(4 + K).at[0].set(1.0).at[1 + K].set(-(1.0 - w1 - w2)).at[2 + K].set(-w1).at[3 + K].set(-w2)
    return _finish(aux, p, d, gm_a, ge_a, 1.0, ge_b, M, area, wts, v)


def _line_params(a, b, c, e):
    d1, d2, r = b - a, e - c, a - c
    aa, ee, bb = dot(d1, d1), dot(d2, d2), dot(d1, d2)
    cc, ff = dot(d1, r), dot(d2, r)
    den = aa * ee - bb * bb
    return (bb * ff - cc * ee) / den, (aa * ff - bb * cc) / den


def _ee3(x, aux, p):
    a, b, o1, o2, c, e, o3, o4 = x
    s, t = _line_params(a, b, c, e)
    pa = a + s * (b - a)
    pb = c + t * (e - c)
    diff = pa - pb
    d = safe_norm(diff)
    v = diff / d
    gm_a, ge_a = edge_factors_3d(a, b, o1, o2, v, aux["alpha"], aux["beta"])
    gm_b, ge_b = edge_factors_3d(c, e, o3, o4, -v, aux["alpha"], aux["beta"])
    M = mollifier_ee(a, b, c, e, d, aux["c"])
    wts = jnp.stack([1.0 - s, s, 0.0, 0.0, -(1.0 - t), -t, 0.0, 0.0])
    return _finish(aux, p, d, gm_a, ge_a, gm_b, ge_b, M, safe_norm(b - a) * safe_norm(e - c), wts, v)


# -- IPC baseline: clamped distances, no filtering ----------------------------


def _ipc_finish(aux, d, wts, normal):
    dhat = aux["eps"]
    e = aux["kappa"] * ipc_log_barrier(d, dhat)
    slope = jax.grad(lambda z: ipc_log_barrier(z, dhat))(d)
    one = jnp.ones_like(d)
    info = dict(d=d, gm_a=one, ge_a=one, gm_b=one, ge_b=one, M=one, gamma=one, weight=one,
                barrier=ipc_log_barrier(d, dhat), lam=aux["kappa"] * jnp.abs(slope),
                wts=wts, normal=normal)
    return e, info


def _seg(pnt, a, b):
    ab = b - a
    t = jnp.clip(dot(pnt - a, ab) / dot(ab, ab), 0.0, 1.0)
    diff = pnt - (a + t * ab)
    return safe_norm(diff), t, diff


def _ipc_pe2(x, aux, p):
    a, b, pnt = x
    d, t, diff = _seg(pnt, a, b)
    # diff points from the edge to the vertex; side a is the edge
    return _ipc_finish(aux, d, jnp.stack([1.0 - t, t, -1.0]), -diff / d)


def _ipc_pt3(x, aux, p):
    pnt, f0, f1, f2 = x
    nrm = cross3(f1 - f0, f2 - f0)
    nn = dot(nrm, nrm)
    ap = pnt - f0
    w1 = dot(cross3(ap, f2 - f0), nrm) / nn
    w2 = dot(cross3(f1 - f0, ap), nrm) / nn
    w0 = 1.0 - w1 - w2
    inside = (w0 > 0) & (w1 > 0) & (w2 > 0)
    q_in = w0 * f0 + w1 * f1 + w2 * f2
    d_in = safe_norm(pnt - q_in)
    segs = [_seg(pnt, f0, f1), _seg(pnt, f1, f2), _seg(pnt, f2, f0)]
    ds = jnp.stack([s[0] for s in segs])
    k = jnp.argmin(ds)
    t = jnp.stack([s[1] for s in segs])[k]
    bary_e = jnp.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    nxt = jnp.array([1, 2, 0])
    bary_out = (1.0 - t) * bary_e[k] + t * bary_e[nxt[k]]
    d = jnp.where(inside, d_in, ds[k])
    bary = jnp.where(inside, jnp.stack([w0, w1, w2]), bary_out)
    q = bary @ jnp.stack([f0, f1, f2])
    wts = jnp.concatenate([jnp.ones(1), -bary])
    return _ipc_finish(aux, d, wts, (pnt - q) / d)


def _ipc_ee3(x, aux, p):
    a, b, c, e = x
    s, t = _line_params(a, b, c, e)
    inner = (s > 0) & (s < 1) & (t > 0) & (t < 1)
    s_in = jnp.where(inner, s, 0.5)
    t_in = jnp.where(inner, t, 0.5)
    d_in = safe_norm(a + s_in * (b - a) - c - t_in * (e - c))
    cands = [_seg(a, c, e), _seg(b, c, e), _seg(c, a, b), _seg(e, a, b)]
    ds = jnp.stack([q[0] for q in cands])
    ts = jnp.stack([q[1] for q in cands])
    k = jnp.argmin(ds)
    tk = ts[k]
    w_out = jnp.stack([
        jnp.array([1.0, 0.0, -1.0, 0.0]) + tk * jnp.array([0.0, 0.0, 1.0, -1.0]),
        jnp.array([0.0, 1.0, -1.0, 0.0]) + tk * jnp.array([0.0, 0.0, 1.0, -1.0]),
        jnp.array([1.0, 0.0, -1.0, 0.0]) + tk * jnp.array([-1.0, 1.0, 0.0, 0.0]),
        jnp.array([1.0, 0.0, 0.0, -1.0]) + tk * jnp.array([-1.0, 1.0, 0.0, 0.0]),
    ])[k]
    w_in = jnp.stack([1.0 - s_in, s_in, -(1.0 - t_in), -t_in])
    use_in = inner & (d_in <= ds[k])
    d = jnp.where(use_in, d_in, ds[k])
    wts = jnp.where(use_in, w_in, w_out)
    rel = wts @ x
    return _ipc_finish(aux, d, wts, rel / d)


TERMS = {
    (2, "vv"): _vv2,
    (2, "ev"): _ev2,
    (3, "vv"): _vv3,
    (3, "ev"): _ev3,
    (3, "vf"): _vf3,
    (3, "ee"): _ee3,
    (2, "ipc_pe"): _ipc_pe2,
    (3, "ipc_pt"): _ipc_pt3,
    (3, "ipc_ee"): _ipc_ee3,
}


@functools.lru_cache(maxsize=None)
def compiled(dim, kind, order, p):
    """Jitted batch evaluator: order 0 gives ``(energy, info)``, order 1 adds
    the local gradient, order 2 the local Hessian."""
    fn = TERMS[(dim, kind)]

    def value_grad(x, aux):
        (e, info), g = jax.value_and_grad(lambda y: fn(y, aux, p), has_aux=True)(x)
        return g, (e, info, g)

    if order == 0:
        one = lambda x, aux: fn(x, aux, p)  # noqa: E731
    elif order == 1:
        def one(x, aux):
            g, (e, info, _) = value_grad(x, aux)
            return e, info, g
    else:
        # forward-over-reverse traces the term once for value, gradient and Hessian
        def one(x, aux):
            H, (e, info, g) = jax.jacfwd(value_grad, has_aux=True)(x, aux)
            return e, info, g, H
    return jax.jit(jax.vmap(one))
