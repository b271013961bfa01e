"""Lagged smoothed-Coulomb friction.

Normal force magnitudes and tangent bases are frozen from a previous state
``x0``. Each pair dissipates ``mu * lam * f0(|u|)`` where ``u`` is the
tangential relative displacement since ``x0``. ``f0`` is the antiderivative
of the smoothed friction profile ``f1`` with ``f0(0) = 0``:

- ``f1(y) = 2y/(h e_v) - y^2/(h e_v)^2`` for ``y < h e_v``, else 1,
- ``f0(y) = y^2/(h e_v) - y^3/(3 (h e_v)^2)`` for ``y < h e_v``, else
  ``y - h e_v / 3``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = ["FrictionLag", "f0", "f1", "lag_friction", "friction_potential"]


def f0(y, eps_h):
    y = np.asarray(y, float)
    return np.where(y < eps_h, y**2 / eps_h - y**3 / (3 * eps_h**2), y - eps_h / 3)


def f1(y, eps_h):
    y = np.asarray(y, float)
    return np.where(y < eps_h, 2 * y / eps_h - y**2 / eps_h**2, 1.0)


def _f1_over_y(y, eps_h):
    return np.where(y < eps_h, 2 / eps_h - y / eps_h**2, 1.0 / np.maximum(y, eps_h))


def _f1_prime(y, eps_h):
    return np.where(y < eps_h, 2 / eps_h - 2 * y / eps_h**2, 0.0)


def _tangent_basis(n):
    """Orthonormal columns spanning the complement of unit normals ``n``."""
    if n.shape[1] == 2:
        return np.stack([-n[:, 1], n[:, 0]], axis=1)[:, :, None]
    a = np.eye(3)[np.argmin(np.abs(n), axis=1)]
    t1 = a - np.einsum("ij,ij->i", a, n)[:, None] * n
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(n, t1)
    return np.stack([t1, t2], axis=2)


@dataclass
class FrictionLag:
    """Frozen friction data: ``u = G (x - x0)`` stacks the tangential
    relative displacements of all lagged pairs."""

    G: sp.csr_matrix
    lam: np.ndarray
    x0: np.ndarray

    @property
    def n_pairs(self):
        return len(self.lam)


def lag_friction(contact_eval, X0):
    """Build the lagged data from a contact assembly at positions ``X0``."""
    X0 = np.asarray(X0, float)
    n, dim = X0.shape
    info = contact_eval.info
    lam = np.asarray(info["lam"])
    live = np.flatnonzero(lam > 0)
    rows, cols, vals = [], [], []
    lam_out = []
    r0 = 0
    offset = 0
    for idx, wts, nrm in zip(info["idx"], info["wts"], info["normal"]):
        m = len(idx)
        sel = live[(live >= offset) & (live < offset + m)] - offset
        offset += m
        if not len(sel):
            continue
        idx, wts, nrm = idx[sel], wts[sel], nrm[sel]
        T = _tangent_basis(nrm)  # (k, dim, dim-1)
        k, nl = idx.shape
        for j in range(dim - 1):
            row = r0 + np.arange(k) * (dim - 1) + j
            for c in range(dim):
                v = wts * T[:, c, j][:, None]
                keep = (idx < n) & (v != 0)
                rows.append(np.broadcast_to(row[:, None], idx.shape)[keep])
                cols.append((idx * dim + c)[keep])
                vals.append(v[keep])
        lam_out.append(lam[offset - m + sel])
        r0 += k * (dim - 1)
    lam_out = np.concatenate(lam_out) if lam_out else np.zeros(0)
    if rows:
        G = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(r0, n * dim)).tocsr()
    else:
        G = sp.csr_matrix((0, n * dim))
    return FrictionLag(G, lam_out, X0.copy())


def friction_potential(X, lag, mu, eps_v, h, order=2):
    """Dissipative potential, gradient ``(n, dim)`` and PSD Hessian."""
    X = np.asarray(X, float)
    n, dim = X.shape
    if lag is None or lag.n_pairs == 0 or mu == 0:
        z = sp.csr_matrix((n * dim, n * dim)) if order >= 2 else None
        return 0.0, (np.zeros((n, dim)) if order >= 1 else None), z
    eh = eps_v * h
    u = (lag.G @ (X - lag.x0).ravel()).reshape(-1, dim - 1)
    y = np.linalg.norm(u, axis=1)
    scale = mu * lag.lam
    D = float(np.sum(scale * f0(y, eh)))
    if order == 0:
        return D, None, None
    q = _f1_over_y(y, eh)
    gu = (scale * q)[:, None] * u
    grad = (lag.G.T @ gu.ravel()).reshape(n, dim)
    if order == 1:
        return D, grad, None
    # Hessian in u: f1/y on the complement of u, f1' along u
    k = dim - 1
    I = np.eye(k)
    with np.errstate(invalid="ignore", divide="ignore"):
        uh = np.where(y[:, None] > 0, u / np.where(y > 0, y, 1.0)[:, None], 0.0)
    P = uh[:, :, None] * uh[:, None, :]
    fp = _f1_prime(y, eh)
    Hu = scale[:, None, None] * (q[:, None, None] * (I - P) + fp[:, None, None] * P)
    Hb = sp.block_diag(list(Hu), format="csr") if len(Hu) else sp.csr_matrix((0, 0))
    H = (lag.G.T @ Hb @ lag.G).tocsr()
    return D, grad, H
