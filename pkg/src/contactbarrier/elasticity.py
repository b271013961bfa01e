"""Compressible Neo-Hookean elasticity on triangles (2D) and tetrahedra (3D).

Energy density ``mu/2 (tr F^T F - d) - mu log J + lam/2 (log J)^2``, infinite
for ``J <= 0`` so the line search never accepts an inverted element.
"""

import functools

import jax
import jax.numpy as jnp
import numpy as np
import scipy.sparse as sp

from . import _array  # noqa: F401  (enables float64)

__all__ = ["ElasticModel", "elastic_energy", "lumped_masses", "lame"]


def lame(E, nu):
    return E / (2 * (1 + nu)), E * nu / ((1 + nu) * (1 - 2 * nu))


def _density(x, Dm_inv, vol, mu, lam):
    Ds = (x[1:] - x[0]).T
    F = Ds @ Dm_inv
    J = jnp.linalg.det(F)
    ok = J > 0
    logJ = jnp.log(jnp.where(ok, J, 1.0))
    d = F.shape[0]
    W = 0.5 * mu * (jnp.sum(F * F) - d) - mu * logJ + 0.5 * lam * logJ**2
    return jnp.where(ok, vol * W, jnp.inf)


@functools.lru_cache(maxsize=None)
def _compiled(order):
    e = _density
    if order == 0:
        return jax.jit(jax.vmap(e))
    if order == 1:
        return jax.jit(jax.vmap(jax.value_and_grad(e)))

    def all3(*a):
        return e(*a), jax.grad(e)(*a), jax.hessian(e)(*a)

    return jax.jit(jax.vmap(all3))


class ElasticModel:
    """Precomputed rest data for the elements of a mesh."""

    def __init__(self, mesh, mu, lam):
        self.dim = mesh.dim
        self.elements = mesh.elements
        self.n_nodes = mesh.n_nodes
        X = mesh.rest_positions
        Dm = np.transpose(X[self.elements[:, 1:]] - X[self.elements[:, :1]], (0, 2, 1))
        self.Dm_inv = np.linalg.inv(Dm) if len(Dm) else np.zeros((0, self.dim, self.dim))
        fact = 2.0 if self.dim == 2 else 6.0
        self.volume = np.abs(np.linalg.det(Dm)) / fact if len(Dm) else np.zeros(0)
        m = len(self.elements)
        self.mu = np.broadcast_to(np.asarray(mu, float), (m,)).copy()
        self.lam = np.broadcast_to(np.asarray(lam, float), (m,)).copy()

    def _run(self, X, order):
        x = np.asarray(X, float)[self.elements]
        return _compiled(order)(x, self.Dm_inv, self.volume, self.mu, self.lam)

    def energy(self, X):
        if not len(self.elements):
            return 0.0
        return float(np.sum(np.asarray(self._run(X, 0))))

    def gradient(self, X):
        g = np.zeros((self.n_nodes, self.dim))
        if len(self.elements):
            _, ge = self._run(X, 1)
            np.add.at(g, self.elements, np.asarray(ge))
        return g

    def evaluate(self, X, order=2, project=True):
        """Energy, gradient ``(n, dim)`` and sparse Hessian (PSD-projected per
        element when ``project``)."""
        from .potential import project_psd

        n, d = self.n_nodes, self.dim
        if not len(self.elements):
            return 0.0, np.zeros((n, d)), sp.csr_matrix((n * d, n * d))
        if order < 2:
            e, ge = self._run(X, 1)
            g = np.zeros((n, d))
            np.add.at(g, self.elements, np.asarray(ge))
            return float(np.sum(e)), g, None
        e, ge, He = (np.asarray(a) for a in self._run(X, 2))
        g = np.zeros((n, d))
        np.add.at(g, self.elements, ge)
        k = self.elements.shape[1] * d
        H = He.reshape(len(e), k, k)
        if project:
            H = project_psd(H)
        dof = (self.elements[:, :, None] * d + np.arange(d)).reshape(len(e), -1)
        rows = np.broadcast_to(dof[:, :, None], H.shape).ravel()
        cols = np.broadcast_to(dof[:, None, :], H.shape).ravel()
        Hs = sp.coo_matrix((H.ravel(), (rows, cols)), shape=(n * d, n * d)).tocsr()
        return float(np.sum(e)), g, Hs

    def min_jacobian(self, X):
        if not len(self.elements):
            return np.inf
        P = np.asarray(X, float)[self.elements]
        Ds = np.transpose(P[:, 1:] - P[:, :1], (0, 2, 1))
        return float(np.min(np.linalg.det(Ds @ self.Dm_inv)))


def elastic_energy(mesh, material, X=None):
    """Neo-Hookean energy of ``mesh`` at ``X`` for a material with ``E``/``nu``."""
    mu, lam = lame(material.E, material.nu)
    model = ElasticModel(mesh, mu, lam)
    return model.energy(mesh.positions if X is None else X)


def lumped_masses(mesh, rho):
    """Per-node masses: each element spreads ``rho * volume`` evenly."""
    m = np.zeros(mesh.n_nodes)
    if not len(mesh.elements):
        return m
    X = mesh.rest_positions
    Dm = X[mesh.elements[:, 1:]] - X[mesh.elements[:, :1]]
    vol = np.abs(np.linalg.det(Dm)) / (2.0 if mesh.dim == 2 else 6.0)
    share = np.broadcast_to(np.asarray(rho, float), vol.shape) * vol / mesh.elements.shape[1]
    np.add.at(m, mesh.elements, share[:, None])
    return m
