"""Discrete contact potential: pair collection, adaptive localization,
energy/gradient/Hessian assembly and the IPC log-barrier baseline.

A term exists for every non-adjacent pair whose closest points are interior
to both primitives and closer than the pair's localization radius. Its energy
is ``kappa * w * gamma * h_eps(d) / d**p`` with the weight ``w`` the product
over both primitives of ``L**((n-1) - dim) * A`` (``A`` = 1 for vertices,
current length for edges, current area for faces).
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator

from . import _terms
from .filters import DirectionalFactor
from .kernels import ipc_log_barrier
from .params import PotentialParams
from .proximity import broad_phase, edge_edge_distance, point_triangle_distance

log = logging.getLogger(__name__)

__all__ = [
    "ContactTerm",
    "PotentialEval",
    "GeometricContactPotential",
    "IPCBarrierPotential",
    "adapt_epsilon",
    "collect_terms",
    "evaluate",
    "evaluate_batches",
    "ContactError",
    "energy",
    "gradient",
    "hessian",
    "ipc_barrier",
    "contact_force_magnitudes",
    "project_psd",
]

_KIND_NAME = {"vv": "VV", "ev": "EV", "vf": "VF", "ee": "EE",
              "ipc_pe": "EV", "ipc_pt": "VF", "ipc_ee": "EE"}


class ContactError(RuntimeError):
    """A pair reached zero distance; the state is no longer contact-free."""


@dataclass
class ContactTerm:
    kind: str
    a: int
    b: int
    distance: float
    factor: DirectionalFactor
    barrier: float
    weight: float
    energy: float
    force: float


@dataclass
class _Batch:
    kind: str
    keys: np.ndarray
    idx: np.ndarray
    aux: dict


@dataclass
class PotentialEval:
    """Result of one assembly at fixed positions."""

    energy: float
    gradient: np.ndarray | None
    hessian: sp.csr_matrix | None
    info: dict

    @property
    def n_terms(self):
        return len(self.info["kind"])


def ipc_barrier(d, dhat):
    """IPC log barrier ``-(d - dhat)^2 log(d / dhat)`` for ``d < dhat``, else 0."""
    if not dhat > 0:
        raise ValueError("dhat must be positive")
    return ipc_log_barrier(d, dhat)


def project_psd(H):
    """Clamp negative eigenvalues of a batch of symmetric matrices to zero."""
    H = 0.5 * (H + np.swapaxes(H, -1, -2))
    w, V = np.linalg.eigh(H)
    if np.all(w >= 0):
        return H
    return (V * np.maximum(w, 0.0)[..., None, :]) @ np.swapaxes(V, -1, -2)


# -- batching ----------------------------------------------------------------


# Terms are evaluated in fixed-size chunks so each kernel compiles once.
CHUNK = 64


def _bucket(n):
    return CHUNK


def _valence_bucket(k):
    b = 4
    while b < k:
        b *= 2
    return b


def _ring_table(mesh):
    """Padded ordered rings of all boundary vertices (3D), cached on the mesh."""
    cache = getattr(mesh, "_ring_table", None)
    if cache is not None:
        return cache
    counts = np.diff(mesh.ring_ptr)
    K = _valence_bucket(int(counts.max(initial=3)))
    n = mesh.n_nodes
    ring = np.full((n, K), n, dtype=np.int64)
    mask = np.zeros((n, K), dtype=bool)
    prev = np.zeros((n, K), dtype=np.int64)
    for v in mesh.boundary_vertices:
        r = mesh.ring(v)
        k = len(r)
        ring[v, :k] = r
        mask[v, :k] = True
        prev[v, :k] = (np.arange(k) - 1) % k
    mesh._ring_table = (ring, mask, prev, counts)
    return mesh._ring_table


def _rings(mesh, verts):
    ring, mask, prev, counts = _ring_table(mesh)
    K = _valence_bucket(int(counts[verts].max(initial=3)))
    return ring[verts, :K], mask[verts, :K], prev[verts, :K]


def _eps_arrays(mesh, params):
    n, ne = mesh.n_nodes, len(mesh.boundary_edges)
    nf = len(mesh.boundary_faces)
    ev = np.full(n, params.eps_trg) if params.eps_vertex is None else np.asarray(params.eps_vertex, float)
    ee = np.full(ne, params.eps_trg) if params.eps_edge is None else np.asarray(params.eps_edge, float)
    ef = np.full(nf, params.eps_trg) if params.eps_face is None else np.asarray(params.eps_face, float)
    return ev, ee, ef


def _check_gap(d):
    if len(d) and np.min(d) <= 0:
        raise ContactError("zero distance between non-adjacent primitives")


def _geometric_batches(mesh, X, params):
    """Collect pairs with interior closest points closer than their radius."""
    dim = mesh.dim
    E, F = mesh.boundary_edges, mesh.boundary_faces
    epsV, epsE, epsF = _eps_arrays(mesh, params)
    Lv, Le = mesh.length_vertex, mesh.length_edge
    r = float(max(epsV[mesh.boundary_vertices].max(initial=0.0), epsE.max(initial=0.0)))
    cand = broad_phase(mesh, r, X)
    batches = []

    def add(kind, keys, idx, eps, wconst, **extra):
        if not len(keys):
            return
        aux = dict(eps=eps, wconst=wconst, kappa=np.full(len(keys), params.kappa),
                   alpha=np.full(len(keys), params.alpha), beta=np.full(len(keys), params.beta),
                   c=np.full(len(keys), params.c), **extra)
        batches.append(_Batch(kind, keys, idx, aux))

    pw = dim - 1  # exponent of a vertex length scale
    if len(cand.vv):
        i, j = cand.vv[:, 0], cand.vv[:, 1]
        d = np.linalg.norm(X[i] - X[j], axis=1)
        _check_gap(d)
        eps = np.minimum(epsV[i], epsV[j])
        s = d < eps
        i, j, eps = i[s], j[s], eps[s]
        w = Lv[i] ** pw * Lv[j] ** pw
        if dim == 2:
            idx = np.stack([mesh.vertex_prev[i], i, mesh.vertex_next[i],
                            mesh.vertex_prev[j], j, mesh.vertex_next[j]], axis=1)
            add("vv", cand.vv[s], idx, eps, w)
        elif len(i):
            ra, ma, pa = _rings(mesh, np.concatenate([i, j]))
            K = ra.shape[1]
            n = len(i)
            idx = np.concatenate([i[:, None], ra[:n], j[:, None], ra[n:]], axis=1)
            add("vv", cand.vv[s], idx, eps, w, mask_a=ma[:n], prev_a=pa[:n], mask_b=ma[n:], prev_b=pa[n:])
    if len(cand.ev):
        e, v = cand.ev[:, 0], cand.ev[:, 1]
        A, B, P = X[E[e, 0]], X[E[e, 1]], X[v]
        AB = B - A
        t = np.einsum("ij,ij->i", P - A, AB) / np.einsum("ij,ij->i", AB, AB)
        tc = np.clip(t, 0.0, 1.0)
        d = np.linalg.norm(P - A - tc[:, None] * AB, axis=1)
        _check_gap(d)
        eps = np.minimum(epsE[e], epsV[v])
        s = (t > 0) & (t < 1) & (d < eps)
        e, v, eps = e[s], v[s], eps[s]
        w = Lv[v] ** pw * Le[e] ** (pw - 1)
        if dim == 2:
            idx = np.stack([E[e, 0], E[e, 1], mesh.vertex_prev[v], v, mesh.vertex_next[v]], axis=1)
            add("ev", cand.ev[s], idx, eps, w)
        elif len(e):
            r_, m_, p_ = _rings(mesh, v)
            idx = np.concatenate([E[e], mesh.edge_opposite[e], v[:, None], r_], axis=1)
            add("ev", cand.ev[s], idx, eps, w, mask_b=m_, prev_b=p_)
    if dim == 3 and len(cand.vf):
        v, f = cand.vf[:, 0], cand.vf[:, 1]
        d, _, inside = point_triangle_distance(X[v], X[F[f, 0]], X[F[f, 1]], X[F[f, 2]])
        _check_gap(d)
        eps = np.minimum(epsV[v], epsF[f])
        s = inside & (d < eps)
        v, f, eps = v[s], f[s], eps[s]
        if len(v):
            r_, m_, p_ = _rings(mesh, v)
            idx = np.concatenate([v[:, None], r_, F[f]], axis=1)
            add("vf", cand.vf[s], idx, eps, Lv[v] ** 2, mask_a=m_, prev_a=p_)
    if dim == 3 and len(cand.ee):
        e1, e2 = cand.ee[:, 0], cand.ee[:, 1]
        d, _, _, inner = edge_edge_distance(X[E[e1, 0]], X[E[e1, 1]], X[E[e2, 0]], X[E[e2, 1]])
        _check_gap(d)
        eps = np.minimum(epsE[e1], epsE[e2])
        s = inner & (d < eps)
        e1, e2, eps = e1[s], e2[s], eps[s]
        idx = np.concatenate([E[e1], mesh.edge_opposite[e1], E[e2], mesh.edge_opposite[e2]], axis=1)
        add("ee", cand.ee[s], idx, eps, Le[e1] * Le[e2])
    return batches


def _ipc_batches(mesh, X, dhat, kappa):
    """Unfiltered pairs of the log-barrier baseline: point-edge in 2D,
    point-triangle and edge-edge in 3D, with clamped distances."""
    E, F = mesh.boundary_edges, mesh.boundary_faces
    batches = []

    def add(kind, keys, idx):
        n = len(keys)
        if n:
            aux = dict(eps=np.full(n, dhat), kappa=np.full(n, kappa))
            batches.append(_Batch(kind, keys, idx, aux))

    if mesh.dim == 2:
        cand = broad_phase(mesh, dhat, X, kinds=("ev",))
        if len(cand.ev):
            e, v = cand.ev[:, 0], cand.ev[:, 1]
            AB = X[E[e, 1]] - X[E[e, 0]]
            t = np.clip(np.einsum("ij,ij->i", X[v] - X[E[e, 0]], AB) / np.einsum("ij,ij->i", AB, AB), 0, 1)
            d = np.linalg.norm(X[v] - X[E[e, 0]] - t[:, None] * AB, axis=1)
            _check_gap(d)
            s = d < dhat
            add("ipc_pe", cand.ev[s], np.stack([E[e, 0], E[e, 1], v], axis=1)[s])
        return batches
    cand = broad_phase(mesh, dhat, X, kinds=("vf", "ee"))
    if len(cand.vf):
        v, f = cand.vf[:, 0], cand.vf[:, 1]
        d = point_triangle_distance(X[v], X[F[f, 0]], X[F[f, 1]], X[F[f, 2]])[0]
        _check_gap(d)
        s = d < dhat
        add("ipc_pt", cand.vf[s], np.concatenate([v[:, None], F[f]], axis=1)[s])
    if len(cand.ee):
        e1, e2 = cand.ee[:, 0], cand.ee[:, 1]
        d = edge_edge_distance(X[E[e1, 0]], X[E[e1, 1]], X[E[e2, 0]], X[E[e2, 1]])[0]
        _check_gap(d)
        s = d < dhat
        add("ipc_ee", cand.ee[s], np.concatenate([E[e1], E[e2]], axis=1)[s])
    return batches


def _run_batch(batch, Xe, dim, order, p):
    fn = _terms.compiled(dim, batch.kind, order, p)
    n = len(batch.keys)
    size = _bucket(n)
    outs = []
    for start in range(0, n, size):
        stop = min(start + size, n)
        sel = np.arange(start, start + size)
        sel = np.where(sel < stop, sel, start)
        x = Xe[batch.idx[sel]]
        aux = {k: v[sel] for k, v in batch.aux.items()}
        aux["kappa"] = np.where(np.arange(size) < stop - start, aux["kappa"], 0.0)
        res = fn(x, aux)
        outs.append([np.asarray(r)[: stop - start] if not isinstance(r, dict)
                     else {k: np.asarray(v)[: stop - start] for k, v in r.items()} for r in res])
    if len(outs) == 1:
        return outs[0]
    merged = []
    for parts in zip(*outs):
        if isinstance(parts[0], dict):
            merged.append({k: np.concatenate([q[k] for q in parts]) for k in parts[0]})
        else:
            merged.append(np.concatenate(parts))
    return merged


def evaluate_batches(batches, X, dim, order=0, project=False, p=None):
    """Energy (and gradient / Hessian for ``order`` 1 / 2) of term batches."""
    X = np.asarray(X, dtype=float)
    n = len(X)
    p = dim - 1 if p is None else int(p)
    Xe = np.vstack([X, np.zeros((1, dim))])
    total = 0.0
    grad = np.zeros((n + 1, dim)) if order >= 1 else None
    rows, cols, vals = [], [], []
    info = {"kind": [], "keys": [], "idx": []}
    fields = ("d", "gm_a", "ge_a", "gm_b", "ge_b", "M", "gamma", "weight", "barrier", "lam", "energy")
    for f in fields:
        info[f] = []
    info["wts"], info["normal"] = [], []
    for batch in batches:
        res = _run_batch(batch, Xe, dim, order, p)
        e, term = res[0], res[1]
        total += float(np.sum(e))
        m = len(batch.keys)
        info["kind"].extend([batch.kind] * m)
        info["keys"].append(batch.keys)
        info["idx"].append(batch.idx)
        for f in fields[:-1]:
            info[f].append(term[f])
        info["energy"].append(e)
        info["wts"].append(term["wts"])
        info["normal"].append(term["normal"])
        if order >= 1:
            np.add.at(grad, batch.idx, res[2])
        if order >= 2:
            H = res[3].reshape(m, batch.idx.shape[1] * dim, batch.idx.shape[1] * dim)
            if project:
                H = project_psd(H)
            dof = (batch.idx[:, :, None] * dim + np.arange(dim)).reshape(m, -1)
            r = np.broadcast_to(dof[:, :, None], H.shape)
            c = np.broadcast_to(dof[:, None, :], H.shape)
            keep = (r < n * dim) & (c < n * dim) & (H != 0)
            rows.append(r[keep])
            cols.append(c[keep])
            vals.append(H[keep])
    for f in fields:
        info[f] = np.concatenate(info[f]) if info[f] else np.zeros(0)
    info["keys"] = np.concatenate(info["keys"]) if info["keys"] else np.zeros((0, 2), dtype=np.int64)
    info["kind"] = np.array(info["kind"], dtype=object)
    hess = None
    if order >= 2:
        if rows:
            hess = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                 shape=(n * dim, n * dim)).tocsr()
        else:
            hess = sp.csr_matrix((n * dim, n * dim))
    g = grad[:n] if grad is not None else None
    return PotentialEval(total, g, hess, info)


# -- public functions --------------------------------------------------------


def _positions(mesh, X):
    return mesh.positions if X is None else np.asarray(X, dtype=float).reshape(mesh.positions.shape)


def evaluate(mesh, params, X=None, order=0, project=False):
    """Assemble the geometric potential at ``X`` (default: current positions)."""
    X = _positions(mesh, X)
    batches = _geometric_batches(mesh, X, params)
    return evaluate_batches(batches, X, mesh.dim, order, project, params.exponent(mesh.dim))


def energy(mesh, params, X=None):
    return evaluate(mesh, params, X, order=0).energy


def gradient(mesh, params, X=None):
    """Gradient with respect to vertex positions, shape ``(n_nodes, dim)``."""
    return evaluate(mesh, params, X, order=1).gradient


def hessian(mesh, params, X=None, project=False):
    """Sparse Hessian over the flattened coordinates ``x0, y0, (z0), x1, ...``."""
    return evaluate(mesh, params, X, order=2, project=project).hessian


def collect_terms(mesh, params, X=None):
    """Active contact terms (``d < eps`` and nonzero directional factor)."""
    res = evaluate(mesh, params, X, order=0)
    I = res.info
    out = []
    for k in np.flatnonzero(I["gamma"] > 0):
        f = DirectionalFactor(gm_xy=float(I["gm_a"][k]), gm_yx=float(I["gm_b"][k]),
                              ge_xy=float(I["ge_a"][k]), ge_yx=float(I["ge_b"][k]), M=float(I["M"][k]))
        out.append(ContactTerm(_KIND_NAME[I["kind"][k]], int(I["keys"][k, 0]), int(I["keys"][k, 1]),
                               float(I["d"][k]), f, float(I["barrier"][k]), float(I["weight"][k]),
                               float(I["energy"][k]), float(I["lam"][k])))
    return out


def contact_force_magnitudes(mesh, params, X=None):
    """Per-term ``kappa * w * gamma * |p'(d)|`` for the collected terms."""
    return np.array([t.force for t in collect_terms(mesh, params, X)])


def _pair_vertices(mesh, kind, keys):
    E, F = mesh.boundary_edges, mesh.boundary_faces
    a, b = keys[:, 0], keys[:, 1]
    if kind == "vv":
        return [a, b]
    if kind == "ev":
        return [E[a, 0], E[a, 1], b]
    if kind == "vf":
        return [a, F[b, 0], F[b, 1], F[b, 2]]
    return [E[a, 0], E[a, 1], E[b, 0], E[b, 1]]


def adapt_epsilon(mesh, params, X=None):
    """Per-primitive localization radii that silence the rest configuration.

    Every vertex of a rest pair with a nonzero directional factor gets at most
    half the pair distance; edges take the minimum over their endpoints and
    faces the minimum over their edges.
    """
    from .proximity import intersects

    X = mesh.rest_positions if X is None else np.asarray(X, dtype=float)
    if intersects(mesh, X):
        raise ContactError("rest configuration is intersecting")
    base = PotentialParams(eps_trg=params.eps_trg, alpha=params.alpha, beta=params.beta,
                           c=params.c, p=params.p, kappa=1.0)
    eps_v = np.full(mesh.n_nodes, params.eps_trg)
    batches = _geometric_batches(mesh, X, base)
    res = evaluate_batches(batches, X, mesh.dim, 0, p=base.exponent(mesh.dim))
    start = 0
    for batch in batches:
        m = len(batch.keys)
        gamma = res.info["gamma"][start:start + m]
        d = res.info["d"][start:start + m]
        start += m
        live = gamma > 0
        for verts in _pair_vertices(mesh, batch.kind, batch.keys):
            np.minimum.at(eps_v, verts[live], 0.5 * d[live])
    E, F = mesh.boundary_edges, mesh.boundary_faces
    eps_e = np.minimum(eps_v[E[:, 0]], eps_v[E[:, 1]])
    eps_f = np.zeros(0)
    if mesh.dim == 3 and len(F):
        ef = np.full((len(F), 3), np.inf)
        # faces take the minimum over their edges
        lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(E)}
        for j in range(3):
            a, b = F[:, j], F[:, (j + 1) % 3]
            ids = np.array([lookup[(min(x, y), max(x, y))] for x, y in zip(a, b)])
            ef[:, j] = eps_e[ids]
        eps_f = ef.min(axis=1)
    n_small = int(np.sum(eps_v[mesh.boundary_vertices] < params.eps_trg))
    log.info("adapt_epsilon: %d of %d boundary vertices shrunk", n_small, len(mesh.boundary_vertices))
    return eps_v, eps_e, eps_f


# -- estimators -----------------------------------------------------------------


class GeometricContactPotential(BaseEstimator):
    """Estimator-style wrapper: ``fit`` adapts the localization radii to a
    mesh's rest state; evaluation methods then take current positions."""

    def __init__(self, eps_trg=1e-2, alpha=0.5, beta=0.1, c=0.01, p=None, kappa=1e4, adaptive=True):
        self.eps_trg = eps_trg
        self.alpha = alpha
        self.beta = beta
        self.c = c
        self.p = p
        self.kappa = kappa
        self.adaptive = adaptive

    def fit(self, mesh, y=None):
        params = PotentialParams(eps_trg=self.eps_trg, alpha=self.alpha, beta=self.beta,
                                 c=self.c, p=self.p, kappa=self.kappa)
        if self.adaptive:
            params = params.with_eps(*adapt_epsilon(mesh, params))
        self.mesh_ = mesh
        self.params_ = params
        self.eps_vertex_, self.eps_edge_, self.eps_face_ = _eps_arrays(mesh, params)
        return self

    def _check(self):
        if not hasattr(self, "params_"):
            raise RuntimeError("call fit(mesh) first")

    def evaluate(self, X=None, order=0, project=False):
        self._check()
        return evaluate(self.mesh_, self.params_, X, order, project)

    def energy(self, X=None):
        return self.evaluate(X).energy

    def gradient(self, X=None):
        return self.evaluate(X, 1).gradient

    def hessian(self, X=None, project=False):
        return self.evaluate(X, 2, project).hessian

    def terms(self, X=None):
        self._check()
        return collect_terms(self.mesh_, self.params_, X)

    @property
    def search_radius(self):
        return self.eps_trg


class IPCBarrierPotential(BaseEstimator):
    """Unfiltered log-barrier baseline over point-edge (2D) or point-triangle
    and edge-edge (3D) pairs with distance below ``dhat``."""

    def __init__(self, dhat=1e-2, kappa=1e4):
        self.dhat = dhat
        self.kappa = kappa

    def fit(self, mesh, y=None):
        if not self.dhat > 0:
            raise ValueError("dhat must be positive")
        self.mesh_ = mesh
        return self

    def evaluate(self, X=None, order=0, project=False):
        if not hasattr(self, "mesh_"):
            raise RuntimeError("call fit(mesh) first")
        X = _positions(self.mesh_, X)
        batches = _ipc_batches(self.mesh_, X, self.dhat, self.kappa)
        return evaluate_batches(batches, X, self.mesh_.dim, order, project)

    def energy(self, X=None):
        return self.evaluate(X).energy

    def gradient(self, X=None):
        return self.evaluate(X, 1).gradient

    def hessian(self, X=None, project=False):
        return self.evaluate(X, 2, project).hessian

    @property
    def search_radius(self):
        return self.dhat
