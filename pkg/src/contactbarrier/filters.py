"""Directional factor of a contact pair.

The factor multiplies the barrier of every pair and combines

- ``g^m``: local-minimum terms, smoothed steps of ``t . v`` over the tangent
  directions ``t`` of the primitive that holds a closest point,
- ``g^e``: exterior-direction terms, checking that ``v`` enters the material,
- ``M``: a mollifier that fades a pair out as its closest point reaches the
  boundary of a primitive.

``v`` for a side is the unit vector from the other closest point to the
closest point on that side. All building blocks are written against an array
namespace (numpy or jax.numpy) and broadcast over leading batch axes, so the
potential assembly differentiates the very same code.
"""

from dataclasses import dataclass, field

import numpy as np

from ._array import cross2, cross3, dot, safe_norm, unit, xp_of
from .kernels import mollify_hc, step

__all__ = [
    "TangentFrame",
    "DirectionalFactor",
    "ContactPair",
    "tangent_frame",
    "g_m",
    "phi_e_2d",
    "phi_e_edge_3d",
    "determine_inside_3d",
    "g_e_vertex",
    "g_e_edge",
    "mollifier_M",
    "gamma_ps",
    "vertex_factors_2d",
    "edge_ge_2d",
    "vertex_factors_3d",
    "edge_factors_3d",
    "face_ge_3d",
    "mollifier_ev",
    "mollifier_vf",
    "mollifier_ee",
]

# constant, well separated stand-ins for padded ring slots
_PAD_A = np.array([1.0, 0.0, 0.0])
_PAD_B = np.array([0.0, 1.0, 0.0])


# -- generic factor blocks -------------------------------------------------


def phi_e_2d(v, e1, e2):
    """Exterior-direction value ``(v - e1) x (v - e2)`` for unit 2D vectors.

    With ``e1`` pointing to the previous and ``e2`` to the next boundary
    vertex of a counter-clockwise boundary, the value is positive exactly when
    ``v`` points into the material.
    """
    return cross2(v - e1, v - e2)


def vertex_factors_2d(prev, y, nxt, v, alpha, beta):
    """``(g^m, g^e)`` at a 2D boundary vertex ``y`` with neighbours ``prev``/``nxt``."""
    e1 = unit(prev - y)
    e2 = unit(nxt - y)
    gm = step(dot(e1, v), alpha) * step(dot(e2, v), alpha)
    ge = step(phi_e_2d(v, e1, e2), beta)
    return gm, ge


def edge_ge_2d(a, b, v, beta):
    """``g^e`` at an interior point of the 2D boundary edge ``a -> b``."""
    d = unit(b - a)
    return step(phi_e_2d(v, -d, d), beta)


def _ring_vectors(y, ring, mask, prev_idx):
    """Edge vectors ``e_{i-1}``, ``e_i`` of every ring face, padded slots
    replaced by constants so the math stays finite."""
    xp = xp_of(y, ring)
    cur = ring - y[..., None, :]
    prv = xp.take_along_axis(cur, prev_idx[..., None], axis=-2)
    m = mask[..., None]
    prv = xp.where(m, prv, _PAD_A)
    cur = xp.where(m, cur, _PAD_B)
    return prv, cur


def vertex_factors_3d(y, ring, mask, prev_idx, v, alpha, beta):
    """``(g^m, g^e)`` at a 3D boundary vertex.

    ``ring`` is the ordered one-ring ``(..., K, 3)`` padded to ``K`` slots;
    face ``i`` is ``(y, ring[prev_idx[i]], ring[i])`` and outward oriented.
    """
    xp = xp_of(y, ring, v)
    prv, cur = _ring_vectors(y, ring, mask, prev_idx)
    t1, t2 = unit(prv), unit(cur)
    t3 = unit(t1 + t2)
    vv = v[..., None, :]
    f = step(dot(t1, vv), alpha) * step(dot(t2, vv), alpha) * step(dot(t3, vv), alpha)
    gm = xp.prod(xp.where(mask, f, 1.0), axis=-1)
    n = unit(cross3(prv, cur))
    s = xp.sum(xp.where(mask, step(-dot(n, vv), beta), 0.0), axis=-1)
    ge = step(s - 1.0, 1.0)
    return gm, ge


def _in_face_perp(a, u, o):
    w = o - a
    return unit(w - dot(w, u)[..., None] * u)


def phi_e_edge_3d(v, a, b, o1, o2):
    """Exterior-direction value at an interior point of the 3D edge ``ab``.

    ``o1`` is the opposite vertex of the face that traverses ``a -> b`` and
    ``o2`` that of the other face. Vectors are projected onto the plane
    normal to the edge before applying the 2D rule. A ``v`` parallel to the
    edge is reported as inside (+1).
    """
    xp = xp_of(v, a, b)
    u = unit(b - a)
    e1 = _in_face_perp(a, u, o1)
    e2 = _in_face_perp(a, u, o2)
    vp = v - dot(v, u)[..., None] * u
    n = safe_norm(vp, keepdims=True)
    ok = n[..., 0] > 1e-10
    vt = vp / xp.where(n > 1e-10, n, 1.0)
    phi = dot(cross3(vt - e1, vt - e2), u)
    return xp.where(ok, phi, 1.0)


def edge_factors_3d(a, b, o1, o2, v, alpha, beta):
    """``(g^m, g^e)`` at an interior point of a 3D boundary edge.

    Along-edge directions are automatically satisfied at an edge-interior
    closest point, so only the in-face perpendiculars enter ``g^m``.
    """
    u = unit(b - a)
    e1 = _in_face_perp(a, u, o1)
    e2 = _in_face_perp(a, u, o2)
    gm = step(dot(e1, v), alpha) * step(dot(e2, v), alpha)
    ge = step(phi_e_edge_3d(v, a, b, o1, o2), beta)
    return gm, ge


def face_ge_3d(f0, f1, f2, v, beta):
    """``g^e`` at an interior point of the outward triangle ``f0 f1 f2``."""
    n = unit(cross3(f1 - f0, f2 - f0))
    return step(-dot(n, v), beta)


def _seg_dist(p, a, b):
    xp = xp_of(p, a, b)
    ab = b - a
    t = xp.clip(dot(p - a, ab) / dot(ab, ab), 0.0, 1.0)
    return safe_norm(p - a - t[..., None] * ab)


def mollifier_ev(p, a, b, d, c=0.01):
    """Vanishes when the closest point on ``ab`` reaches an endpoint."""
    return mollify_hc(safe_norm(p - a) / d, c) * mollify_hc(safe_norm(p - b) / d, c)


def mollifier_vf(p, f0, f1, f2, d, c=0.01):
    """Vanishes when the closest point on the triangle reaches its boundary."""
    return (mollify_hc(_seg_dist(p, f0, f1) / d, c) * mollify_hc(_seg_dist(p, f1, f2) / d, c)
            * mollify_hc(_seg_dist(p, f2, f0) / d, c))


def mollifier_ee(a, b, c0, c1, d, c=0.01):
    """Vanishes when an endpoint is as close as the edges are, which
    includes the parallel configuration."""
    return (mollify_hc(_seg_dist(a, c0, c1) / d, c) * mollify_hc(_seg_dist(b, c0, c1) / d, c)
            * mollify_hc(_seg_dist(c0, a, b) / d, c) * mollify_hc(_seg_dist(c1, a, b) / d, c))


# -- public single-pair interface ---------------------------------------------


@dataclass
class TangentFrame:
    """Unit tangent directions at a point of a primitive, grouped by incident patch."""

    groups: list = field(default_factory=list)

    @property
    def directions(self):
        if not self.groups:
            return np.zeros((0, 0))
        return np.concatenate(self.groups)

    def __len__(self):
        return sum(len(g) for g in self.groups)


def _point_on(point, verts, tol):
    from .proximity import closest_point_edge, closest_point_triangle

    if len(verts) == 1:
        d = np.linalg.norm(point - verts[0])
    elif len(verts) == 2:
        d = closest_point_edge(point, *verts).distance
    else:
        d = closest_point_triangle(point, *verts).distance
    return d <= tol


def tangent_frame(mesh, primitive, point=None, X=None):
    """Tangent directions for a point on a boundary primitive.

    ``primitive`` is ``("vertex", i)``, ``("edge", k)`` or ``("face", f)``
    with indices into the mesh vertices, ``boundary_edges`` and
    ``boundary_faces``. A face-interior point has no constrained directions.
    """
    X = mesh.positions if X is None else np.asarray(X, dtype=float)
    kind, idx = primitive
    if kind == "vertex":
        verts = [X[idx]]
    elif kind == "edge":
        verts = list(X[mesh.boundary_edges[idx]])
    elif kind == "face":
        verts = list(X[mesh.boundary_faces[idx]])
    else:
        raise ValueError(f"unknown primitive {kind!r}")
    if point is not None and not _point_on(np.asarray(point, float), verts, 1e-9 * mesh.bbox_diagonal(X)):
        raise ValueError("point does not lie on the primitive")
    if kind == "face":
        return TangentFrame([])
    if kind == "vertex":
        y = X[idx]
        if mesh.dim == 2:
            return TangentFrame([unit(X[mesh.vertex_prev[idx]] - y)[None],
                                 unit(X[mesh.vertex_next[idx]] - y)[None]])
        ring = mesh.ring(idx)
        groups = []
        for i in range(len(ring)):
            t1, t2 = unit(X[ring[i - 1]] - y), unit(X[ring[i]] - y)
            groups.append(np.stack([t1, t2, unit(t1 + t2)]))
        return TangentFrame(groups)
    a, b = X[mesh.boundary_edges[idx]]
    d = unit(b - a)
    if mesh.dim == 2:
        return TangentFrame([np.stack([d, -d])])
    groups = []
    for o in mesh.edge_opposite[idx]:
        groups.append(np.stack([d, -d, _in_face_perp(a, d, X[o])]))
    return TangentFrame(groups)


def g_m(frame, v, alpha):
    """Product of smoothed steps ``step(t . v, alpha)`` over the frame."""
    T = frame.directions if isinstance(frame, TangentFrame) else np.asarray(frame, float)
    if T.size == 0:
        return 1.0
    return float(np.prod(step(T @ np.asarray(v, float), alpha)))


def g_e_vertex(v, normals, beta):
    """Smooth conservative exterior test at a 3D vertex from its face normals."""
    n = np.asarray(normals, float)
    s = np.sum(step(-(n @ np.asarray(v, float)), beta))
    return float(step(s - 1.0, 1.0))


def g_e_edge(v, beta, e1=None, e2=None, edge=None):
    """``step(phi_e, beta)``: 2D vertex form with unit ``e1``/``e2``, or the 3D
    edge form with ``edge=(a, b, o1, o2)``."""
    v = np.asarray(v, float)
    if edge is not None:
        a, b, o1, o2 = (np.asarray(x, float) for x in edge)
        return float(step(phi_e_edge_3d(v, a, b, o1, o2), beta))
    return float(step(phi_e_2d(v, np.asarray(e1, float), np.asarray(e2, float)), beta))


# -- exact cone test -------------------------------------------------------


def _sector_closest(v, A, B):
    """Closest points to ``v`` on the planar sectors spanned by rays ``A[i]``,
    ``B[i]``, and whether each lies in the sector interior."""
    n = np.cross(A, B)
    vn = (n @ v) / np.einsum("ij,ij->i", n, n)
    vp = v - vn[:, None] * n
    aa, bb, ab = (np.einsum("ij,ij->i", A, A), np.einsum("ij,ij->i", B, B),
                  np.einsum("ij,ij->i", A, B))
    va, vb = A @ v, B @ v
    det = aa * bb - ab * ab
    ca, cb = (bb * va - ab * vb) / det, (aa * vb - ab * va) / det
    interior = (ca > 0) & (cb > 0)
    pa = np.maximum(va / aa, 0.0)[:, None] * A
    pb = np.maximum(vb / bb, 0.0)[:, None] * B
    near_a = np.linalg.norm(v - pa, axis=1) <= np.linalg.norm(v - pb, axis=1)
    P = np.where(interior[:, None], vp, np.where(near_a[:, None], pa, pb))
    return P, interior


def _project(a, b):
    ap = a - np.dot(a, b) / np.dot(b, b) * b
    return ap / np.linalg.norm(ap)


def determine_inside_3d(v, edges, normals, _depth=0):
    """Exact test whether ``v`` points into the cone at a vertex.

    ``edges[i]`` points from the vertex to its i-th ring neighbour and
    ``normals[i]`` is the normal of the face spanned by ``edges[i-1]`` and
    ``edges[i]``, with ``(e_{i-1} x e_i) . n_i > 0``.
    """
    v = np.asarray(v, float)
    E = np.asarray(edges, float)
    N = np.asarray(normals, float)
    M = len(E)
    U = E / np.linalg.norm(E, axis=1, keepdims=True)
    if np.any(np.linalg.norm(np.cross(np.roll(U, 1, axis=0), U), axis=1) < 1e-14):
        raise ValueError("degenerate ring: repeated edge directions")
    # rays are taken much longer than v
    scale = 1e3 * np.linalg.norm(v) / np.min(np.linalg.norm(E, axis=1))
    E = E * scale
    P, interior = _sector_closest(v, np.roll(E, 1, axis=0), E)
    j = int(np.argmin(np.linalg.norm(v - P, axis=1)))
    pj = P[j]
    if np.linalg.norm(pj) <= 1e-12 * np.linalg.norm(v):
        n0 = N[0] / np.linalg.norm(N[0])
        if all(np.dot(n / np.linalg.norm(n), n0) > 1 - 1e-12 for n in N):
            return bool(-np.dot(v, n0) > 0)
        if _depth > 0:
            raise ValueError("degenerate ring: cone apex closest after tilting")
        # The apex is closest only if v . e_i <= 0 for all rays, so the whole
        # open hemisphere around v is free of the cone surface and lies on v's
        # side. Tilt v toward its nearest ray, staying in that hemisphere, to
        # a direction whose closest point is off the apex.
        c = U @ (v / np.linalg.norm(v))
        k = int(np.argmax(c))
        vn = v / np.linalg.norm(v)
        u = U[k] - c[k] * vn
        if np.linalg.norm(u) < 1e-12:
            raise ValueError("degenerate ring: all rays opposite to v")
        u /= np.linalg.norm(u)
        eta = 0.5 * (np.pi - np.arccos(np.clip(c[k], -1.0, 1.0)))
        w = np.cos(eta) * u + np.sin(eta) * vn
        return determine_inside_3d(w, edges, normals, _depth + 1)
    if interior[j]:
        return bool(-np.dot(v, N[j]) > 0)
    w = np.maximum((E @ v) / np.einsum("ij,ij->i", E, E), 0.0)
    j = int(np.argmin(np.linalg.norm(v - w[:, None] * E, axis=1)))
    e1 = _project(E[j - 1], E[j])
    e2 = _project(E[(j + 1) % M], E[j])
    vt = _project(v, E[j])
    return bool(np.dot(np.cross(vt - e1, vt - e2), E[j]) < 0)


# -- pair level ------------------------------------------------------------


@dataclass
class ContactPair:
    """A boundary primitive pair.

    ``kind`` is ``"VV"``, ``"EV"``, ``"VF"`` or ``"EE"``; ``a``/``b`` index
    the first/second primitive (EV: edge then vertex, VF: vertex then face).
    """

    kind: str
    a: int
    b: int
    result: object = None


@dataclass
class DirectionalFactor:
    gm_xy: float
    gm_yx: float
    ge_xy: float
    ge_yx: float
    M: float

    @property
    def gamma(self):
        return self.gm_xy * self.ge_xy * self.gm_yx * self.ge_yx * self.M


def _side_factors(mesh, X, prim, point, v, alpha, beta):
    """``(g^m, g^e)`` for one side with ``prim = (kind, index)``."""
    kind, idx = prim
    if mesh.dim == 2:
        if kind == "vertex":
            gm, ge = vertex_factors_2d(X[mesh.vertex_prev[idx]], X[idx], X[mesh.vertex_next[idx]], v, alpha, beta)
        else:
            a, b = X[mesh.boundary_edges[idx]]
            gm, ge = 1.0, edge_ge_2d(a, b, v, beta)
        return float(gm), float(ge)
    if kind == "vertex":
        ring = mesh.ring(idx)
        K = len(ring)
        gm, ge = vertex_factors_3d(X[idx], X[ring], np.ones(K, bool), (np.arange(K) - 1) % K, v, alpha, beta)
    elif kind == "edge":
        a, b = mesh.boundary_edges[idx]
        o1, o2 = mesh.edge_opposite[idx]
        gm, ge = edge_factors_3d(X[a], X[b], X[o1], X[o2], v, alpha, beta)
    else:
        gm, ge = 1.0, face_ge_3d(*X[mesh.boundary_faces[idx]], v, beta)
    return float(gm), float(ge)


def mollifier_M(pair, mesh, X=None, c=0.01):
    """Closest-point mollifier of a pair (1 for vertex pairs)."""
    X = mesh.positions if X is None else X
    res = pair.result
    if res.distance <= 0:
        raise ValueError("zero distance")
    E, F = mesh.boundary_edges, mesh.boundary_faces
    if pair.kind == "VV":
        return 1.0
    if pair.kind == "EV":
        a, b = X[E[pair.a]]
        return float(mollifier_ev(X[pair.b], a, b, res.distance, c))
    if pair.kind == "VF":
        return float(mollifier_vf(X[pair.a], *X[F[pair.b]], res.distance, c))
    a, b = X[E[pair.a]]
    c0, c1 = X[E[pair.b]]
    return float(mollifier_ee(a, b, c0, c1, res.distance, c))


def resolve_pair(mesh, pair, X=None):
    """Fill ``pair.result`` with the closest points at ``X``."""
    from .proximity import (closest_edge_edge, closest_point_edge,
                            closest_point_point, closest_point_triangle)

    X = mesh.positions if X is None else X
    E, F = mesh.boundary_edges, mesh.boundary_faces
    if pair.kind == "VV":
        res = closest_point_point(X[pair.a], X[pair.b])
    elif pair.kind == "EV":
        res = closest_point_edge(X[pair.b], *X[E[pair.a]])
    elif pair.kind == "VF":
        res = closest_point_triangle(X[pair.a], *X[F[pair.b]])
    elif pair.kind == "EE":
        res = closest_edge_edge(*X[E[pair.a]], *X[E[pair.b]])
    else:
        raise ValueError(f"unknown pair kind {pair.kind!r}")
    pair.result = res
    return pair


_SIDES = {"VV": ("vertex", "vertex"), "EV": ("edge", "vertex"),
          "VF": ("vertex", "face"), "EE": ("edge", "edge")}


def gamma_ps(pair, mesh, params, X=None):
    """Directional factor of a pair at positions ``X`` (default: current).

    Uses the closest-point simplification: a closest point interior to an
    edge or face drops the directions along which the distance is stationary.
    A pair whose closest point lies on a sub-primitive boundary has ``M = 0``.
    """
    X = mesh.positions if X is None else np.asarray(X, dtype=float)
    if pair.result is None:
        resolve_pair(mesh, pair, X)
    res = pair.result
    if res.distance <= 0:
        raise ValueError("zero distance")
    ka, kb = _SIDES[pair.kind]
    pa, pb = res.point_a, res.point_b
    va = (pa - pb) / res.distance
    gm_a, ge_a = _side_factors(mesh, X, (ka, pair.a), pa, va, params.alpha, params.beta)
    gm_b, ge_b = _side_factors(mesh, X, (kb, pair.b), pb, -va, params.alpha, params.beta)
    M = mollifier_M(pair, mesh, X, params.c)
    # the first primitive's side is "y" in g(x, y)
    return DirectionalFactor(gm_xy=gm_a, gm_yx=gm_b, ge_xy=ge_a, ge_yx=ge_b, M=M)
