"""Closest points between boundary primitives, broad phase, CCD and
intersection tests.

Scalar ``closest_*`` routines return a :class:`ClosestPointResult` with
barycentric coordinates and a region tag. The ``*_distance`` routines are
their vectorized counterparts over arrays of primitives and return only
distances (plus parameters where useful).
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ClosestPointResult",
    "CandidateSet",
    "closest_point_point",
    "closest_point_edge",
    "closest_point_triangle",
    "closest_edge_edge",
    "point_point_distance",
    "point_edge_distance",
    "point_triangle_distance",
    "edge_edge_distance",
    "broad_phase",
    "ccd_max_step",
    "intersects",
    "intersecting_pairs",
    "min_distance",
]

_PARALLEL_TOL = 1e-12


@dataclass
class ClosestPointResult:
    """Closest points of one primitive pair.

    ``region_a`` / ``region_b`` name the sub-simplex that holds each closest
    point: ``"interior"``, ``"vertex<k>"`` or ``"edge<k>"`` (edge k joins
    local vertices k and k+1).
    """

    kind: str
    point_a: np.ndarray
    point_b: np.ndarray
    bary_a: np.ndarray
    bary_b: np.ndarray
    distance: float
    region_a: str = "vertex0"
    region_b: str = "vertex0"

    @property
    def interior(self):
        """True when no closest point sits on a lower-dimensional sub-simplex
        of a non-vertex primitive."""
        regs = {"VV": (), "EV": (self.region_a,), "VF": (self.region_b,),
                "EE": (self.region_a, self.region_b)}[self.kind]
        return all(r == "interior" for r in regs)


def _pt(x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] not in (2, 3):
        raise ValueError("points must be 2D or 3D vectors")
    return x


def _check_segment(a, b):
    if np.dot(b - a, b - a) <= 0.0:
        raise ValueError("degenerate segment")


def closest_point_point(a, b):
    a, b = _pt(a), _pt(b)
    return ClosestPointResult("VV", a, b, np.ones(1), np.ones(1), float(np.linalg.norm(a - b)))


def _segment_param(p, a, b):
    ab = b - a
    t = float(np.dot(p - a, ab) / np.dot(ab, ab))
    if t <= 0.0:
        return 0.0, "vertex0"
    if t >= 1.0:
        return 1.0, "vertex1"
    return t, "interior"


def closest_point_edge(p, a, b):
    """Closest point to ``p`` on segment ``ab``; ``point_a`` lies on the edge."""
    p, a, b = _pt(p), _pt(a), _pt(b)
    _check_segment(a, b)
    t, region = _segment_param(p, a, b)
    q = a + t * (b - a)
    return ClosestPointResult("EV", q, p, np.array([1 - t, t]), np.ones(1),
                              float(np.linalg.norm(p - q)), region_a=region, region_b="vertex0")


def closest_point_triangle(p, a, b, c):
    """Closest point to ``p`` on triangle ``abc``; ``point_b`` lies on the face.

    Voronoi-region walk: vertices first, then edges, then the interior.
    """
    p, a, b, c = _pt(p), _pt(a), _pt(b), _pt(c)
    if p.shape[0] != 3:
        raise ValueError("triangles are 3D primitives")
    ab, ac, ap = b - a, c - a, p - a
    if np.linalg.norm(np.cross(ab, ac)) <= 0.0:
        raise ValueError("degenerate triangle")

    def done(w, region):
        w = np.asarray(w, dtype=float)
        q = w[0] * a + w[1] * b + w[2] * c
        return ClosestPointResult("VF", p, q, np.ones(1), w, float(np.linalg.norm(p - q)),
                                  region_a="vertex0", region_b=region)

    d1, d2 = np.dot(ab, ap), np.dot(ac, ap)
    if d1 <= 0 and d2 <= 0:
        return done([1, 0, 0], "vertex0")
    bp = p - b
    d3, d4 = np.dot(ab, bp), np.dot(ac, bp)
    if d3 >= 0 and d4 <= d3:
        return done([0, 1, 0], "vertex1")
    cp = p - c
    d5, d6 = np.dot(ab, cp), np.dot(ac, cp)
    if d6 >= 0 and d5 <= d6:
        return done([0, 0, 1], "vertex2")
    vc = d1 * d4 - d3 * d2
    if vc <= 0 and d1 >= 0 and d3 <= 0:
        v = d1 / (d1 - d3)
        return done([1 - v, v, 0], "edge0")
    vb = d5 * d2 - d1 * d6
    if vb <= 0 and d2 >= 0 and d6 <= 0:
        w = d2 / (d2 - d6)
        return done([1 - w, 0, w], "edge2")
    va = d3 * d6 - d5 * d4
    if va <= 0 and (d4 - d3) >= 0 and (d5 - d6) >= 0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return done([0, 1 - w, w], "edge1")
    denom = 1.0 / (va + vb + vc)
    v, w = vb * denom, vc * denom
    return done([1 - v - w, v, w], "interior")


def _tag(t):
    return "vertex0" if t <= 0.0 else ("vertex1" if t >= 1.0 else "interior")


def closest_edge_edge(a0, a1, b0, b1):
    """Closest points between segments ``a0a1`` and ``b0b1``.

    For parallel segments the minimizer is not unique; the midpoint of the
    overlap of their projections is used (or the nearest endpoints when the
    projections do not overlap).
    """
    a0, a1, b0, b1 = _pt(a0), _pt(a1), _pt(b0), _pt(b1)
    _check_segment(a0, a1)
    _check_segment(b0, b1)
    d1, d2, r = a1 - a0, b1 - b0, a0 - b0
    aa, ee, f = np.dot(d1, d1), np.dot(d2, d2), np.dot(d2, r)
    c, bb = np.dot(d1, r), np.dot(d1, d2)
    denom = aa * ee - bb * bb
    if denom <= _PARALLEL_TOL * aa * ee:
        # parameters of b0, b1 along segment a
        u0 = np.dot(b0 - a0, d1) / aa
        u1 = np.dot(b1 - a0, d1) / aa
        lo, hi = max(0.0, min(u0, u1)), min(1.0, max(u0, u1))
        s = 0.5 * (lo + hi) if lo <= hi else (0.0 if max(u0, u1) < 0 else 1.0)
        t = float(np.clip(np.dot(a0 + s * d1 - b0, d2) / ee, 0.0, 1.0))
        s = float(np.clip(np.dot(b0 + t * d2 - a0, d1) / aa, 0.0, 1.0)) if lo > hi else s
    else:
        s = float(np.clip((bb * f - c * ee) / denom, 0.0, 1.0))
        t = (bb * s + f) / ee
        if t < 0.0:
            t, s = 0.0, float(np.clip(-c / aa, 0.0, 1.0))
        elif t > 1.0:
            t, s = 1.0, float(np.clip((bb - c) / aa, 0.0, 1.0))
        else:
            t = float(t)
    pa, pb = a0 + s * d1, b0 + t * d2
    return ClosestPointResult("EE", pa, pb, np.array([1 - s, s]), np.array([1 - t, t]),
                              float(np.linalg.norm(pa - pb)), region_a=_tag(s), region_b=_tag(t))


# -- vectorized distances -----------------------------------------------------


def point_point_distance(P, Q):
    return np.linalg.norm(np.asarray(P) - np.asarray(Q), axis=-1)


def point_edge_distance(P, A, B):
    """Distance from points ``P`` to segments ``AB`` and the clamped parameter."""
    AB = B - A
    ll = np.einsum("...i,...i->...", AB, AB)
    t = np.einsum("...i,...i->...", P - A, AB) / np.where(ll > 0, ll, 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm(P - (A + t[..., None] * AB), axis=-1), t


def point_triangle_distance(P, A, B, C):
    """Distance from points ``P`` to triangles ``ABC`` (3D), with the
    barycentric coordinates of the plane projection and an interior flag."""
    n = np.cross(B - A, C - A)
    nn = np.einsum("...i,...i->...", n, n)
    AP = P - A
    # barycentrics of the projection
    w1 = np.einsum("...i,...i->...", np.cross(AP, C - A), n) / nn
    w2 = np.einsum("...i,...i->...", np.cross(B - A, AP), n) / nn
    w0 = 1.0 - w1 - w2
    bary = np.stack([w0, w1, w2], axis=-1)
    inside = (w0 > 0) & (w1 > 0) & (w2 > 0)
    plane = np.abs(np.einsum("...i,...i->...", AP, n)) / np.sqrt(nn)
    dE = np.minimum(np.minimum(point_edge_distance(P, A, B)[0], point_edge_distance(P, B, C)[0]),
                    point_edge_distance(P, C, A)[0])
    return np.where(inside, plane, dE), bary, inside


def edge_edge_distance(A0, A1, B0, B1):
    """Distance between segments, the unclamped line parameters and a flag
    telling whether both line-line closest points are interior (and the lines
    are not parallel)."""
    d1, d2, r = A1 - A0, B1 - B0, A0 - B0
    dot = lambda x, y: np.einsum("...i,...i->...", x, y)
    aa, ee, bb = dot(d1, d1), dot(d2, d2), dot(d1, d2)
    c, f = dot(d1, r), dot(d2, r)
    denom = aa * ee - bb * bb
    ok = denom > _PARALLEL_TOL * aa * ee
    safe = np.where(ok, denom, 1.0)
    s = (bb * f - c * ee) / safe
    t = (aa * f - bb * c) / safe
    inner = ok & (s > 0) & (s < 1) & (t > 0) & (t < 1)
    gap = np.linalg.norm(A0 + s[..., None] * d1 - B0 - t[..., None] * d2, axis=-1)
    ends = np.minimum(
        np.minimum(point_edge_distance(A0, B0, B1)[0], point_edge_distance(A1, B0, B1)[0]),
        np.minimum(point_edge_distance(B0, A0, A1)[0], point_edge_distance(B1, A0, A1)[0]),
    )
    return np.where(inner, np.minimum(gap, ends), ends), s, t, inner


# -- broad phase -------------------------------------------------------------


@dataclass
class CandidateSet:
    """Non-adjacent primitive pairs, each stored once.

    ``vv`` holds vertex pairs ``(i, j)`` with ``i < j``; ``ev`` holds
    ``(edge, vertex)``; ``vf`` holds ``(vertex, face)``; ``ee`` holds edge
    pairs ``(i, j)`` with ``i < j``. Indices refer to mesh vertices and to
    rows of ``boundary_edges`` / ``boundary_faces``.
    """

    vv: np.ndarray
    ev: np.ndarray
    vf: np.ndarray
    ee: np.ndarray

    def __len__(self):
        return len(self.vv) + len(self.ev) + len(self.vf) + len(self.ee)

    def as_set(self):
        out = set()
        for name in ("vv", "ev", "vf", "ee"):
            out.update((name, int(a), int(b)) for a, b in getattr(self, name))
        return out


_EMPTY = np.zeros((0, 2), dtype=np.int64)


def _primitive_boxes(mesh, X, X1=None):
    V = mesh.boundary_vertices
    E = mesh.boundary_edges
    F = mesh.boundary_faces if mesh.dim == 3 else np.zeros((0, 3), dtype=np.int64)
    lo, hi, verts = [], [], []
    for idx in (V[:, None], E, F):
        P = X[idx]
        if X1 is not None:
            P = np.concatenate([P, X1[idx]], axis=1)
        lo.append(P.min(axis=1))
        hi.append(P.max(axis=1))
        pad = np.full((len(idx), 3), -1, dtype=np.int64)
        pad[:, :idx.shape[1]] = idx
        verts.append(pad)
    kinds = np.concatenate([np.zeros(len(V), int), np.ones(len(E), int), np.full(len(F), 2)])
    local = np.concatenate([V, np.arange(len(E)), np.arange(len(F))])
    return np.concatenate(lo), np.concatenate(hi), np.concatenate(verts), kinds, local


def _overlapping_boxes(lo, hi, cell):
    """All index pairs ``i < j`` whose boxes overlap, via a uniform hash grid."""
    n = len(lo)
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    origin = lo.min(axis=0)
    clo = np.floor((lo - origin) / cell).astype(np.int64)
    chi = np.floor((hi - origin) / cell).astype(np.int64)
    span = chi - clo + 1
    counts = np.prod(span, axis=1)
    owner = np.repeat(np.arange(n), counts)
    # enumerate the cells of every box
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    dims = lo.shape[1]
    coords = np.empty((len(owner), dims), dtype=np.int64)
    rem = offs
    for k in range(dims):
        s = span[owner, k]
        coords[:, k] = clo[owner, k] + rem % s
        rem = rem // s
    _, key = np.unique(coords, axis=0, return_inverse=True)
    key = key.ravel()
    order = np.lexsort((owner, key))
    key, owner = key[order], owner[order]
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    sizes = np.diff(np.r_[starts, len(key)])
    pairs = []
    for size in np.unique(sizes):
        if size < 2:
            continue
        g = starts[sizes == size]
        iu, ju = np.triu_indices(size, 1)
        pairs.append(np.stack([owner[g[:, None] + iu].ravel(), owner[g[:, None] + ju].ravel()], axis=1))
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = np.unique(np.concatenate(pairs), axis=0)
    i, j = pairs[:, 0], pairs[:, 1]
    keep = np.all((lo[i] <= hi[j]) & (lo[j] <= hi[i]), axis=1)
    return pairs[keep]


def broad_phase(mesh, r, X=None, X1=None, kinds=None):
    """Candidate pairs whose distance may be at most ``r``.

    Boxes are inflated by ``r / 2`` on every side; with ``X1`` given, each box
    also covers the primitive at its second position (swept box for CCD).
    ``kinds`` restricts the pair types, default VV+EV in 2D and all four in 3D.
    """
    if not r >= 0:
        raise ValueError("search radius must be non-negative")
    X = mesh.positions if X is None else np.asarray(X, dtype=float)
    if kinds is None:
        kinds = ("vv", "ev") if mesh.dim == 2 else ("vv", "ev", "vf", "ee")
    lo, hi, verts, ptype, local = _primitive_boxes(mesh, X, X1)
    wanted = {"vv": (0, 0), "ev": (0, 1), "vf": (0, 2), "ee": (1, 1)}
    use = np.isin(ptype, sorted({t for k in kinds for t in wanted[k]}))
    sel = np.flatnonzero(use)
    lo, hi = lo[sel] - 0.5 * r, hi[sel] + 0.5 * r
    if len(mesh.boundary_edges):
        scale = np.median(mesh.edge_lengths(X))
    else:
        scale = 1.0
    cell = max(r, scale, 1e-12)
    pairs = sel[_overlapping_boxes(lo, hi, cell)]
    out = {}
    if len(pairs):
        i, j = pairs[:, 0], pairs[:, 1]
        # order so the lower-dimensional primitive comes first
        swap = ptype[i] > ptype[j]
        i, j = np.where(swap, j, i), np.where(swap, i, j)
        vi, vj = verts[i], verts[j]
        share = np.zeros(len(i), dtype=bool)
        for a in range(3):
            for b in range(3):
                share |= (vi[:, a] >= 0) & (vi[:, a] == vj[:, b])
        i, j = i[~share], j[~share]
    else:
        i = j = np.zeros(0, dtype=np.int64)
    for name, (ta, tb) in wanted.items():
        if name not in kinds:
            out[name] = _EMPTY
            continue
        m = (ptype[i] == ta) & (ptype[j] == tb)
        a, b = local[i[m]], local[j[m]]
        if ta == tb:
            a, b = np.minimum(a, b), np.maximum(a, b)
        if name == "ev":
            a, b = b, a
        p = np.stack([a, b], axis=1).astype(np.int64) if len(a) else _EMPTY
        out[name] = np.unique(p, axis=0) if len(p) else _EMPTY
    return CandidateSet(out["vv"], out["ev"], out["vf"], out["ee"])


def _pair_arrays(mesh, cand, X):
    """Vertex index tuples and distances for the CCD-relevant pair types."""
    E, F = mesh.boundary_edges, mesh.boundary_faces
    groups = []
    if mesh.dim == 2:
        if len(cand.ev):
            idx = np.stack([cand.ev[:, 1], E[cand.ev[:, 0], 0], E[cand.ev[:, 0], 1]], axis=1)
            groups.append(("pe", idx))
    else:
        if len(cand.vf):
            idx = np.concatenate([cand.vf[:, :1], F[cand.vf[:, 1]]], axis=1)
            groups.append(("pt", idx))
        if len(cand.ee):
            idx = np.concatenate([E[cand.ee[:, 0]], E[cand.ee[:, 1]]], axis=1)
            groups.append(("ee", idx))
    return groups


def _group_distance(kind, X):
    if kind == "pe":
        return point_edge_distance(X[:, 0], X[:, 1], X[:, 2])[0]
    if kind == "pt":
        return point_triangle_distance(X[:, 0], X[:, 1], X[:, 2], X[:, 3])[0]
    return edge_edge_distance(X[:, 0], X[:, 1], X[:, 2], X[:, 3])[0]


def min_distance(mesh, X=None, r=np.inf):
    """Smallest distance over non-adjacent EV (2D) or VF/EE (3D) pairs within ``r``."""
    X = mesh.positions if X is None else X
    radius = mesh.bbox_diagonal(X) if not np.isfinite(r) else r
    cand = broad_phase(mesh, radius, X, kinds=("ev",) if mesh.dim == 2 else ("vf", "ee"))
    best = np.inf
    for kind, idx in _pair_arrays(mesh, cand, X):
        if len(idx):
            best = min(best, float(_group_distance(kind, X[idx]).min()))
    return best


def ccd_max_step(mesh, x0, x1, s=0.2, max_iter=50):
    """Largest certified fraction ``t`` of the linear motion ``x0 -> x1``.

    Conservative advancement per pair: with ``l`` bounding the rate at which
    the pair distance can shrink, ``t`` advances by ``(d - g) / l`` where
    ``g = (1 - s) d0``. Every pair keeps at least ``g`` along ``[0, t]``.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if not 0.0 <= s < 1.0:
        raise ValueError("separation factor must lie in [0, 1)")
    dx = x1 - x0
    if not np.any(dx):
        return 1.0
    kinds = ("ev",) if mesh.dim == 2 else ("vf", "ee")
    cand = broad_phase(mesh, 0.0, x0, X1=x1, kinds=kinds)
    t_min = 1.0
    for kind, idx in _pair_arrays(mesh, cand, x0):
        if not len(idx):
            continue
        P0, D = x0[idx], dx[idx]
        d0 = _group_distance(kind, P0)
        if np.any(d0 <= 0):
            raise ValueError("initial configuration is intersecting")
        speed = np.linalg.norm(D, axis=2)
        split = 1 if kind in ("pe", "pt") else 2
        lp = speed[:, :split].max(axis=1) + speed[:, split:].max(axis=1)
        moving = lp > 0
        if not np.any(moving):
            continue
        P0, D, d0, lp = P0[moving], D[moving], d0[moving], lp[moving]
        g = (1.0 - s) * d0
        t = np.zeros(len(d0))
        d = d0.copy()
        active = np.ones(len(d0), dtype=bool)
        for _ in range(max_iter):
            step = (d - g) / lp
            t_new = np.where(active, t + step, t)
            done = t_new >= 1.0
            t = np.where(active & done, 1.0, t_new)
            active &= ~done
            if not np.any(active):
                break
            d = _group_distance(kind, P0 + t[:, None, None] * D)
            # stop once the advance becomes negligible
            active &= (d - g) > 1e-6 * d0
        t_min = min(t_min, float(t.min()))
    return t_min


# -- exact intersection --------------------------------------------------------


def _orient2(a, b, c):
    return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])


def _segments_intersect_2d(a, b, c, d):
    o1, o2 = _orient2(a, b, c), _orient2(a, b, d)
    o3, o4 = _orient2(c, d, a), _orient2(c, d, b)
    proper = (o1 * o2 < 0) & (o3 * o4 < 0)

    def on_seg(p, q, r, o):
        return (o == 0) & np.all((np.minimum(p, q) <= r) & (r <= np.maximum(p, q)), axis=1)

    touch = on_seg(a, b, c, o1) | on_seg(a, b, d, o2) | on_seg(c, d, a, o3) | on_seg(c, d, b, o4)
    return proper | touch


def _orient3(a, b, c, d):
    return np.einsum("ij,ij->i", b - a, np.cross(c - a, d - a))


def _segment_triangle_intersect(p, q, a, b, c):
    """Closed segment/triangle intersection; coplanar configurations fall back
    to a zero-distance check."""
    sp, sq = _orient3(a, b, c, p), _orient3(a, b, c, q)
    cross_plane = (sp * sq <= 0) & ~((sp == 0) & (sq == 0))
    o1 = _orient3(p, q, a, b)
    o2 = _orient3(p, q, b, c)
    o3 = _orient3(p, q, c, a)
    same = ((o1 >= 0) & (o2 >= 0) & (o3 >= 0)) | ((o1 <= 0) & (o2 <= 0) & (o3 <= 0))
    hit = cross_plane & same
    coplanar = (sp == 0) & (sq == 0)
    if np.any(coplanar):
        i = np.flatnonzero(coplanar)
        dist = np.minimum.reduce([
            point_triangle_distance(p[i], a[i], b[i], c[i])[0],
            point_triangle_distance(q[i], a[i], b[i], c[i])[0],
            edge_edge_distance(p[i], q[i], a[i], b[i])[0],
            edge_edge_distance(p[i], q[i], b[i], c[i])[0],
            edge_edge_distance(p[i], q[i], c[i], a[i])[0],
        ])
        hit[i] = dist == 0
    return hit


def intersecting_pairs(mesh, X=None):
    """Non-adjacent boundary edge pairs (2D) or face pairs (3D) that intersect."""
    X = mesh.positions if X is None else np.asarray(X, dtype=float)
    if mesh.dim == 2:
        cand = broad_phase(mesh, 0.0, X, kinds=("ee",))
        E = mesh.boundary_edges
        if not len(cand.ee):
            return _EMPTY
        e1, e2 = E[cand.ee[:, 0]], E[cand.ee[:, 1]]
        hit = _segments_intersect_2d(X[e1[:, 0]], X[e1[:, 1]], X[e2[:, 0]], X[e2[:, 1]])
        return cand.ee[hit]
    F = mesh.boundary_faces
    lo, hi = X[F].min(axis=1), X[F].max(axis=1)
    cell = max(float(np.median(mesh.edge_lengths(X))), 1e-12)
    pairs = _overlapping_boxes(lo, hi, cell)
    if not len(pairs):
        return _EMPTY
    fa, fb = F[pairs[:, 0]], F[pairs[:, 1]]
    share = (fa[:, :, None] == fb[:, None, :]).any(axis=(1, 2))
    pairs, fa, fb = pairs[~share], fa[~share], fb[~share]
    hit = np.zeros(len(pairs), dtype=bool)
    for S, T in ((fa, fb), (fb, fa)):
        for k in range(3):
            p, q = X[S[:, k]], X[S[:, (k + 1) % 3]]
            hit |= _segment_triangle_intersect(p, q, X[T[:, 0]], X[T[:, 1]], X[T[:, 2]])
    return pairs[hit]


def intersects(mesh, X=None):
    """Exact test whether any two non-adjacent boundary elements intersect."""
    return len(intersecting_pairs(mesh, X)) > 0
