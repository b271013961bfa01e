"""Boundary meshes, scenes and the JSON scene format.

A :class:`SurfaceMesh` holds every body of a scene in one vertex array.
Volume elements (triangles in 2D, tetrahedra in 3D) drive elasticity; their
boundary (edges in 2D, triangles in 3D) is the contact surface.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .params import PotentialParams

log = logging.getLogger(__name__)

__all__ = [
    "MeshError",
    "DegenerateElementError",
    "NonManifoldError",
    "OrientationError",
    "SceneFormatError",
    "MeshPart",
    "SurfaceMesh",
    "Material",
    "DirichletBC",
    "Scene",
    "assign_length_scales",
    "rigid_transform",
    "load_scene",
    "scene_from_dict",
    "scene_to_dict",
    "read_obj",
]


class MeshError(ValueError):
    pass


class DegenerateElementError(MeshError):
    pass


class NonManifoldError(MeshError):
    pass


class OrientationError(MeshError):
    pass


class SceneFormatError(ValueError):
    pass


@dataclass
class MeshPart:
    """One body as given in a scene file.

    ``kind`` is ``"tri"`` (2D triangulation), ``"tet"`` (3D tetrahedra) or
    ``"shell"`` (closed oriented 3D triangle surface without volume).
    """

    nodes: np.ndarray
    elements: np.ndarray
    kind: str = "tri"
    velocity: np.ndarray | None = None
    material: "Material | None" = None

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.elements = np.asarray(self.elements, dtype=np.int64).reshape(-1, _ELEM_WIDTH[self.kind])
        if self.kind not in _ELEM_WIDTH:
            raise SceneFormatError(f"unknown mesh type {self.kind!r}")


_ELEM_WIDTH = {"tri": 3, "tet": 4, "shell": 3}
_TET_FACES = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])


def _simplex_measure(X, elements):
    """Signed area (2D triangles) or signed volume (3D tets)."""
    P = X[elements]
    D = P[:, 1:] - P[:, :1]
    if D.shape[1] == 2:
        return 0.5 * (D[:, 0, 0] * D[:, 1, 1] - D[:, 0, 1] * D[:, 1, 0])
    return np.linalg.det(D) / 6.0


class SurfaceMesh:
    """All bodies of a scene plus their contact boundary.

    Attributes set on construction:

    - ``boundary_vertices``: sorted indices of surface vertices.
    - ``boundary_edges``: ``(E, 2)``. In 2D each edge is oriented so the
      material lies on its left (outward normal on the right). In 3D edges are
      stored with ascending indices and ``edge_faces[k, 0]`` is the face that
      traverses the edge in stored order.
    - ``boundary_faces``: ``(F, 3)`` outward oriented triangles (3D only).
    - ``vertex_prev`` / ``vertex_next`` (2D): neighbours along the boundary.
    - ``vertex_edges``: 2D ``(N, 2)`` incoming/outgoing edge, 3D CSR lists.
    - ``ring_ptr`` / ``ring_idx`` (3D): ordered one-ring so that consecutive
      neighbours ``u[i-1], u[i]`` span the outward face ``(v, u[i-1], u[i])``.
    - ``length_vertex`` / ``length_edge``: rest length scales (see
      :func:`assign_length_scales`).
    """

    def __init__(self, dim, rest_positions, elements=None, faces=None, body=None,
                 positions=None, element_body=None):
        self.dim = int(dim)
        if self.dim not in (2, 3):
            raise MeshError("dim must be 2 or 3")
        self.rest_positions = np.array(rest_positions, dtype=float).reshape(-1, self.dim)
        n = len(self.rest_positions)
        self.positions = (self.rest_positions.copy() if positions is None
                          else np.array(positions, dtype=float).reshape(n, self.dim))
        width = self.dim + 1
        self.elements = (np.zeros((0, width), dtype=np.int64) if elements is None
                         else np.asarray(elements, dtype=np.int64).reshape(-1, width))
        self.body = np.zeros(n, dtype=np.int64) if body is None else np.asarray(body, dtype=np.int64)
        self.element_body = (self.body[self.elements[:, 0]] if element_body is None
                             else np.asarray(element_body, dtype=np.int64))
        if len(self.elements) and (self.elements.min() < 0 or self.elements.max() >= n):
            raise MeshError("element references a missing node")
        self._scale = float(np.linalg.norm(np.ptp(self.rest_positions, axis=0))) if n else 1.0
        self._check_elements(self.rest_positions, "rest")
        self._check_elements(self.positions, "current")
        if self.dim == 2:
            if faces is not None:
                raise MeshError("2D meshes take their boundary from the triangulation")
            self._build_boundary_2d()
        else:
            self._build_boundary_3d(faces)
        self.eps_vertex = None
        self.eps_edge = None
        self.eps_face = None
        assign_length_scales(self)
        self._check_surface(self.positions, "current")
        self._check_surface(self.rest_positions, "rest")

    # -- construction -----------------------------------------------------

    @classmethod
    def from_parts(cls, parts):
        """Merge several :class:`MeshPart` bodies into one mesh."""
        parts = list(parts)
        if not parts:
            raise MeshError("a scene needs at least one mesh")
        dims = {p.nodes.shape[1] for p in parts}
        if len(dims) != 1:
            raise MeshError("all meshes must share one dimension")
        dim = dims.pop()
        nodes, elems, faces, body, ebody = [], [], [], [], []
        offset = 0
        for b, part in enumerate(parts):
            if (part.kind == "tri") != (dim == 2):
                raise MeshError(f"mesh type {part.kind!r} does not match dimension {dim}")
            nodes.append(part.nodes)
            body.append(np.full(len(part.nodes), b))
            if part.kind == "shell":
                faces.append(part.elements + offset)
            else:
                elems.append(part.elements + offset)
                ebody.append(np.full(len(part.elements), b))
                if dim == 3:
                    faces.append(None)
            offset += len(part.nodes)
        width = dim + 1
        elements = np.concatenate(elems) if elems else np.zeros((0, width), dtype=np.int64)
        element_body = np.concatenate(ebody) if ebody else np.zeros(0, dtype=np.int64)
        mesh_faces = None
        if dim == 3:
            shell = [f for f in faces if f is not None]
            mesh_faces = np.concatenate(shell) if shell else np.zeros((0, 3), dtype=np.int64)
        return cls(dim, np.concatenate(nodes), elements=elements, faces=mesh_faces,
                   body=np.concatenate(body), element_body=element_body)

    def _check_elements(self, X, which):
        if not len(self.elements):
            return
        P = X[self.elements]
        k = self.elements.shape[1]
        tol = 1e-14 * max(self._scale, 1e-300)
        for i in range(k):
            for j in range(i + 1, k):
                lengths = np.linalg.norm(P[:, i] - P[:, j], axis=1)
                if np.any(lengths <= tol):
                    bad = int(np.argmin(lengths))
                    raise DegenerateElementError(f"element {bad} has a zero-length edge ({which} positions)")
        vol = _simplex_measure(X, self.elements)
        vtol = tol ** self.dim
        if np.any(np.abs(vol) <= vtol):
            raise DegenerateElementError(f"element {int(np.argmin(np.abs(vol)))} is degenerate ({which} positions)")
        if np.any(vol < 0):
            raise OrientationError(f"element {int(np.argmin(vol))} is inverted ({which} positions)")

    def _check_surface(self, X, which):
        tol = 1e-14 * max(self._scale, 1e-300)
        e = self.boundary_edges
        if len(e) and np.any(np.linalg.norm(X[e[:, 1]] - X[e[:, 0]], axis=1) <= tol):
            raise DegenerateElementError(f"zero-length boundary edge ({which} positions)")
        if self.dim == 3 and len(self.boundary_faces):
            if np.any(self.face_areas(X) <= tol**2):
                raise DegenerateElementError(f"zero-area boundary face ({which} positions)")

    def _build_boundary_2d(self):
        n = len(self.rest_positions)
        T = self.elements
        directed = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
        key = np.sort(directed, axis=1)
        _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inv = inv.ravel()
        if np.any(counts > 2):
            raise NonManifoldError("an edge is shared by more than two triangles")
        edges = directed[counts[inv] == 1]
        edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
        self.boundary_edges = edges
        self.boundary_faces = np.zeros((0, 3), dtype=np.int64)
        out_deg = np.bincount(edges[:, 0], minlength=n)
        in_deg = np.bincount(edges[:, 1], minlength=n)
        on_boundary = (out_deg + in_deg) > 0
        if np.any(out_deg[on_boundary] != 1) or np.any(in_deg[on_boundary] != 1):
            bad = np.flatnonzero(on_boundary & ((out_deg != 1) | (in_deg != 1)))
            raise NonManifoldError(f"boundary vertices {bad.tolist()} do not have exactly two boundary edges")
        self.boundary_vertices = np.flatnonzero(on_boundary)
        self.vertex_next = np.full(n, -1, dtype=np.int64)
        self.vertex_prev = np.full(n, -1, dtype=np.int64)
        self.vertex_next[edges[:, 0]] = edges[:, 1]
        self.vertex_prev[edges[:, 1]] = edges[:, 0]
        self.vertex_edges = np.full((n, 2), -1, dtype=np.int64)
        ids = np.arange(len(edges))
        self.vertex_edges[edges[:, 1], 0] = ids
        self.vertex_edges[edges[:, 0], 1] = ids
        self.edge_faces = np.zeros((len(edges), 0), dtype=np.int64)
        for b in np.unique(self.body[self.boundary_vertices]):
            sel = self.body[edges[:, 0]] == b
            X = self.rest_positions
            P, Q = X[edges[sel, 0]], X[edges[sel, 1]]
            area = 0.5 * np.sum(P[:, 0] * Q[:, 1] - P[:, 1] * Q[:, 0])
            if area <= 0:
                raise OrientationError(f"body {b} boundary encloses non-positive area")

    def _build_boundary_3d(self, shell_faces):
        n = len(self.rest_positions)
        faces = []
        if len(self.elements):
            T = self.elements
            cand = T[:, _TET_FACES].reshape(-1, 3)
            key = np.sort(cand, axis=1)
            _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
            inv = inv.ravel()
            if np.any(counts > 2):
                raise NonManifoldError("a triangle is shared by more than two tetrahedra")
            faces.append(cand[counts[inv] == 1])
        if shell_faces is not None and len(shell_faces):
            faces.append(np.asarray(shell_faces, dtype=np.int64))
        F = np.concatenate(faces) if faces else np.zeros((0, 3), dtype=np.int64)
        self.boundary_faces = F
        directed = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
        face_of = np.tile(np.arange(len(F)), 3)
        opp = np.concatenate([F[:, 2], F[:, 0], F[:, 1]])
        key = np.sort(directed, axis=1)
        uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inv = inv.ravel()
        if np.any(counts != 2):
            raise NonManifoldError("boundary edge without exactly two incident faces")
        # both directions must occur once for a consistently oriented surface
        fwd = directed[:, 0] < directed[:, 1]
        nfwd = np.bincount(inv, weights=fwd, minlength=len(uniq))
        if np.any(nfwd != 1):
            raise OrientationError("inconsistent face orientation")
        self.boundary_edges = uniq.astype(np.int64)
        self.edge_faces = np.zeros((len(uniq), 2), dtype=np.int64)
        self.edge_opposite = np.zeros((len(uniq), 2), dtype=np.int64)
        slot = np.where(fwd, 0, 1)
        self.edge_faces[inv, slot] = face_of
        self.edge_opposite[inv, slot] = opp
        on_boundary = np.zeros(n, dtype=bool)
        on_boundary[F.ravel()] = True
        self.boundary_vertices = np.flatnonzero(on_boundary)
        # vertex -> incident edges (CSR)
        ev = np.concatenate([uniq[:, 0], uniq[:, 1]])
        eid = np.concatenate([np.arange(len(uniq))] * 2)
        order = np.argsort(ev, kind="stable")
        self.vertex_edge_ptr = np.concatenate([[0], np.cumsum(np.bincount(ev, minlength=n))])
        self.vertex_edge_idx = eid[order]
        self.vertex_edges = (self.vertex_edge_ptr, self.vertex_edge_idx)
        self._build_rings(F, n)
        for b in np.unique(self.body[self.boundary_vertices]):
            sel = self.body[F[:, 0]] == b
            X = self.rest_positions[F[sel]]
            vol = np.sum(np.einsum("ij,ij->i", X[:, 0], np.cross(X[:, 1], X[:, 2]))) / 6.0
            if vol <= 0:
                raise OrientationError(f"body {b} boundary encloses non-positive volume")

    def _build_rings(self, F, n):
        succ = {}
        for a, b, c in F:
            for v, u, w in ((a, b, c), (b, c, a), (c, a, b)):
                d = succ.setdefault(int(v), {})
                if int(u) in d:
                    raise NonManifoldError(f"vertex {v} has a repeated wedge")
                d[int(u)] = int(w)
        ptr = [0]
        idx = []
        for v in range(n):
            d = succ.get(v)
            if not d:
                ptr.append(len(idx))
                continue
            start = min(d)
            ring = [start]
            u = d[start]
            while u != start:
                ring.append(u)
                if len(ring) > len(d):
                    raise NonManifoldError(f"vertex {v} one-ring is not a single cycle")
                u = d[u]
            if len(ring) != len(d):
                raise NonManifoldError(f"vertex {v} one-ring is not a single cycle")
            idx.extend(ring)
            ptr.append(len(idx))
        self.ring_ptr = np.asarray(ptr, dtype=np.int64)
        self.ring_idx = np.asarray(idx, dtype=np.int64)

    # -- queries ----------------------------------------------------------

    @property
    def n_nodes(self):
        return len(self.rest_positions)

    @property
    def is_boundary(self):
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary_vertices] = True
        return mask

    def ring(self, v):
        return self.ring_idx[self.ring_ptr[v]:self.ring_ptr[v + 1]]

    def incident_edges(self, v):
        if self.dim == 2:
            return self.vertex_edges[v][self.vertex_edges[v] >= 0]
        ptr, idx = self.vertex_edges
        return idx[ptr[v]:ptr[v + 1]]

    def edge_lengths(self, X=None):
        X = self.positions if X is None else X
        e = self.boundary_edges
        return np.linalg.norm(X[e[:, 1]] - X[e[:, 0]], axis=1)

    def face_areas(self, X=None):
        X = self.positions if X is None else X
        F = self.boundary_faces
        if not len(F):
            return np.zeros(0)
        return 0.5 * np.linalg.norm(np.cross(X[F[:, 1]] - X[F[:, 0]], X[F[:, 2]] - X[F[:, 0]]), axis=1)

    def bbox_diagonal(self, X=None):
        X = self.rest_positions if X is None else X
        return float(np.linalg.norm(np.ptp(X, axis=0)))

    def copy(self):
        other = object.__new__(SurfaceMesh)
        other.__dict__.update(self.__dict__)
        other.positions = self.positions.copy()
        return other

    def with_positions(self, X):
        other = self.copy()
        other.positions = np.array(X, dtype=float).reshape(self.positions.shape)
        return other

    def __repr__(self):
        return (f"SurfaceMesh(dim={self.dim}, nodes={self.n_nodes}, elements={len(self.elements)}, "
                f"boundary: V={len(self.boundary_vertices)} E={len(self.boundary_edges)} "
                f"F={len(self.boundary_faces)})")


def assign_length_scales(mesh):
    """Set rest length scales: vertices get the mean length of their incident
    boundary edges, edges their own rest length. Faces carry none."""
    X = mesh.rest_positions
    e = mesh.boundary_edges
    lengths = np.linalg.norm(X[e[:, 1]] - X[e[:, 0]], axis=1)
    total = np.bincount(e.ravel(), weights=np.repeat(lengths, 2), minlength=mesh.n_nodes)
    count = np.bincount(e.ravel(), minlength=mesh.n_nodes)
    with np.errstate(invalid="ignore", divide="ignore"):
        mesh.length_vertex = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    mesh.length_edge = lengths
    return mesh


def rigid_transform(mesh, rotation, translation):
    """Return a copy whose current positions are ``R x + t``; rest is unchanged."""
    R = np.asarray(rotation, dtype=float)
    t = np.asarray(translation, dtype=float)
    d = mesh.dim
    if R.shape != (d, d) or t.shape != (d,):
        raise ValueError("rotation/translation shape does not match mesh dimension")
    if not np.allclose(R.T @ R, np.eye(d), atol=1e-10) or np.linalg.det(R) <= 0:
        raise ValueError("rotation must be orthogonal with determinant +1")
    return mesh.with_positions(mesh.positions @ R.T + t)


# -- scenes ----------------------------------------------------------------


@dataclass
class Material:
    E: float = 1e5
    nu: float = 0.3
    rho: float = 1000.0

    def __post_init__(self):
        if not self.E > 0 or not self.rho > 0 or not -1 < self.nu < 0.5:
            raise SceneFormatError(f"invalid material {self}")

    @property
    def lame(self):
        mu = self.E / (2 * (1 + self.nu))
        lam = self.E * self.nu / ((1 + self.nu) * (1 - 2 * self.nu))
        return mu, lam


@dataclass
class DirichletBC:
    nodes: np.ndarray
    motion: str = "fixed"
    velocity: np.ndarray | None = None

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=np.int64)
        if self.motion not in ("fixed", "linear"):
            raise SceneFormatError(f"unknown dirichlet motion {self.motion!r}")
        if self.motion == "linear" and self.velocity is None:
            raise SceneFormatError("linear dirichlet motion needs a velocity")
        if self.velocity is not None:
            self.velocity = np.asarray(self.velocity, dtype=float)

    def displacement(self, t, dim):
        if self.motion == "fixed":
            return np.zeros(dim)
        return self.velocity * t


@dataclass
class Scene:
    mesh: SurfaceMesh
    params: PotentialParams
    material: Material = field(default_factory=Material)
    element_materials: list | None = None
    dirichlet: list = field(default_factory=list)
    gravity: np.ndarray | None = None
    dt: float = 1e-2
    mu: float = 0.0
    eps_v: float = 1e-3
    velocities: np.ndarray | None = None
    name: str = ""
    adaptive: bool = True

    def __post_init__(self):
        d = self.mesh.dim
        self.gravity = np.zeros(d) if self.gravity is None else np.asarray(self.gravity, dtype=float)
        if self.gravity.shape != (d,):
            raise SceneFormatError("gravity has the wrong dimension")
        if not self.dt > 0:
            raise SceneFormatError("dt must be positive")
        if self.mu < 0:
            raise SceneFormatError("mu must be non-negative")
        if not self.eps_v > 0:
            raise SceneFormatError("eps_v must be positive")
        if self.velocities is None:
            self.velocities = np.zeros_like(self.mesh.rest_positions)
        for bc in self.dirichlet:
            if len(bc.nodes) and (bc.nodes.min() < 0 or bc.nodes.max() >= self.mesh.n_nodes):
                raise SceneFormatError("dirichlet node index out of range")

    @property
    def dim(self):
        return self.mesh.dim

    def lame_per_element(self):
        mats = self.element_materials or [self.material] * len(self.mesh.elements)
        mu = np.array([m.lame[0] for m in mats])
        lam = np.array([m.lame[1] for m in mats])
        rho = np.array([m.rho for m in mats])
        return mu, lam, rho

    def dirichlet_mask(self):
        mask = np.zeros(self.mesh.n_nodes, dtype=bool)
        for bc in self.dirichlet:
            mask[bc.nodes] = True
        return mask

    def dirichlet_positions(self, X0, t):
        """Prescribed positions at time ``t`` given their positions ``X0`` at t = 0."""
        X = X0.copy()
        for bc in self.dirichlet:
            X[bc.nodes] = X0[bc.nodes] + bc.displacement(t, self.dim)
        return X


def read_obj(path):
    """Read vertices and triangles from a Wavefront OBJ file."""
    V, F = [], []
    for line in Path(path).read_text().splitlines():
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "v":
            V.append([float(x) for x in tok[1:4]])
        elif tok[0] == "f":
            idx = [int(t.split("/")[0]) - 1 for t in tok[1:]]
            for k in range(1, len(idx) - 1):
                F.append([idx[0], idx[k], idx[k + 1]])
    return np.asarray(V, dtype=float), np.asarray(F, dtype=np.int64)


def _require(d, key, where):
    if key not in d:
        raise SceneFormatError(f"missing key {key!r} in {where}")
    return d[key]


def scene_from_dict(data, base_dir="."):
    """Build a :class:`Scene` from the JSON scene schema."""
    if not isinstance(data, dict):
        raise SceneFormatError("scene must be a JSON object")
    dim = int(_require(data, "dim", "scene"))
    material = Material(**{k: float(v) for k, v in data.get("material", {}).items()})
    parts = []
    velocities = []
    for i, m in enumerate(_require(data, "meshes", "scene")):
        kind = m.get("type", "tri" if dim == 2 else "tet")
        if "obj" in m:
            nodes, elems = read_obj(Path(base_dir) / m["obj"])
            kind = "shell"
        else:
            nodes = np.asarray(_require(m, "nodes", f"mesh {i}"), dtype=float)
            elems = np.asarray(_require(m, "elements", f"mesh {i}"), dtype=np.int64)
        if nodes.ndim != 2 or nodes.shape[1] != dim:
            raise SceneFormatError(f"mesh {i} nodes must have {dim} coordinates")
        mat = Material(**{k: float(v) for k, v in m["material"].items()}) if "material" in m else None
        parts.append(MeshPart(nodes, elems, kind, material=mat))
        vel = np.asarray(m.get("velocity", np.zeros(dim)), dtype=float)
        velocities.append(np.broadcast_to(vel, nodes.shape))
    mesh = SurfaceMesh.from_parts(parts)
    offsets = np.concatenate([[0], np.cumsum([len(p.nodes) for p in parts])])
    elem_mats = []
    for p in parts:
        if p.kind != "shell":
            elem_mats.extend([p.material or material] * len(p.elements))
    dirichlet = []
    for bc in data.get("dirichlet", []):
        if "mesh" in bc:
            k = int(bc["mesh"])
            local = np.asarray(bc.get("nodes", np.arange(offsets[k + 1] - offsets[k])), dtype=np.int64)
            nodes = local + offsets[k]
        else:
            nodes = np.asarray(_require(bc, "nodes", "dirichlet"), dtype=np.int64)
        dirichlet.append(DirichletBC(nodes, bc.get("motion", "fixed"), bc.get("velocity")))
    params = PotentialParams(
        eps_trg=float(_require(data, "dhat", "scene")),
        alpha=float(data.get("alpha", 0.5)),
        beta=float(data.get("beta", 0.1)),
        c=float(data.get("c", 0.01)),
        p=data.get("p"),
        kappa=float(data.get("kappa", 1e4)),
    )
    scene = Scene(
        mesh=mesh,
        params=params,
        material=material,
        element_materials=elem_mats,
        dirichlet=dirichlet,
        gravity=np.asarray(data.get("gravity", np.zeros(dim)), dtype=float),
        dt=float(data.get("dt", 1e-2)),
        mu=float(data.get("mu", 0.0)),
        eps_v=float(data.get("eps_v", 1e-3)),
        velocities=np.concatenate(velocities),
        name=str(data.get("name", "")),
        adaptive=bool(data.get("adaptive", True)),
    )
    shell_free = [b for b, p in enumerate(parts) if p.kind == "shell"]
    if shell_free:
        mask = scene.dirichlet_mask()
        for b in shell_free:
            if not mask[mesh.body == b].all():
                raise SceneFormatError(f"shell mesh {b} has no volume; all of its nodes must be dirichlet")
    return scene


def load_scene(path):
    """Parse and validate a JSON scene file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneFormatError(f"{path}: {exc}") from exc
    scene = scene_from_dict(data, base_dir=path.parent)
    if not scene.name:
        scene.name = path.stem
    log.info("loaded %s: %r", path, scene.mesh)
    return scene


def scene_to_dict(scene, parts):
    """Serialize a scene built from ``parts`` back to the JSON schema."""
    offsets = np.concatenate([[0], np.cumsum([len(p.nodes) for p in parts])])
    meshes = []
    for b, p in enumerate(parts):
        m = {"type": p.kind, "nodes": p.nodes.tolist(), "elements": p.elements.tolist()}
        v = scene.velocities[offsets[b]:offsets[b + 1]]
        if np.any(v):
            m["velocity"] = v[0].tolist()
        if p.material is not None:
            m["material"] = {"E": p.material.E, "nu": p.material.nu, "rho": p.material.rho}
        meshes.append(m)
    prm = scene.params
    out = {
        "name": scene.name,
        "dim": scene.dim,
        "meshes": meshes,
        "material": {"E": scene.material.E, "nu": scene.material.nu, "rho": scene.material.rho},
        "gravity": scene.gravity.tolist(),
        "dt": scene.dt,
        "dhat": prm.eps_trg,
        "alpha": prm.alpha,
        "beta": prm.beta,
        "c": prm.c,
        "kappa": prm.kappa,
        "mu": scene.mu,
        "eps_v": scene.eps_v,
        "adaptive": scene.adaptive,
        "dirichlet": [
            {"nodes": bc.nodes.tolist(), "motion": bc.motion,
             **({"velocity": bc.velocity.tolist()} if bc.velocity is not None else {})}
            for bc in scene.dirichlet
        ],
    }
    if prm.p is not None:
        out["p"] = int(prm.p)
    return out
