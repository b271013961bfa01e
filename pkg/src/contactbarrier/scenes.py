"""Procedural scenes used by the tests, the acceptance suite and the CLI.

Every builder returns a :class:`~contactbarrier.mesh.Scene` with the
generating parts attached as ``scene.parts`` so it can be written back to
JSON with :func:`save_scene`.
"""

import json
from pathlib import Path

import numpy as np

from .mesh import DirichletBC, Material, MeshPart, Scene, SurfaceMesh, scene_to_dict
from .params import PotentialParams

__all__ = [
    "grid_part", "cube_part", "star_part", "annulus_part", "make_scene", "save_scene",
    "two_blocks", "slit_block", "compression_block", "annulus", "corner_drop",
    "refinement_pair", "crumpled", "incline", "cubes_3d", "BUILDERS",
]


def grid_part(xs, ys, keep=None, transform=None, **kw):
    """Tensor-grid triangulation of the cells of ``xs x ys``.

    ``keep(i, j)`` selects cells; unused nodes are dropped. ``transform``
    maps the ``(n, 2)`` node array (it must preserve orientation).
    """
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    nx, ny = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)
    vid = lambda i, j: i * ny + j  # noqa: E731
    tris = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            if keep is not None and not keep(i, j):
                continue
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris += [(a, b, c), (a, c, d)]
    tris = np.array(tris, dtype=np.int64)
    used = np.unique(tris)
    remap = np.full(len(nodes), -1)
    remap[used] = np.arange(len(used))
    nodes = nodes[used]
    if transform is not None:
        nodes = transform(nodes)
    return MeshPart(nodes, remap[tris], "tri", **kw)


def box_part(x0, x1, y0, y1, nx, ny, **kw):
    return grid_part(np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1), **kw)


def annulus_part(r_in, r_out, n_theta, n_r=1, **kw):
    th = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    rs = np.linspace(r_in, r_out, n_r + 1)
    nodes = np.array([(r * np.cos(t), r * np.sin(t)) for r in rs for t in th])
    tris = []
    for k in range(n_r):
        for i in range(n_theta):
            j = (i + 1) % n_theta
            a, b = k * n_theta + i, k * n_theta + j
            c, d = a + n_theta, b + n_theta
            tris += [(a, d, b), (a, c, d)]
    return MeshPart(nodes, tris, "tri", **kw)


def star_part(center, radius, n, rng, roughness=0.45, **kw):
    """Random star-shaped polygon fanned from its center."""
    th = np.sort(rng.uniform(0, 2 * np.pi, n))
    th = np.linspace(0, 2 * np.pi, n, endpoint=False) * 0.5 + th * 0.5
    r = radius * (1 - roughness * rng.uniform(0, 1, n))
    ring = np.stack([r * np.cos(th), r * np.sin(th)], axis=1) + center
    nodes = np.vstack([np.asarray(center, float)[None], ring])
    tris = [(0, 1 + i, 1 + (i + 1) % n) for i in range(n)]
    return MeshPart(nodes, tris, "tri", **kw)


# Kuhn split of the unit cube into six tets sharing the main diagonal.
_KUHN = [(0, 1, 3, 7), (0, 1, 5, 7), (0, 2, 3, 7), (0, 2, 6, 7), (0, 4, 5, 7), (0, 4, 6, 7)]


def cube_part(origin, size, n=1, **kw):
    """Axis-aligned cube of ``n^3`` cells, each split into six tets."""
    g = np.linspace(0, size, n + 1)
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1) + np.asarray(origin, float)
    vid = lambda i, j, k: (i * (n + 1) + j) * (n + 1) + k  # noqa: E731
    tets = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                corner = [vid(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)) for c in range(8)]
                for t in _KUHN:
                    tet = [corner[c] for c in t]
                    P = nodes[tet]
                    if np.linalg.det(P[1:] - P[0]) < 0:
                        tet[1], tet[2] = tet[2], tet[1]
                    tets.append(tet)
    return MeshPart(nodes, tets, "tet", **kw)


def make_scene(parts, eps_trg, name="", dirichlet=(), material=None, **kw):
    """Assemble a scene from parts; remaining keywords go to :class:`Scene`
    except ``alpha``/``beta``/``c``/``p``/``kappa`` which set the potential."""
    pkeys = {k: kw.pop(k) for k in ("alpha", "beta", "c", "p", "kappa") if k in kw}
    mesh = SurfaceMesh.from_parts(parts)
    offsets = np.concatenate([[0], np.cumsum([len(p.nodes) for p in parts])])
    vel = np.concatenate([
        np.broadcast_to(np.zeros(p.nodes.shape[1]) if p.velocity is None else p.velocity, p.nodes.shape)
        for p in parts])
    material = material or Material()
    elem_mats = []
    for p in parts:
        if p.kind != "shell":
            elem_mats += [p.material or material] * len(p.elements)
    bcs = []
    for bc in dirichlet:
        if isinstance(bc, DirichletBC):
            bcs.append(bc)
        else:  # (body, local nodes or None, velocity or None)
            b, nodes, v = bc
            idx = np.arange(offsets[b], offsets[b + 1]) if nodes is None else np.asarray(nodes) + offsets[b]
            bcs.append(DirichletBC(idx, "fixed" if v is None else "linear", v))
    scene = Scene(mesh=mesh, params=PotentialParams(eps_trg=eps_trg, **pkeys), material=material,
                  element_materials=elem_mats, dirichlet=bcs, velocities=vel, name=name, **kw)
    scene.parts = parts
    scene.offsets = offsets
    return scene


def save_scene(scene, path):
    path = Path(path)
    path.write_text(json.dumps(scene_to_dict(scene, scene.parts), indent=1))
    return path


def body_nodes(scene, b):
    return np.arange(scene.offsets[b], scene.offsets[b + 1])


# -- acceptance scenes -----------------------------------------------------


def two_blocks(gap=0.004, eps_trg=0.01, n=6, offset=0.13):
    """A block resting a gap below ``eps_trg`` above a fixed block."""
    low = box_part(0, 1, -0.5, 0, n, n // 2)
    high = box_part(offset, offset + 0.8, gap, gap + 0.4, n, n // 2)
    return make_scene([low, high], eps_trg, "two_blocks", dirichlet=[(0, None, None)])


def slit_block(width=0.004, eps_trg=0.01, n=8):
    """One block cut by a vertical slit narrower than ``eps_trg``.

    The slit is a removed column of cells, so its walls face each other at
    distance ``width``.
    """
    half = 0.5 - width / 2
    xs = np.concatenate([np.linspace(0, half, n // 2 + 1), np.linspace(half + width, 1, n // 2 + 1)])
    ys = np.linspace(0, 1, n + 1)
    slit_col = n // 2
    depth = n // 2
    keep = lambda i, j: not (i == slit_col and j >= n - depth)  # noqa: E731
    part = grid_part(xs, ys, keep=keep)
    bottom = np.flatnonzero(part.nodes[:, 1] == 0)
    return make_scene([part], eps_trg, "slit_block", dirichlet=[(0, bottom, None)])


def compression_block(n=4, eps_trg=0.15, squeeze=0.67, E=1e5):
    """Unit block with ``nu = 0``; the top row moves down by ``squeeze``
    over unit time while the bottom row is fixed."""
    part = box_part(0, 1, 0, 1, n, n)
    y = part.nodes[:, 1]
    bottom, top = np.flatnonzero(y == 0), np.flatnonzero(y == 1)
    return make_scene([part], eps_trg, "compression", material=Material(E=E, nu=0.0),
                      dirichlet=[(0, bottom, None), (0, top, [0.0, -squeeze])])


def annulus(r_in=0.9, r_out=1.0, r_final=0.98, n_theta=48, eps_trg=0.05, E=1e5):
    """Two-layer ring whose inner wall is pushed radially out to ``r_final``
    over unit time while the outer wall is fixed, thinning the wall below
    ``eps_trg``. The middle layer of nodes is free."""
    part = annulus_part(r_in, r_out, n_theta, n_r=2)
    inner = np.arange(n_theta)
    outer = np.arange(2 * n_theta, 3 * n_theta)
    bcs = [DirichletBC(outer)]
    for i in inner:
        u = part.nodes[i] / np.linalg.norm(part.nodes[i])
        bcs.append(DirichletBC([i], "linear", (r_final - r_in) * u))
    scene = make_scene([part], eps_trg, "annulus", material=Material(E=E, nu=0.3), dirichlet=bcs)
    scene.inner, scene.outer = inner, outer
    return scene


def corner_drop(level=0, side=1.0, height=0.03, speed=1.0, eps_trg=0.005, dt=2e-3,
                E=1e9, kappa=1e6):
    """A square rotated 45 degrees falling corner-first onto a fixed slab.

    ``level`` refines the cells next to the lower corner uniformly by
    ``2**level``; the rest of the mesh is identical across levels.
    """
    m = 2 ** level
    base = np.linspace(0, side, 5)
    fine = np.linspace(0, base[1], 2 * m + 1)
    xs = np.concatenate([fine, base[2:]])
    c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
    R = np.array([[c, -s], [s, c]])
    tip = height
    sq = grid_part(xs, xs, transform=lambda P: P @ R.T + np.array([0.0, tip]),
                   velocity=np.array([0.0, -speed]))
    ground = box_part(-0.6, 0.6, -0.2, 0.0, 48, 4)
    scene = make_scene([ground, sq], eps_trg, f"corner_drop_{level}", dirichlet=[(0, None, None)],
                       material=Material(E=E, nu=0.3, rho=1000), gravity=np.array([0, -9.81]),
                       dt=dt, kappa=kappa)
    scene.tip = int(scene.offsets[1])  # node 0 of the square is the corner
    return scene


def refinement_pair(level=0, gap=0.05, eps_trg=0.1, shift=0.3):
    """Two flat blocks a fixed ``gap`` apart with ``4 * 2**level`` edges per
    side; contact is evaluated, not simulated."""
    n = 4 * 2 ** level
    low = box_part(0, 1, -0.5, 0, n, n // 2)
    high = box_part(shift, shift + 1, gap, gap + 0.5, n, n // 2)
    return make_scene([low, high], eps_trg, f"refine_{level}", adaptive=False)


def crumpled(seed=0, n_bodies=9, n_vertices=24, spacing=0.5, clearance=0.01):
    """Random star polygons on a grid, each inside its own disk of radius
    ``spacing / 2 - clearance``, so bodies never overlap but many spikes
    come close."""
    rng = np.random.default_rng(seed)
    k = int(np.ceil(np.sqrt(n_bodies)))
    radius = spacing / 2 - clearance
    parts = [star_part(np.array([b % k, b // k]) * spacing, radius, n_vertices, rng)
             for b in range(n_bodies)]
    return make_scene(parts, 0.05, f"crumpled_{seed}", adaptive=False)


def incline(theta=np.deg2rad(20), mu=None, gap=5e-4, eps_trg=1e-3, dt=1e-2, eps_v=1e-5,
            E=1e8, kappa=1e-2):
    """A block on a fixed slab with gravity tilted by ``theta``.

    Tilting gravity is equivalent to tilting the slab; the slide direction
    is ``+x``. ``mu`` defaults to ``1.2 tan(theta)``.
    """
    mu = 1.2 * np.tan(theta) if mu is None else mu
    ground = box_part(-1, 2, -0.2, 0, 12, 2)
    block = box_part(0, 0.4, gap, gap + 0.2, 4, 2)
    g = 9.81 * np.array([np.sin(theta), -np.cos(theta)])
    scene = make_scene([ground, block], eps_trg, "incline", dirichlet=[(0, None, None)],
                       material=Material(E=E, nu=0.3), gravity=g, dt=dt, mu=mu, eps_v=eps_v,
                       kappa=kappa, adaptive=False)
    scene.theta = theta
    return scene


def cubes_3d(gap=0.02, eps_trg=0.05, n=1, shift=(0.2, 0.1)):
    """Two tet cubes, the upper one shifted and hovering ``gap`` above."""
    low = cube_part((0, 0, 0), 1.0, n)
    high = cube_part((shift[0], shift[1], 1 + gap), 0.8, n)
    return make_scene([low, high], eps_trg, "cubes_3d", dirichlet=[(0, None, None)])


BUILDERS = {
    "two_blocks": two_blocks,
    "slit_block": slit_block,
    "compression": compression_block,
    "annulus": annulus,
    "corner_drop": corner_drop,
    "refinement_pair": refinement_pair,
    "crumpled": crumpled,
    "incline": incline,
    "cubes_3d": cubes_3d,
}
