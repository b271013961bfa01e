import numpy as np
import pytest
from sklearn.base import clone

import oracles
from contactbarrier.mesh import SurfaceMesh, rigid_transform
from contactbarrier.params import PotentialParams
from contactbarrier.potential import (ContactError, GeometricContactPotential, IPCBarrierPotential,
                                      adapt_epsilon, collect_terms, evaluate, ipc_barrier)
from contactbarrier.scenes import box_part, crumpled, cubes_3d, two_blocks

DENSE = PotentialParams(eps_trg=0.15, alpha=0.8, kappa=1.0)


def _crumpled(seed=3):
    return crumpled(seed, n_bodies=4, n_vertices=12, spacing=0.45).mesh


def _diag_squares(d, eps=0.1, kappa=2.0):
    """Unit squares touching corner to corner at distance ``d``."""
    g = d / np.sqrt(2)
    mesh = SurfaceMesh.from_parts([box_part(0, 1, 0, 1, 1, 1), box_part(1 + g, 2 + g, 1 + g, 2 + g, 1, 1)])
    return mesh, PotentialParams(eps_trg=eps, kappa=kappa)


def _active_dofs(res, dim):
    idx = np.unique(np.concatenate([np.ravel(i) for i in res.info["idx"]] + [np.zeros(0, int)]))
    idx = idx[idx < len(res.gradient)]
    return (idx[:, None] * dim + np.arange(dim)).ravel()


def _fd_gradient(f, X, dofs, h):
    g = np.zeros(len(dofs))
    for k, i in enumerate(dofs):
        Xp, Xm = X.copy().ravel(), X.copy().ravel()
        Xp[i] += h
        Xm[i] -= h
        g[k] = (f(Xp.reshape(X.shape)) - f(Xm.reshape(X.shape))) / (2 * h)
    return g


def test_gradient_matches_fd_2d():
    mesh = _crumpled()
    X = mesh.positions
    res = evaluate(mesh, DENSE, X, order=1)
    assert res.n_terms > 5 and res.energy > 0
    dofs = _active_dofs(res, 2)
    fd = _fd_gradient(lambda Y: evaluate(mesh, DENSE, Y).energy, X, dofs, 1e-6)
    g = res.gradient.ravel()[dofs]
    assert np.max(np.abs(g - fd)) <= 1e-5 * max(np.abs(g).max(), 1.0)


def test_hessian_matches_fd_2d():
    mesh = _crumpled()
    X = mesh.positions
    res = evaluate(mesh, DENSE, X, order=2)
    H = res.hessian.toarray()
    np.testing.assert_allclose(H, H.T, atol=1e-9 * np.abs(H).max())
    dofs = _active_dofs(res, 2)
    h = 1e-6
    scale = np.abs(H).max()
    for i in dofs[:: max(1, len(dofs) // 12)]:
        Xp, Xm = X.copy().ravel(), X.copy().ravel()
        Xp[i] += h
        Xm[i] -= h
        col = (evaluate(mesh, DENSE, Xp.reshape(X.shape), 1).gradient.ravel()
               - evaluate(mesh, DENSE, Xm.reshape(X.shape), 1).gradient.ravel()) / (2 * h)
        assert np.max(np.abs(col - H[:, i])) <= 1e-3 * scale


def test_projected_hessian_is_psd():
    mesh = _crumpled()
    H = evaluate(mesh, DENSE, order=2, project=True).hessian.toarray()
    assert np.linalg.eigvalsh(H).min() >= -1e-8 * np.abs(H).max()


def test_gradient_matches_fd_3d():
    scene = cubes_3d(gap=0.02, eps_trg=0.05)
    mesh = scene.mesh
    X = mesh.positions.copy()
    X[mesh.body == 1] += [0.0, 0.0, -0.005]
    X[mesh.body == 1, :2] += 0.003 * X[mesh.body == 1, :2] ** 2
    params = PotentialParams(eps_trg=0.05, kappa=1.0)
    res = evaluate(mesh, params, X, order=1)
    assert res.energy > 0
    dofs = _active_dofs(res, 3)
    fd = _fd_gradient(lambda Y: evaluate(mesh, params, Y).energy, X, dofs, 1e-7)
    g = res.gradient.ravel()[dofs]
    assert np.max(np.abs(g - fd)) <= 1e-5 * max(np.abs(g).max(), 1.0)


def test_gradient_sums_to_zero():
    mesh = _crumpled()
    g = evaluate(mesh, DENSE, order=1).gradient
    assert np.abs(g.sum(axis=0)).max() <= 1e-10 * np.abs(g).max()


def test_localized_outside_eps():
    mesh = _crumpled()
    from contactbarrier.proximity import min_distance

    d = min_distance(mesh, mesh.positions, r=1.0)
    res = evaluate(mesh, PotentialParams(eps_trg=0.99 * d), order=1)
    assert res.energy == 0.0
    assert not np.any(res.gradient)


def test_vertex_vertex_hand_value():
    eps, kappa = 0.1, 2.0
    mesh, params = _diag_squares(eps / 2, eps, kappa)
    res = evaluate(mesh, params)
    # h_eps(eps / 2) = 1.5 * B3(1) = 1/4; unit length scales; gamma = 1
    assert res.energy == pytest.approx(kappa * 0.25 / (eps / 2), rel=1e-12)
    terms = collect_terms(mesh, params)
    assert [t.kind for t in terms] == ["VV"]
    assert terms[0].factor.gamma == 1.0


def test_force_magnitude_matches_fd():
    eps, kappa, d = 0.1, 2.0, 0.03
    _, params = _diag_squares(d, eps, kappa)
    E = lambda s: evaluate(_diag_squares(s, eps, kappa)[0], params).energy  # noqa: E731
    lam = collect_terms(_diag_squares(d, eps, kappa)[0], params)[0].force
    h = 1e-6
    assert lam == pytest.approx(abs(E(d + h) - E(d - h)) / (2 * h), rel=1e-6)


def test_rigid_invariance(rng):
    mesh = _crumpled()
    e0 = evaluate(mesh, DENSE).energy
    for _ in range(5):
        moved = rigid_transform(mesh, oracles.random_rotation(rng, 2), rng.normal(size=2) * 10)
        assert evaluate(moved, DENSE).energy == pytest.approx(e0, rel=1e-10)


def test_zero_distance_raises():
    mesh, params = _diag_squares(0.05)
    X = mesh.positions.copy()
    X[4] = X[2]
    with pytest.raises(ContactError):
        evaluate(mesh, params, X)


# -- localization radii ------------------------------------------------------


def test_adapt_epsilon_two_blocks():
    scene = two_blocks(gap=0.004, eps_trg=0.01)
    mesh = scene.mesh
    ev, ee, _ = adapt_epsilon(mesh, scene.params)
    assert ev.min() == pytest.approx(0.002, rel=1e-9)
    top = mesh.positions[:, 1] > 0.3
    assert np.all(ev[top] == 0.01)
    E = mesh.boundary_edges
    np.testing.assert_array_equal(ee, np.minimum(ev[E[:, 0]], ev[E[:, 1]]))


def test_adapt_epsilon_isolated_body():
    mesh = SurfaceMesh.from_parts([box_part(0, 1, 0, 1, 4, 4)])
    ev, ee, _ = adapt_epsilon(mesh, PotentialParams(eps_trg=0.05))
    assert np.all(ev == 0.05) and np.all(ee == 0.05)


def test_rest_state_is_silent():
    for mesh in (_crumpled(), two_blocks().mesh, cubes_3d(gap=0.01).mesh):
        pot = GeometricContactPotential(eps_trg=0.15, alpha=0.8).fit(mesh)
        assert pot.energy() == 0.0
        assert pot.terms() == []


# -- baseline and estimator API --------------------------------------------------


def test_ipc_barrier_examples():
    assert ipc_barrier(0.1, 0.1) == 0.0
    assert ipc_barrier(0.2, 0.1) == 0.0
    assert ipc_barrier(0.05, 0.1) == pytest.approx(0.05**2 * np.log(2))
    with pytest.raises(ValueError):
        ipc_barrier(0.05, 0.0)


def test_ipc_potential_ignores_direction():
    scene = two_blocks()
    ipc = IPCBarrierPotential(dhat=0.01).fit(scene.mesh)
    assert ipc.energy() > 0
    geo = GeometricContactPotential(eps_trg=0.01).fit(scene.mesh)
    assert geo.energy() == 0.0
    with pytest.raises(ValueError):
        IPCBarrierPotential(dhat=-1).fit(scene.mesh)


def test_estimator_api():
    pot = GeometricContactPotential(eps_trg=0.2, kappa=5.0)
    params = pot.get_params()
    assert params["eps_trg"] == 0.2 and params["kappa"] == 5.0
    other = clone(pot).set_params(alpha=0.3)
    assert other.alpha == 0.3 and pot.alpha == 0.5
    with pytest.raises(RuntimeError):
        pot.energy()
    assert clone(IPCBarrierPotential(dhat=0.3)).dhat == 0.3
    with pytest.raises(ValueError):
        GeometricContactPotential(eps_trg=-1).fit(_crumpled())
