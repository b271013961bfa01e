import numpy as np
import pytest

import oracles
from contactbarrier.elasticity import ElasticModel, lame, lumped_masses
from contactbarrier.friction import f0, f1, friction_potential, lag_friction
from contactbarrier.mesh import SurfaceMesh
from contactbarrier.params import PotentialParams
from contactbarrier.potential import evaluate
from contactbarrier.scenes import box_part, crumpled, cube_part


def _model(part, E=1e5, nu=0.3):
    mesh = SurfaceMesh.from_parts([part])
    return mesh, ElasticModel(mesh, *lame(E, nu))


def test_lame_values():
    mu, lam = lame(1e5, 0.25)
    assert mu == pytest.approx(4e4)
    assert lam == pytest.approx(4e4)
    assert lame(1.0, 0.0)[1] == 0.0


@pytest.mark.parametrize("part", [box_part(0, 1, 0, 1, 3, 3), cube_part((0, 0, 0), 1.0, 1)])
def test_rest_energy_and_stretch(part):
    mesh, model = _model(part)
    X = mesh.rest_positions
    assert model.energy(X) == pytest.approx(0.0, abs=1e-9)
    assert np.abs(model.gradient(X)).max() < 1e-8
    Y = X * np.r_[1.01, np.ones(mesh.dim - 1)]
    E, g, H = model.evaluate(Y, 2, project=False)
    assert E > 0
    h = 1e-6
    for i in range(0, Y.size, max(1, Y.size // 10)):
        Yp, Ym = Y.copy().ravel(), Y.copy().ravel()
        Yp[i] += h
        Ym[i] -= h
        fd = (model.energy(Yp.reshape(Y.shape)) - model.energy(Ym.reshape(Y.shape))) / (2 * h)
        assert fd == pytest.approx(g.ravel()[i], rel=1e-5, abs=1e-6 * np.abs(g).max())
    Hd = H.toarray()
    np.testing.assert_allclose(Hd, Hd.T, atol=1e-8 * np.abs(Hd).max())


def test_rotation_invariance(rng):
    mesh, model = _model(box_part(0, 1, 0, 1, 3, 3))
    Y = mesh.rest_positions * [1.05, 0.97]
    e0 = model.energy(Y)
    for _ in range(5):
        R = oracles.random_rotation(rng, 2)
        assert model.energy(Y @ R.T + rng.normal(size=2)) == pytest.approx(e0, rel=1e-10)


def test_inverted_element_is_infinite():
    mesh, model = _model(box_part(0, 1, 0, 1, 1, 1))
    Y = mesh.rest_positions.copy()
    Y[:, 0] *= -1
    assert model.energy(Y) == np.inf
    assert model.min_jacobian(Y) < 0


def test_lumped_masses_total():
    mesh, _ = _model(box_part(0, 2, 0, 1, 4, 2))
    assert lumped_masses(mesh, 10.0).sum() == pytest.approx(20.0)
    mesh, _ = _model(cube_part((0, 0, 0), 2.0, 2))
    assert lumped_masses(mesh, 1.0).sum() == pytest.approx(8.0)


# -- friction ----------------------------------------------------------------------


def test_friction_profile_examples():
    eh = 0.2
    assert f1(eh, eh) == 1.0
    assert f1(eh / 2, eh) == pytest.approx(0.75)
    assert f1(3 * eh, eh) == 1.0
    assert f0(0.0, eh) == 0.0
    # f0 is the antiderivative of f1 and C1 at eh
    y = np.linspace(0, 0.5, 20001)
    integral = np.concatenate([[0], np.cumsum(0.5 * (f1(y[1:], eh) + f1(y[:-1], eh)) * np.diff(y))])
    np.testing.assert_allclose(f0(y, eh), integral, atol=1e-8)


def _lagged():
    mesh = crumpled(3, n_bodies=4, n_vertices=12, spacing=0.45).mesh
    ce = evaluate(mesh, PotentialParams(eps_trg=0.15, alpha=0.8, kappa=1.0), order=1)
    return mesh, lag_friction(ce, mesh.positions)


def test_friction_zero_at_lag_point():
    mesh, lag = _lagged()
    assert lag.n_pairs > 0
    D, g, H = friction_potential(mesh.positions, lag, 0.5, 1e-3, 1e-2)
    assert D == 0.0 and not np.any(g)
    assert friction_potential(mesh.positions + 0.1, lag, 0.5, 1e-3, 1e-2)[0] == pytest.approx(0.0, abs=1e-20)


def test_friction_gradient_fd(rng):
    mesh, lag = _lagged()
    X = mesh.positions + 1e-4 * rng.normal(size=mesh.positions.shape)
    mu, ev, h = 0.5, 1e-2, 1e-2
    D, g, H = friction_potential(X, lag, mu, ev, h)
    assert D > 0
    step = 1e-8
    for i in np.flatnonzero(np.abs(g.ravel()) > 0)[:20]:
        Xp, Xm = X.copy().ravel(), X.copy().ravel()
        Xp[i] += step
        Xm[i] -= step
        fd = (friction_potential(Xp.reshape(X.shape), lag, mu, ev, h, 0)[0]
              - friction_potential(Xm.reshape(X.shape), lag, mu, ev, h, 0)[0]) / (2 * step)
        assert fd == pytest.approx(g.ravel()[i], rel=1e-5, abs=1e-8 * np.abs(g).max())
    assert np.linalg.eigvalsh(H.toarray()).min() >= -1e-10 * abs(H).max()
