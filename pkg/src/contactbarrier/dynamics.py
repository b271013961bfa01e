"""Implicit Euler time stepping and static solves with projected Newton.

Each step minimizes the incremental potential

    1/(2 h^2) |x - x_hat|_M^2 + elastic(x) + contact(x) + friction(x)

with ``x_hat = x_t + h v_t + h^2 g``. Dirichlet nodes are eliminated; their
prescribed motion is applied in CCD-certified increments, relaxing the free
nodes in between. Every line-search trial is capped by CCD, so accepted
iterates stay intersection-free.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .elasticity import ElasticModel, elastic_energy, lumped_masses
from .friction import friction_potential, lag_friction
from .potential import GeometricContactPotential, IPCBarrierPotential
from .proximity import ccd_max_step, min_distance

log = logging.getLogger(__name__)

__all__ = ["SimState", "Simulator", "SolverError", "step", "static_solve", "elastic_energy"]


class SolverError(RuntimeError):
    pass


@dataclass
class SimState:
    positions: np.ndarray
    velocities: np.ndarray
    time: float = 0.0
    step_index: int = 0
    lag: object = None
    diagnostics: dict = field(default_factory=dict)


def make_potential(scene, kind="geometric"):
    prm = scene.params
    if kind == "geometric":
        pot = GeometricContactPotential(eps_trg=prm.eps_trg, alpha=prm.alpha, beta=prm.beta,
                                        c=prm.c, p=prm.p, kappa=prm.kappa,
                                        adaptive=scene.adaptive)
    elif kind == "ipc":
        pot = IPCBarrierPotential(dhat=prm.eps_trg, kappa=prm.kappa)
    else:
        raise ValueError(f"unknown potential {kind!r}")
    return pot.fit(scene.mesh)


class Simulator:
    """Projected-Newton solver bound to one scene.

    ``tol`` is the Newton stopping threshold on ``max|p| / h`` relative to
    the bounding-box diagonal. ``callback(x)`` runs after every accepted
    iterate.
    """

    def __init__(self, scene, potential="geometric", tol=1e-5, max_iter=200, ccd_s=0.2,
                 callback=None, project=True):
        self.scene = scene
        self.mesh = scene.mesh
        self.dim = scene.dim
        self.potential_kind = potential
        self.potential = make_potential(scene, potential) if isinstance(potential, str) else potential
        mu, lam, rho = scene.lame_per_element()
        self.elastic = ElasticModel(self.mesh, mu, lam)
        self.mass = lumped_masses(self.mesh, rho)
        self.fixed = scene.dirichlet_mask()
        self.free_dof = np.repeat(~self.fixed, self.dim)
        self.X_start = self.mesh.positions.copy()
        self.diag = self.mesh.bbox_diagonal()
        self.tol = tol
        self.max_iter = max_iter
        self.ccd_s = ccd_s
        self.callback = callback
        self.project = project
        if np.any(self.mass[~self.fixed] <= 0):
            raise SolverError("free nodes without mass; shell meshes must be fully prescribed")

    def initial_state(self):
        return SimState(self.X_start.copy(), self.scene.velocities.copy(), 0.0)

    # -- objective --------------------------------------------------------

    def objective(self, x, ctx, order=2):
        """Incremental potential and its parts at ``x``."""
        h, xhat, lag, dynamic = ctx["h"], ctx["xhat"], ctx["lag"], ctx["dynamic"]
        n, d = x.shape
        m = self.mass
        if dynamic:
            diff = x - xhat
            E_in = 0.5 / h**2 * float(np.sum(m[:, None] * diff**2))
            g_in = m[:, None] * diff / h**2
        else:
            gvec = self.scene.gravity
            E_in = -float(np.sum(m[:, None] * gvec * x))
            g_in = -m[:, None] * gvec * np.ones_like(x)
        if order == 0:
            E_el = self.elastic.energy(x)
            if not np.isfinite(E_el):
                return np.inf, None, None, {}
            E_c = self.potential.evaluate(x, 0).energy
            E_f = friction_potential(x, lag, self.scene.mu, self.scene.eps_v, h, 0)[0]
            parts = dict(inertia=E_in, elastic=E_el, contact=E_c, friction=E_f)
            return E_in + E_el + E_c + E_f, None, None, parts
        E_el, g_el, H_el = self.elastic.evaluate(x, order, self.project)
        ce = self.potential.evaluate(x, order, self.project)
        E_f, g_f, H_f = friction_potential(x, lag, self.scene.mu, self.scene.eps_v, h, order)
        E = E_in + E_el + ce.energy + E_f
        g = g_in + g_el + ce.gradient + g_f
        H = None
        if order >= 2:
            Hm = sp.diags(np.repeat(m, d) / h**2) if dynamic else sp.csr_matrix((n * d, n * d))
            H = (Hm + H_el + ce.hessian + H_f).tocsr()
        parts = dict(inertia=E_in, elastic=E_el, contact=ce.energy, friction=E_f,
                     max_contact_grad=float(np.abs(ce.gradient).max(initial=0.0)))
        return E, g, H, parts

    # -- Newton ----------------------------------------------------------

    def _solve_direction(self, H, g):
        f = self.free_dof
        Hff = H[f][:, f].tocsc()
        rhs = -g.ravel()[f]
        p = np.zeros(g.size)
        if not np.any(rhs):
            return p
        shift = 0.0
        for _ in range(8):
            A = Hff if shift == 0 else Hff + shift * sp.identity(Hff.shape[0], format="csc")
            try:
                pf = spla.spsolve(A, rhs)
            except RuntimeError:
                pf = np.full(len(rhs), np.nan)
            if np.all(np.isfinite(pf)) and np.dot(pf, rhs) > 0:
                p[f] = pf
                return p
            shift = max(shift * 100, 1e-8 * max(abs(Hff.diagonal()).max(initial=1.0), 1.0))
        p[f] = rhs
        return p

    def minimize(self, x, ctx):
        """Projected Newton from ``x``; returns ``(x, iterations, parts)``."""
        h = ctx["h"]
        x = x.copy()
        E, g, H, parts = self.objective(x, ctx, 2)
        if not np.isfinite(E):
            raise SolverError("starting point has infinite energy (inverted element)")
        it = 0
        threshold = self.tol * self.diag
        while True:
            p = self._solve_direction(H, g).reshape(x.shape)
            if np.abs(p).max(initial=0.0) / h < threshold:
                break
            if it >= self.max_iter:
                log.warning("Newton stopped after %d iterations (|p|/h = %.3e)", it, np.abs(p).max() / h)
                break
            alpha = min(1.0, ccd_max_step(self.mesh, x, x + p, s=self.ccd_s))
            accepted = False
            for _ in range(64):
                xn = x + alpha * p
                En = self.objective(xn, ctx, 0)[0]
                if np.isfinite(En) and En <= E:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                if np.abs(p).max() / h < 1e3 * threshold:
                    log.info("line search stalled near convergence; accepting current iterate")
                    break
                raise SolverError(f"line search failed after 64 halvings (|p|/h = {np.abs(p).max() / h:.3e})")
            x = xn
            it += 1
            if self.callback is not None:
                self.callback(x)
            E, g, H, parts = self.objective(x, ctx, 2)
        parts = dict(parts, total=E)
        return x, it, parts

    def _apply_dirichlet(self, x, target, ctx):
        """Move prescribed nodes toward ``target`` in certified increments."""
        iters = 0
        if not np.any(self.fixed):
            return x, iters
        for _ in range(200):
            gap = np.abs(target[self.fixed] - x[self.fixed]).max(initial=0.0)
            if gap == 0:
                return x, iters
            xd = x.copy()
            xd[self.fixed] = target[self.fixed]
            frac = min(1.0, ccd_max_step(self.mesh, x, xd, s=self.ccd_s))
            while frac > 1e-12 and self.elastic.min_jacobian(x + frac * (xd - x)) <= 0:
                frac *= 0.5
            if frac <= 1e-12:
                raise SolverError("prescribed motion cannot advance without contact or inversion")
            if frac >= 1.0:
                x = xd
            else:
                x = x + frac * (xd - x)
                x, k, _ = self.minimize(x, ctx)
                iters += k
            if self.callback is not None:
                self.callback(x)
        raise SolverError("prescribed motion did not reach its target")

    def step(self, state):
        """Advance one implicit Euler step of size ``scene.dt``."""
        h = self.scene.dt
        x = state.positions
        xhat = x + h * state.velocities + h * h * self.scene.gravity
        lag = None
        if self.scene.mu > 0:
            lag = lag_friction(self.potential.evaluate(x, 0), x)
        ctx = dict(h=h, xhat=xhat, lag=lag, dynamic=True)
        target = self.scene.dirichlet_positions(self.X_start, state.time + h)
        xs, pre = self._apply_dirichlet(x.copy(), target, ctx)
        xn, it, parts = self.minimize(xs, ctx)
        v = (xn - x) / h
        diag = self._diagnostics(xn, parts, it + pre, state.time + h)
        return SimState(xn, v, state.time + h, state.step_index + 1, lag, diag)

    def static_solve(self, state=None, t=0.0):
        """Equilibrium without inertia; Dirichlet nodes at their time-``t`` positions."""
        state = self.initial_state() if state is None else state
        ctx = dict(h=1.0, xhat=None, lag=None, dynamic=False)
        target = self.scene.dirichlet_positions(self.X_start, t)
        xs, pre = self._apply_dirichlet(state.positions.copy(), target, ctx)
        xn, it, parts = self.minimize(xs, ctx)
        diag = self._diagnostics(xn, parts, it + pre, t)
        return SimState(xn, np.zeros_like(xn), t, state.step_index, None, diag)

    def diagnose(self, state):
        """Diagnostics of ``state`` itself, without solving (zero iterations)."""
        h = self.scene.dt
        x = state.positions
        ctx = dict(h=h, xhat=x + h * state.velocities + h * h * self.scene.gravity,
                   lag=state.lag, dynamic=True)
        E, _, _, parts = self.objective(x, ctx, 1)
        return self._diagnostics(x, dict(parts, total=E), 0, state.time)

    def _diagnostics(self, x, parts, iters, t):
        free = ~self.fixed
        r = 10 * self.scene.params.eps_trg
        return dict(
            time=t,
            newton_iterations=iters,
            total_energy=parts.get("total", np.nan),
            elastic_energy=parts.get("elastic", np.nan),
            contact_energy=parts.get("contact", np.nan),
            friction_energy=parts.get("friction", np.nan),
            min_distance=min_distance(self.mesh, x, r=r),
            max_grad=parts.get("max_contact_grad", np.nan),
            min_height=float(x[free, -1].min()) if np.any(free) else float(x[:, -1].min()),
        )

    def run(self, steps, state=None):
        state = self.initial_state() if state is None else state
        out = [state]
        for _ in range(steps):
            state = self.step(state)
            out.append(state)
        return out


def step(state, scene, **kwargs):
    """One time step using a solver cached on the scene."""
    sim = getattr(scene, "_simulator", None)
    if sim is None or kwargs:
        sim = Simulator(scene, **kwargs)
        scene._simulator = sim
    return sim.step(state)


def static_solve(scene, **kwargs):
    return Simulator(scene, **kwargs).static_solve()

