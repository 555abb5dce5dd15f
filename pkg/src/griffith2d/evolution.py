"""Time-incremental quasistatic evolution.

Each step of the scheme alternates the elastic solve (displacement at fixed
damage) with the damage subproblem (lower-bounded by the previous step's
damage) until the damage update stalls.  The result competes against the
shifted previous state u_prev + (g_next - g_prev): whichever has lower total
energy is kept.  That fallback makes the discrete step inequality

    total(k) <= elastic(shifted_k) + surface(k-1)

a property of the implementation rather than a hope about the alternate
minimization, which only finds critical points.

The external-work ledger accumulates the trapezoid rule on
s -> <sigma(s), e(g_dot(s))> over grid nodes, with sigma the degraded stress
deg(alpha) C e(u) (the energetically consistent stress of the surrogate; the
sharp-interface model uses the undamaged stress off the crack) and g_dot the
pointwise slope of the piecewise-linear load amplitude.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as kernels
from .elasticity import StiffnessAssembler, solve_elastic, sym_gradient, to_mandel
from .errors import SolverDiverged
from .mesh import dirichlet_set
from .phasefield import (
    DamageOperator,
    damage_subproblem,
    degradation,
    element_means,
    elastic_energy,
    surface_energy,
)


def _mode_uniaxial(mesh):
    x = mesh.vertices[:, 0]
    return np.stack((x, np.zeros_like(x)), axis=1)


def _mode_shear(mesh):
    x = mesh.vertices[:, 0]
    return np.stack((np.zeros_like(x), x), axis=1)


def _mode_surfing(mesh):
    # opening ramp centered at the x midline: the two clamped sides move
    # vertically against each other, the shear concentrates near x = cx and
    # drives a straight vertical tear there; the padding strips sit in the
    # saturated tails of the tanh and stay (almost) rigid
    x = mesh.vertices[:, 0]
    cx = 0.5 * (x.min() + x.max())
    w = x.max() - x.min()
    prof = np.tanh((x - cx) / (0.05 * w))
    return np.stack((np.zeros_like(x), prof), axis=1)


MODES = {
    "uniaxial-stretch": _mode_uniaxial,
    "shear": _mode_shear,
    "surfing": _mode_surfing,
}


@dataclass(frozen=True)
class LoadProgram:
    """Separable boundary load g(t, x) = amplitude(t) * g1(x).

    mode: a name from MODES or an explicit (nv, 2) nodal field.
    times/amplitudes: piecewise-linear samples of the amplitude on [0, T].
    """

    mode: object
    times: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        a = np.asarray(self.amplitudes, dtype=float)
        if t.ndim != 1 or t.shape != a.shape or len(t) < 2:
            raise ValueError("need matching 1d sample arrays with >= 2 entries")
        if not (np.diff(t) > 0).all():
            raise ValueError("amplitude sample times must be strictly increasing")
        if t[0] != 0.0:
            raise ValueError("amplitude samples must start at t = 0")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "amplitudes", a)

    @property
    def T(self):
        return float(self.times[-1])

    def mode_field(self, mesh):
        if isinstance(self.mode, str):
            try:
                return MODES[self.mode](mesh)
            except KeyError:
                raise ValueError(
                    f"unknown load mode {self.mode!r}; known: {sorted(MODES)}"
                ) from None
        g1 = np.asarray(self.mode, dtype=float)
        if g1.shape != (mesh.num_vertices, 2):
            raise ValueError(
                f"mode field shaped {g1.shape}, expected {(mesh.num_vertices, 2)}"
            )
        return g1

    def amplitude_at(self, t):
        return float(np.interp(t, self.times, self.amplitudes))

    def slope_at(self, t, rtol=1e-12):
        """Pointwise derivative of the piecewise-linear amplitude.

        At a sample breakpoint the left/right slopes are averaged; strictly
        inside a segment the segment slope is returned.
        """
        t = float(t)
        ts = self.times
        slopes = np.diff(self.amplitudes) / np.diff(ts)
        tol = rtol * max(1.0, self.T)
        i = int(np.searchsorted(ts, t + tol)) - 1
        i = min(max(i, 0), len(slopes) - 1)
        hit = abs(t - ts[i]) <= tol or abs(t - ts[i + 1]) <= tol
        if hit:
            j = i if abs(t - ts[i]) <= tol else i + 1
            if 0 < j < len(slopes):
                return 0.5 * float(slopes[j - 1] + slopes[j])
            return float(slopes[min(j, len(slopes) - 1)])
        return float(slopes[i])


@dataclass(frozen=True)
class TimeGrid:
    nodes: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.nodes, dtype=float)
        if n.ndim != 1 or len(n) < 2 or not (np.diff(n) > 0).all():
            raise ValueError("grid nodes must be strictly increasing, >= 2 of them")
        object.__setattr__(self, "nodes", n)

    @property
    def max_step(self):
        return float(np.diff(self.nodes).max())


def nested_grids(T, n0, levels):
    """Dyadically refined uniform grids; each node set contains the previous."""
    if n0 < 1 or levels < 1:
        raise ValueError(f"need n0 >= 1 and levels >= 1, got ({n0}, {levels})")
    return [TimeGrid(np.linspace(0.0, T, n0 * 2**k + 1)) for k in range(levels)]


@dataclass
class State:
    u: np.ndarray
    alpha: np.ndarray
    t: float


@dataclass
class EnergyRecord:
    t: float
    elastic: float
    surface: float
    total: float
    work_cum: float
    balance_residual: float
    am_iters: int
    fallback_used: bool


@dataclass(frozen=True)
class EvolutionParams:
    phase: object
    tol_elastic: float = 1e-10
    tol_damage: float = 1e-8
    tol_am: float = 1e-5
    am_cap: int = 200
    damage_it_cap: int = 5000


class _Driver:
    """Owns the per-run caches: assembler, Dirichlet set, load mode strains."""

    def __init__(self, mesh, C, params, g1):
        self.mesh = mesh
        self.C = C
        self.params = params
        self.dirichlet = dirichlet_set(mesh)
        self.assembler = StiffnessAssembler(mesh, C)
        self.damage_op = DamageOperator(mesh, params.phase)
        self.g1 = g1
        self.mode_strain = to_mandel(sym_gradient(mesh, g1))
        self.areas = mesh.areas()

    def solve_u(self, alpha, g_field, x0=None):
        deg = degradation(element_means(self.mesh, alpha), self.params.phase.eta)
        K = self.assembler.assemble(deg)
        return solve_elastic(
            K, self.dirichlet, g_field, tol=self.params.tol_elastic, x0=x0
        )

    def alternate_minimization(self, alpha_lower, g_field, u_warm=None):
        """Elastic/damage half-steps until the damage update stalls.

        Ends with an extra elastic solve so the returned displacement is in
        equilibrium for the returned damage field.
        """
        p = self.params
        alpha = alpha_lower.copy()
        u = u_warm
        iters = 0
        for _ in range(p.am_cap):
            u = self.solve_u(alpha, g_field, x0=u)
            alpha_new = damage_subproblem(
                self.mesh,
                self.C,
                u,
                alpha_lower,
                p.phase,
                tol=p.tol_damage,
                it_cap=p.damage_it_cap,
                operator=self.damage_op,
            )
            iters += 1
            delta = float(np.abs(alpha_new - alpha).max())
            alpha = alpha_new
            if delta <= p.tol_am:
                break
        u = self.solve_u(alpha, g_field, x0=u)
        return u, alpha, iters

    def energies(self, u, alpha):
        e = elastic_energy(self.mesh, self.C, u, alpha, self.params.phase)
        s = surface_energy(self.mesh, alpha, self.params.phase)
        return e, s

    def power(self, u, alpha, slope):
        """<sigma, e(g_dot)> with the degraded stress and g_dot = slope * g1."""
        strain = to_mandel(sym_gradient(self.mesh, u))
        stress = strain @ self.C.voigt
        deg = degradation(element_means(self.mesh, alpha), self.params.phase.eta)
        return slope * float(
            np.sum(self.areas * deg * np.einsum("ti,ti->t", stress, self.mode_strain))
        )


def step(mesh, C, state, g_prev, g_next, params, t_next=None):
    """One incremental minimization step.

    g_prev/g_next are full nodal lift fields at the previous and new time.
    Returns the new state and a record whose cumulative-work fields are
    zeroed; ``run`` owns the ledger.
    """
    driver = _Driver(mesh, C, params, np.zeros_like(state.u))
    return _advance(driver, state, g_prev, g_next, t_next)


def _advance(driver, state, g_prev, g_next, t_next):
    shift = g_next - g_prev
    u_c, alpha_c, iters = driver.alternate_minimization(
        state.alpha, g_next, u_warm=state.u + shift
    )
    ec, sc = driver.energies(u_c, alpha_c)

    u_s = state.u + shift
    es, ss = driver.energies(u_s, state.alpha)

    if es + ss < ec + sc:
        new = State(u=u_s, alpha=state.alpha.copy(), t=t_next)
        elastic, surface, fallback = es, ss, True
    else:
        new = State(u=u_c, alpha=alpha_c, t=t_next)
        elastic, surface, fallback = ec, sc, False
    rec = EnergyRecord(
        t=new.t if t_next is not None else state.t,
        elastic=elastic,
        surface=surface,
        total=elastic + surface,
        work_cum=0.0,
        balance_residual=0.0,
        am_iters=iters,
        fallback_used=fallback,
    )
    return new, rec


def run(mesh, C, program, grid, params):
    """Evolve over the grid; returns (states, records).

    The initial state is the elastic minimizer at t0 for alpha = 0 followed
    by one damage solve.  Damage monotonicity at every vertex is checked on
    every step.  On solver failure the partial trajectory is attached to the
    raised exception as ``.states`` / ``.records``.
    """
    g1 = program.mode_field(mesh)
    if mesh.xs is not None:
        params.phase.warn_if_coarse(min(np.diff(mesh.xs).min(), np.diff(mesh.ys).min()))
    driver = _Driver(mesh, C, params, g1)
    nodes = grid.nodes
    amps = np.array([program.amplitude_at(t) for t in nodes])
    slopes = np.array([program.slope_at(t) for t in nodes])

    states = []
    records = []
    try:
        alpha0 = np.zeros(mesh.num_vertices)
        u0 = driver.solve_u(alpha0, amps[0] * g1)
        alpha0 = damage_subproblem(
            mesh,
            C,
            u0,
            np.zeros(mesh.num_vertices),
            params.phase,
            tol=params.tol_damage,
            it_cap=params.damage_it_cap,
            operator=driver.damage_op,
        )
        state = State(u=u0, alpha=alpha0, t=float(nodes[0]))
        e0, s0 = driver.energies(u0, alpha0)
        total0 = e0 + s0
        states.append(state)
        records.append(
            EnergyRecord(
                t=state.t,
                elastic=e0,
                surface=s0,
                total=total0,
                work_cum=0.0,
                balance_residual=0.0,
                am_iters=0,
                fallback_used=False,
            )
        )
        power_prev = driver.power(u0, alpha0, slopes[0])
        work = 0.0
        for k in range(1, len(nodes)):
            new, rec = _advance(
                driver, state, amps[k - 1] * g1, amps[k] * g1, float(nodes[k])
            )
            if not (new.alpha >= state.alpha).all():
                raise RuntimeError(
                    f"irreversibility violated at t = {nodes[k]:g}"
                )
            power_k = driver.power(new.u, new.alpha, slopes[k])
            work += 0.5 * (power_prev + power_k) * (nodes[k] - nodes[k - 1])
            power_prev = power_k
            rec = replace(
                rec, work_cum=work, balance_residual=rec.total - total0 - work
            )
            states.append(new)
            records.append(rec)
            state = new
    except SolverDiverged as exc:
        exc.states = states
        exc.records = records
        raise
    return states, records


def work_increment(mesh, C, params, state_a, state_b, g_dot):
    """Trapezoid slice (1/2)[<sigma_a, e(g_dot)> + <sigma_b, e(g_dot)>] dt."""
    gd_strain = to_mandel(sym_gradient(mesh, np.asarray(g_dot, dtype=float)))
    areas = mesh.areas()

    def power(state):
        strain = to_mandel(sym_gradient(mesh, state.u))
        stress = strain @ C.voigt
        deg = degradation(element_means(mesh, state.alpha), params.phase.eta)
        return float(np.sum(areas * deg * np.einsum("ti,ti->t", stress, gd_strain)))

    return 0.5 * (power(state_a) + power(state_b)) * (state_b.t - state_a.t)
