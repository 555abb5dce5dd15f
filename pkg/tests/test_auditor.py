import numpy as np
import pytest

from griffith2d.auditor import (
    _smooth_bump,
    competitor_suite,
    kkt_residual,
    nitsche_extend,
)
from griffith2d.elasticity import ElasticityTensor, assemble_stiffness, solve_elastic
from griffith2d.errors import InvalidParameters
from griffith2d.evolution import EvolutionParams, LoadProgram, State, TimeGrid, run
from griffith2d.mesh import build_rectangle_mesh, dirichlet_set
from griffith2d.phasefield import PhaseFieldParams, degradation, element_means


def test_kkt_on_converged_states(fracture_run):
    mesh, C, params = fracture_run["mesh"], fracture_run["C"], fracture_run["params"]
    states = fracture_run["states"]
    for k in (5, 13, 20):
        ke, (ka, ki) = kkt_residual(mesh, C, states[k], states[k - 1].alpha, params)
        assert ke <= 10 * params.tol_elastic
        assert ka <= 10 * params.tol_am
        assert ki <= 10 * params.tol_am


def test_kkt_elastic_scales_with_perturbation(fracture_run):
    mesh, C, params = fracture_run["mesh"], fracture_run["C"], fracture_run["params"]
    st = fracture_run["states"][8]
    lower = fracture_run["states"][7].alpha
    rng = np.random.default_rng(19)
    noise = rng.standard_normal(st.u.shape)
    noise[dirichlet_set(mesh).indices] = 0.0
    residuals = []
    for eps in (1e-4, 1e-3):
        pert = State(u=st.u + eps * noise, alpha=st.alpha, t=st.t)
        ke, _ = kkt_residual(mesh, C, pert, lower, params)
        residuals.append(ke)
    assert residuals[1] > residuals[0] * 5
    assert residuals[1] == pytest.approx(residuals[0] * 10, rel=0.3)


def test_kkt_damage_detects_non_stationarity(fracture_run):
    mesh, C, params = fracture_run["mesh"], fracture_run["C"], fracture_run["params"]
    st = fracture_run["states"][13]
    lower = fracture_run["states"][12].alpha
    # push damage below its optimum on the inactive set (but above lower)
    inactive = (st.alpha > lower + 1e-6) & (st.alpha < 0.999)
    assert inactive.any()
    alpha_bad = st.alpha.copy()
    alpha_bad[inactive] = np.maximum(
        lower[inactive] + 1e-9, alpha_bad[inactive] - 0.05
    )
    bad = State(u=st.u, alpha=alpha_bad, t=st.t)
    _, (ka, ki) = kkt_residual(mesh, C, bad, lower, params)
    assert ki > 10 * params.tol_am


def test_nitsche_extends_constants_exactly():
    ys = np.linspace(0.0, 1.0, 9)
    phi = np.empty((9, 5, 2))
    phi[..., 0] = 2.25
    phi[..., 1] = -0.75
    ysf, full = nitsche_extend(ys, phi)
    assert np.abs(full[..., 0] - 2.25).max() < 1e-12
    assert np.abs(full[..., 1] + 0.75).max() < 1e-12
    assert len(ysf) == 2 * len(ys) - 1


def test_nitsche_extends_rotation_exactly():
    ys = np.linspace(0.0, 1.0, 9)
    xs = np.linspace(-1.0, 1.0, 7)
    Y, X = np.meshgrid(ys, xs, indexing="ij")
    rot = np.stack((-Y, X), axis=-1)  # (tangential, normal) of a rotation
    ysf, full = nitsche_extend(ys, rot)
    Yf = np.broadcast_to(ysf[:, None], full.shape[:2])
    Xf = np.broadcast_to(xs[None, :], full.shape[:2])
    assert np.abs(full[..., 0] + Yf).max() < 1e-12
    assert np.abs(full[..., 1] - Xf).max() < 1e-12


def test_nitsche_trace_continuity_and_params():
    ys = np.linspace(0.0, 0.5, 6)
    rng = np.random.default_rng(20)
    phi = rng.standard_normal((6, 4, 2))
    ysf, full = nitsche_extend(ys, phi)
    i0 = int(np.argmin(np.abs(ysf)))
    np.testing.assert_array_equal(full[i0], phi[0])
    for lam, mu in ((0.5, 0.5), (0.0, 0.5), (0.25, 1.0), (0.5, 0.25)):
        with pytest.raises(InvalidParameters):
            nitsche_extend(ys, phi, lam=lam, mu=mu)


def test_nitsche_strain_ratio_bound():
    # frozen from a 300-field calibration sweep (max observed 3.18)
    rng = np.random.default_rng(99)
    nx, ny = 49, 33
    xs = np.linspace(-1, 1, nx)
    ys = np.linspace(0, 1, ny)
    Y, X = np.meshgrid(ys, xs, indexing="ij")

    def fd_strain_norm(rows, field):
        dy = rows[1] - rows[0]
        dx = xs[1] - xs[0]
        d1 = np.gradient(field[..., 0], dy, dx)
        d2 = np.gradient(field[..., 1], dy, dx)
        e11 = d1[1]
        e22 = d2[0]
        e12 = 0.5 * (d1[0] + d2[1])
        return float(np.sqrt(np.sum(e11**2 + e22**2 + 2 * e12**2)))

    worst = 0.0
    for _ in range(100):
        phi = np.zeros((ny, nx, 2))
        for k in range(1, 5):
            for l in range(1, 5):
                for c in range(2):
                    a1, a2, a3, a4 = rng.uniform(-1, 1, 4)
                    phi[..., c] += (
                        a1 * np.sin(k * X) * np.sin(l * Y)
                        + a2 * np.cos(k * X) * np.sin(l * Y)
                        + a3 * np.sin(k * X) * np.cos(l * Y)
                        + a4 * np.cos(k * X) * np.cos(l * Y)
                    )
        ysf, full = nitsche_extend(ys, phi)
        ext_rows = ysf < 0
        ratio = fd_strain_norm(ysf[ext_rows], full[ext_rows]) / fd_strain_norm(ys, phi)
        worst = max(worst, ratio)
    assert worst <= 3.5


def test_suite_hard_margins_and_kkt(fracture_run):
    mesh, C, params = fracture_run["mesh"], fracture_run["C"], fracture_run["params"]
    states = fracture_run["states"]
    for k in (10, 20):
        rep = competitor_suite(mesh, C, states[k], states[k - 1].alpha, params)
        assert not rep.hard_failed
        hard = [(n, m) for n, m, h in rep.competitor_margins if h]
        assert hard
        for name, margin in hard:
            assert margin >= -rep.tol_margin, name


def test_suite_fresh_crack_positive_below_onset(fracture_run):
    # early in the load program a fresh strip always costs more than it saves
    mesh, C, params = fracture_run["mesh"], fracture_run["C"], fracture_run["params"]
    states = fracture_run["states"]
    rep = competitor_suite(mesh, C, states[4], states[3].alpha, params)
    fresh = [m for n, m, h in rep.competitor_margins if n.startswith("fresh-crack")]
    assert fresh
    assert all(m > 0 for m in fresh)


def test_suite_transfer_present_after_fracture(fracture_run):
    mesh, C, params = fracture_run["mesh"], fracture_run["C"], fracture_run["params"]
    states = fracture_run["states"]
    rep = competitor_suite(mesh, C, states[-1], states[-2].alpha, params)
    names = [n for n, _, _ in rep.competitor_margins]
    assert any(n.startswith("transfer") for n in names)


def test_suite_rigid_shift_on_detached_block():
    # two fully broken bands isolate a middle block with no padding contact;
    # shifting it rigidly must not change the energy beyond tolerance
    mesh = build_rectangle_mesh(1.0, 1.0, 0.25, 12, 12)
    C = ElasticityTensor.from_lame(1.0, 1.0)
    phase = PhaseFieldParams(ell=0.17, eta=1e-6, kappa=1.0)
    params = EvolutionParams(phase=phase, tol_elastic=1e-12)
    x = mesh.vertices[:, 0]
    alpha = np.zeros(mesh.num_vertices)
    h = 1.0 / 12
    for lo in (0.25, 0.75):
        alpha[(x >= lo - 1e-12) & (x <= lo + h + 1e-12)] = 1.0
    alpha[dirichlet_set(mesh).indices] = 0.0
    deg = degradation(element_means(mesh, alpha), phase.eta)
    K = assemble_stiffness(mesh, C, deg)
    g1 = np.stack((0.4 * x, np.zeros_like(x)), axis=1)
    u = solve_elastic(K, dirichlet_set(mesh), g1, tol=1e-13)
    st = State(u=u, alpha=alpha, t=0.0)
    rep = competitor_suite(mesh, C, st, alpha, params, g_field=g1)
    shifts = [(n, m) for n, m, h_ in rep.competitor_margins if n.startswith("rigid-shift")]
    assert shifts
    for name, margin in shifts:
        assert margin >= -rep.tol_margin, name
        assert abs(margin) < 1e-4 * (1.0 + rep.tol_margin / 1e-8)


def test_suite_flags_tampered_state(fracture_run):
    # move the state down a known interior descent direction: the matching
    # bump competitor then wins by a margin the audit must flag
    mesh, C, params = fracture_run["mesh"], fracture_run["C"], fracture_run["params"]
    st = fracture_run["states"][10]
    lower = fracture_run["states"][9].alpha
    pinned = dirichlet_set(mesh).mask(mesh.num_vertices)
    rng = np.random.default_rng(0)  # audit seed 0: first bump matches
    bump = _smooth_bump(mesh, rng, pinned)
    u_scale = max(float(np.abs(st.u).max()), 1e-3)
    tampered = State(u=st.u - 0.3 * u_scale * bump, alpha=st.alpha, t=st.t)
    rep = competitor_suite(mesh, C, tampered, lower, params, seed=0)
    assert rep.hard_failed
