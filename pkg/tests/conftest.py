import numpy as np
import pytest

from griffith2d.elasticity import ElasticityTensor
from griffith2d.evolution import EvolutionParams, LoadProgram, TimeGrid, run
from griffith2d.mesh import build_rectangle_mesh
from griffith2d.phasefield import PhaseFieldParams


@pytest.fixture(scope="session")
def unit_mesh():
    return build_rectangle_mesh(1.0, 1.0, 0.25, 8, 8)


@pytest.fixture(scope="session")
def iso_tensor():
    return ElasticityTensor.from_lame(1.0, 1.0)


@pytest.fixture(scope="session")
def shear_tensor():
    return ElasticityTensor.from_lame(0.0, 1.0)


def quadrature_energy(mesh, C, u, degradation=None):
    """Independent elementwise oracle for the elastic energy.

    Computes the P1 gradient per triangle by solving the local 3x3 linear
    interpolation system (a different path than the assembly kernels) and
    applies Q(e) = 0.5 C e : e through explicit 2x2 matrices.
    """
    total = 0.0
    for k, tri in enumerate(np.asarray(mesh.triangles)):
        pts = mesh.vertices[tri]
        A = np.column_stack((np.ones(3), pts))
        area = 0.5 * abs(np.linalg.det(A))
        grads = np.zeros((2, 2))
        for comp in range(2):
            coef = np.linalg.solve(A, u[tri, comp])
            grads[comp] = coef[1:]
        e = 0.5 * (grads + grads.T)
        cv = C.voigt
        ev = np.array([e[0, 0], e[1, 1], np.sqrt(2.0) * e[0, 1]])
        q = 0.5 * ev @ cv @ ev
        w = 1.0 if degradation is None else degradation[k]
        total += area * w * q
    return total


@pytest.fixture(scope="session")
def fracture_run():
    """Converged 16x16 tearing run crossing the full-fracture snap."""
    mesh = build_rectangle_mesh(1.0, 1.0, 0.25, 16, 16)
    C = ElasticityTensor.from_lame(1.0, 1.0)
    params = EvolutionParams(phase=PhaseFieldParams(ell=0.125, eta=1e-6, kappa=1.0))
    program = LoadProgram(mode="surfing", times=[0.0, 1.0], amplitudes=[0.0, 2.0])
    grid = TimeGrid(np.linspace(0.0, 1.0, 21))
    states, records = run(mesh, C, program, grid, params)
    return {
        "mesh": mesh,
        "C": C,
        "params": params,
        "program": program,
        "grid": grid,
        "states": states,
        "records": records,
    }
