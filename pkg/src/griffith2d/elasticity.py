"""Stiffness tensor, P1 strains, degraded stiffness assembly, elastic solve.

Displacement fields are (nv, 2) arrays indexed like ``mesh.vertices``; strain
fields are (nt, 3) arrays with columns (e11, e22, e12), constant per triangle
(exact for the P1 interpolant).  Degrees of freedom interleave as
(x0, y0, x1, y1, ...).

All public functions are pure; the linear solve is a hand-rolled
Jacobi-preconditioned conjugate gradient so runs are bit-reproducible.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels as kernels
from .errors import DegenerateElement, FloorViolation, SolverDiverged
from .sparsity import FixedPattern

SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class ElasticityTensor:
    """Symmetric positive-definite stiffness in the orthonormal Voigt basis
    e = (e11, e22, sqrt(2) e12), so C e . e equals the tensor pairing Ce : e."""

    voigt: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.voigt, dtype=float)
        if c.shape != (3, 3):
            raise ValueError(f"stiffness must be 3x3, got {c.shape}")
        if not np.allclose(c, c.T, rtol=1e-12, atol=1e-12):
            raise ValueError("stiffness matrix must be symmetric")
        c = 0.5 * (c + c.T)
        eigs = np.linalg.eigvalsh(c)
        if eigs.min() <= 0:
            raise ValueError(f"stiffness must be positive definite, eigenvalues {eigs}")
        object.__setattr__(self, "voigt", c)

    @classmethod
    def from_lame(cls, lam, mu):
        """Isotropic tensor: C e = 2 mu e + lam tr(e) I."""
        if mu <= 0 or lam + mu <= 0:
            raise ValueError(f"need mu > 0 and lam + mu > 0, got ({lam}, {mu})")
        return cls(
            np.array(
                [
                    [lam + 2 * mu, lam, 0.0],
                    [lam, lam + 2 * mu, 0.0],
                    [0.0, 0.0, 2 * mu],
                ]
            )
        )


def to_mandel(e):
    """(…, 3) strain columns (e11, e22, e12) -> orthonormal (e11, e22, √2 e12)."""
    em = np.array(e, dtype=float, copy=True)
    em[..., 2] *= SQRT2
    return em


def quadratic_form(C, e):
    """Energy density Q(e) = (1/2) C e : e for a single symmetric 2x2 strain."""
    e = np.asarray(e, dtype=float)
    if e.shape != (2, 2):
        raise ValueError(f"strain must be 2x2, got {e.shape}")
    if not np.isclose(e[0, 1], e[1, 0], rtol=1e-12, atol=1e-14):
        raise ValueError("strain must be symmetric")
    em = np.array([e[0, 0], e[1, 1], SQRT2 * 0.5 * (e[0, 1] + e[1, 0])])
    return 0.5 * float(em @ C.voigt @ em)


def sym_gradient(mesh, u):
    """Elementwise symmetric gradient of the P1 interpolant, (nt, 3)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.num_vertices, 2):
        raise ValueError(
            f"displacement shaped {u.shape}, expected {(mesh.num_vertices, 2)}"
        )
    area, gx, gy = mesh.geometry()
    bad = np.flatnonzero(np.abs(area) < 1e-300)
    if len(bad):
        raise DegenerateElement(f"triangle {bad[0]} has zero area")
    return kernels.strain_fields(mesh.triangles, gx, gy, u)


class StiffnessAssembler:
    """Caches the undegraded element matrices and the CSR pattern of one
    (mesh, C) pair; reassembly for a new degradation field is a scaling pass
    plus a segmented reduction."""

    def __init__(self, mesh, C):
        self.mesh = mesh
        self.C = C
        area, gx, gy = mesh.geometry()
        ke = kernels.element_stiffness(C.voigt, gx, gy, area)
        t = mesh.triangles
        dofs = np.empty((mesh.num_triangles, 6), dtype=np.int64)
        dofs[:, 0::2] = 2 * t
        dofs[:, 1::2] = 2 * t + 1
        n = 2 * mesh.num_vertices
        self._pattern = FixedPattern(
            np.repeat(dofs, 6, axis=1).ravel(),
            np.tile(dofs, (1, 6)).ravel(),
            (n, n),
        )
        self._vals0 = ke.reshape(mesh.num_triangles, 36)

    def assemble(self, degradation, floor=None):
        deg = np.asarray(degradation, dtype=float)
        if deg.shape != (self.mesh.num_triangles,):
            raise ValueError(
                f"degradation shaped {deg.shape}, expected ({self.mesh.num_triangles},)"
            )
        if floor is not None and (deg < floor).any():
            raise FloorViolation(
                f"degradation minimum {deg.min():g} below floor {floor:g}"
            )
        if (deg <= 0).any():
            raise FloorViolation("degradation factors must be positive")
        vals = (self._vals0 * deg[:, None]).ravel()
        return self._pattern.matrix(vals)


def assemble_stiffness(mesh, C, degradation, floor=None):
    """Sparse SPD-on-free-dofs stiffness with u^T K u = 2 sum area·deg·Q(e(u))."""
    return StiffnessAssembler(mesh, C).assemble(degradation, floor=floor)


def _pcg(A, b, tol, cap, x0=None):
    """Jacobi-preconditioned CG; returns (x, history). Deterministic."""
    diag = A.diagonal()
    if (diag <= 0).any():
        raise ValueError("system diagonal must be positive for Jacobi PCG")
    minv = 1.0 / diag
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), [0.0]
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A @ x
    history = [float(np.linalg.norm(r)) / bnorm]
    if history[-1] <= tol:
        return x, history
    z = minv * r
    p = z.copy()
    rz = float(r @ z)
    for _ in range(cap):
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = float(np.linalg.norm(r)) / bnorm
        history.append(res)
        if res <= tol:
            return x, history
        z = minv * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverDiverged(
        f"PCG did not reach tol {tol:g} in {cap} iterations "
        f"(last residual {history[-1]:g})",
        residuals=history,
    )


def solve_elastic(K, dirichlet, g_values, tol=1e-10, x0=None):
    """Minimize u^T K u over fields equal to g on the Dirichlet vertices.

    Constrained dofs are eliminated; the free block is solved with Jacobi
    PCG to relative residual ``tol`` with an iteration cap of 50 sqrt(n).
    ``x0`` optionally warm-starts the iteration with a full-field guess.
    """
    n = K.shape[0]
    nv = n // 2
    g = np.asarray(g_values, dtype=float)
    if g.shape != (nv, 2):
        raise ValueError(f"boundary values shaped {g.shape}, expected {(nv, 2)}")
    if not (0.0 < tol < 1.0):
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    fixed = np.zeros(n, dtype=bool)
    fixed[2 * dirichlet.indices] = True
    fixed[2 * dirichlet.indices + 1] = True
    free = ~fixed

    u = np.zeros(n)
    u[fixed] = g.ravel()[fixed]

    K_ff = K[free][:, free]
    b = -(K[free][:, fixed] @ u[fixed])
    cap = max(100, int(50 * math.sqrt(free.sum())))
    guess = None
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (nv, 2):
            raise ValueError(f"warm start shaped {x0.shape}, expected {(nv, 2)}")
        guess = x0.ravel()[free]
    uf, _ = _pcg(K_ff, b, tol, cap, x0=guess)
    u[free] = uf
    return u.reshape(nv, 2)
