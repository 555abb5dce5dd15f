"""Pure-numpy implementations of the per-triangle kernels.

These are the hot loops of the whole package: every energy evaluation,
gradient, and stiffness assembly inside the alternate-minimization iteration
reduces to one of the functions below.  The compiled backend in ``_core.pyx``
implements the same signatures; parity between the two is enforced by tests.

Conventions
-----------
* ``vertices`` is (nv, 2) float64, ``triangles`` (nt, 3) int64 with
  counterclockwise orientation.
* Strains are stored as (nt, 3) arrays with columns (e11, e22, e12).
* The stiffness tensor ``C`` is a symmetric 3x3 matrix acting on the
  orthonormal (Mandel) strain vector (e11, e22, sqrt(2) e12), so that
  ``C e : e`` equals the matrix Frobenius pairing.
"""

import numpy as np

SQRT2 = float(np.sqrt(2.0))


def tri_geometry(vertices, triangles):
    """Signed areas and P1 basis gradients.

    Returns (area, gx, gy) where gx[t, a] = d(phi_a)/dx on triangle t.
    Degenerate (zero-area) triangles produce non-finite gradients; callers
    are expected to validate areas first.
    """
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    d1 = p1 - p0
    d2 = p2 - p0
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / (2.0 * area)
    gx = np.stack(
        (p1[:, 1] - p2[:, 1], p2[:, 1] - p0[:, 1], p0[:, 1] - p1[:, 1]), axis=1
    ) * inv[:, None]
    gy = np.stack(
        (p2[:, 0] - p1[:, 0], p0[:, 0] - p2[:, 0], p1[:, 0] - p0[:, 0]), axis=1
    ) * inv[:, None]
    return area, gx, gy


def strain_fields(triangles, gx, gy, u):
    """Per-triangle symmetric gradient (e11, e22, e12) of a P1 vector field."""
    ux = u[:, 0][triangles]
    uy = u[:, 1][triangles]
    e11 = np.sum(gx * ux, axis=1)
    e22 = np.sum(gy * uy, axis=1)
    e12 = 0.5 * (np.sum(gy * ux, axis=1) + np.sum(gx * uy, axis=1))
    return np.stack((e11, e22, e12), axis=1)


def full_gradients(triangles, gx, gy, u):
    """Per-triangle full gradient du (nt, 2, 2), du[t, i, j] = d(u_i)/d(x_j)."""
    ux = u[:, 0][triangles]
    uy = u[:, 1][triangles]
    out = np.empty((len(triangles), 2, 2))
    out[:, 0, 0] = np.sum(gx * ux, axis=1)
    out[:, 0, 1] = np.sum(gy * ux, axis=1)
    out[:, 1, 0] = np.sum(gx * uy, axis=1)
    out[:, 1, 1] = np.sum(gy * uy, axis=1)
    return out


def scalar_gradients(triangles, gx, gy, a):
    """Per-triangle gradient (nt, 2) of a P1 scalar field."""
    av = a[triangles]
    return np.stack((np.sum(gx * av, axis=1), np.sum(gy * av, axis=1)), axis=1)


def elastic_density(C, strain):
    """Energy density q = (1/2) C e : e per triangle, undegraded."""
    em = strain.copy()
    em[:, 2] *= SQRT2
    return 0.5 * np.einsum("ti,ij,tj->t", em, C, em)


def element_stiffness(C, gx, gy, area):
    """Undegraded element stiffness blocks (nt, 6, 6).

    Local dof order is (x0, y0, x1, y1, x2, y2); u_T^T K_T u_T equals
    2 * area * q(e(u)|_T).
    """
    nt = len(area)
    B = np.zeros((nt, 3, 6))
    for a in range(3):
        B[:, 0, 2 * a] = gx[:, a]
        B[:, 1, 2 * a + 1] = gy[:, a]
        B[:, 2, 2 * a] = gy[:, a] / SQRT2
        B[:, 2, 2 * a + 1] = gx[:, a] / SQRT2
    K = np.einsum("tip,ij,tjq->tpq", B, C, B)
    K *= area[:, None, None]
    return K
