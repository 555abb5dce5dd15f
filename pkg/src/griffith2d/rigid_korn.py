"""Rigid-motion fitting, crack-induced mesh partitions, Korn diagnostics.

An infinitesimal rigid motion is a(x) = A x + b with A skew-symmetric,
parameterized here by the rotation rate omega (A = [[0, -w], [w, 0]]) and a
translation b.  Thresholding the damage field partitions the mesh into a
broken set (component 0) and edge-connected unbroken components (ordered by
area, ties by smallest triangle index).  Subtracting per-component fitted
motions from a displacement field yields the piecewise-Korn remainder v,
whose norms are reported relative to the elastic strain norm.

The inequality constants of the continuum theory are non-constructive, so
nothing here asserts them: ratios are reported, and the test suite freezes
empirically calibrated regression bounds.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kernels
from .errors import ExponentOutOfRange
from .mesh import PADDING


@dataclass(frozen=True)
class InfRigidMotion:
    """a(x) = A x + b with A = [[0, -omega], [omega, 0]]."""

    omega: float
    b: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).reshape(2))

    def evaluate(self, points):
        points = np.asarray(points, dtype=float)
        out = np.empty_like(points)
        out[..., 0] = -self.omega * points[..., 1] + self.b[0]
        out[..., 1] = self.omega * points[..., 0] + self.b[1]
        return out


def fit_rigid_motion(points, displacements, weights):
    """Weighted least-squares rigid motion through sampled displacements.

    Solves min sum_i w_i |u_i - (A x_i + b)|^2 in closed form (the normal
    equations decouple after centering at the weighted centroid).  If all
    points coincide the rotation is undetermined: omega = 0 and the
    translation-only fit is returned with the ``degenerate`` flag set.
    """
    x = np.asarray(points, dtype=float).reshape(-1, 2)
    u = np.asarray(displacements, dtype=float).reshape(-1, 2)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if not (len(x) == len(u) == len(w)):
        raise ValueError("points, displacements and weights must have equal length")
    if (w < 0).any():
        raise ValueError("weights must be nonnegative")
    wtot = float(w.sum())
    if wtot <= 0:
        raise ValueError("total weight must be positive")

    xbar = (w[:, None] * x).sum(axis=0) / wtot
    ubar = (w[:, None] * u).sum(axis=0) / wtot
    xc = x - xbar
    moment = float(np.sum(w * (xc[:, 0] ** 2 + xc[:, 1] ** 2)))
    span = float(np.max(np.abs(xc))) if len(xc) else 0.0
    if moment <= 1e-28 * max(1.0, span) * wtot:
        return InfRigidMotion(omega=0.0, b=ubar, degenerate=True)
    omega = float(np.sum(w * (xc[:, 0] * u[:, 1] - xc[:, 1] * u[:, 0]))) / moment
    # b in the original frame: a(x) = A(x - xbar) + (A xbar + b)
    b = ubar - np.array([-omega * xbar[1], omega * xbar[0]])
    return InfRigidMotion(omega=omega, b=b)


def lemma_a_ratio(points, areas, motion):
    """sqrt(total area) * |omega| / sup |A x + b| over the sampled set.

    The rotation magnitude convention is |omega| (not the Frobenius norm of
    A); the empirical bound calibrated in the tests absorbs the difference.
    Returns 0 for rotation-free motions.
    """
    if motion.omega == 0.0:
        return 0.0
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(points) == 0:
        raise ValueError("need a nonempty sample")
    vals = motion.evaluate(points)
    sup = float(np.max(np.hypot(vals[:, 0], vals[:, 1])))
    total = float(np.sum(areas))
    if sup == 0.0:
        return float("inf")
    return np.sqrt(total) * abs(motion.omega) / sup


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            # attach the larger root id under the smaller for determinism
            if ri < rj:
                self.parent[rj] = ri
            else:
                self.parent[ri] = rj


@dataclass
class Partition:
    """Crack-induced partition of the triangles.

    labels : (nt,) int; 0 is the broken (exceptional) set, possibly empty,
        1..I the unbroken edge-connected components ordered by decreasing
        area (ties: smallest triangle index first).
    component_areas : (I + 1,) areas by label.
    interface_length : total length of edges shared by two distinct unbroken
        components (the discrete added boundary; broken-set boundary is the
        jump-set analog and is not counted).
    padding_touch : (I + 1,) True when the component contains a PADDING
        triangle (such components carry prescribed data, so their natural
        rigid motion is zero).
    """

    labels: np.ndarray
    component_areas: np.ndarray
    interface_length: float
    padding_touch: np.ndarray
    mesh: object = field(repr=False, default=None)

    @property
    def num_components(self):
        return len(self.component_areas)

    def triangles_of(self, label):
        return np.flatnonzero(self.labels == label)

    def vertices_of(self, label):
        return np.unique(self.mesh.triangles[self.labels == label].ravel())


def _finalize_partition(mesh, group_of_tri, broken_mask):
    """Relabel groups into the ordered convention and compute the metadata."""
    areas = mesh.areas()
    nt = mesh.num_triangles
    labels = np.zeros(nt, dtype=np.int64)
    unbroken_groups = {}
    for t in np.flatnonzero(~broken_mask):
        unbroken_groups.setdefault(group_of_tri[t], []).append(t)
    stats = []
    for gid, tris in unbroken_groups.items():
        tris = np.asarray(tris)
        stats.append((-float(areas[tris].sum()), int(tris.min()), gid, tris))
    stats.sort(key=lambda s: (s[0], s[1]))
    ncomp = len(stats) + 1
    component_areas = np.zeros(ncomp)
    padding_touch = np.zeros(ncomp, dtype=bool)
    component_areas[0] = float(areas[broken_mask].sum())
    for new_label, (_, _, _, tris) in enumerate(stats, start=1):
        labels[tris] = new_label
        component_areas[new_label] = float(areas[tris].sum())
        padding_touch[new_label] = bool((mesh.region[tris] == PADDING).any())

    pairs, edge_ids = mesh.interior_edge_pairs()
    la, lb = labels[pairs[:, 0]], labels[pairs[:, 1]]
    cut = (la != lb) & (la > 0) & (lb > 0)
    interface_length = float(mesh.edge_lengths()[edge_ids[cut]].sum())
    return Partition(
        labels=labels,
        component_areas=component_areas,
        interface_length=interface_length,
        padding_touch=padding_touch,
        mesh=mesh,
    )


def crack_partition(mesh, alpha, threshold):
    """Partition induced by thresholding the element-mean damage.

    Elements with mean vertex damage >= threshold form the broken set
    (label 0); the rest split into edge-connected components via union-find.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    alpha = np.asarray(alpha, dtype=float)
    mean = alpha[mesh.triangles].mean(axis=1)
    broken = mean >= threshold

    uf = _UnionFind(mesh.num_triangles)
    pairs, _ = mesh.interior_edge_pairs()
    for a, b in pairs:
        if not broken[a] and not broken[b]:
            uf.union(int(a), int(b))
    group = np.array([uf.find(t) for t in range(mesh.num_triangles)])
    return _finalize_partition(mesh, group, broken)


def fit_component_motions(mesh, u, partition):
    """Least-squares rigid motion of every component (index 0 = broken set).

    Vertices are weighted by their share of incident component area; an
    empty component gets the zero motion.
    """
    u = np.asarray(u, dtype=float)
    areas = mesh.areas()
    motions = []
    for label in range(partition.num_components):
        tris = partition.triangles_of(label)
        if len(tris) == 0:
            motions.append(InfRigidMotion(omega=0.0, b=np.zeros(2)))
            continue
        tri_nodes = mesh.triangles[tris]
        w = np.repeat(areas[tris] / 3.0, 3)
        pts = mesh.vertices[tri_nodes.ravel()]
        disp = u[tri_nodes.ravel()]
        motions.append(fit_rigid_motion(pts, disp, w))
    return motions


def merge_components(partition, motions, closeness):
    """Union unbroken components whose motions are sup-close (observation O1).

    Components containing padding adopt the zero motion before comparison
    (prescribed data forces the zero motion there); the sup distance is
    measured over the vertices of the smaller component, and closeness is
    applied transitively through union-find.  Never increases the component
    count or the interface length.
    """
    if closeness < 0:
        raise ValueError("closeness must be nonnegative")
    mesh = partition.mesh
    ncomp = partition.num_components
    eff = []
    for label in range(ncomp):
        if label > 0 and partition.padding_touch[label]:
            eff.append(InfRigidMotion(omega=0.0, b=np.zeros(2)))
        else:
            eff.append(motions[label])

    uf = _UnionFind(ncomp)
    for i in range(1, ncomp):
        for j in range(i + 1, ncomp):
            small = j if partition.component_areas[j] <= partition.component_areas[i] else i
            verts = mesh.vertices[partition.vertices_of(small)]
            d = eff[i].evaluate(verts) - eff[j].evaluate(verts)
            sup = float(np.max(np.hypot(d[:, 0], d[:, 1]))) if len(verts) else 0.0
            if sup <= closeness:
                uf.union(i, j)

    broken = partition.labels == 0
    group = np.array([uf.find(int(l)) for l in partition.labels])
    group[broken] = -1
    return _finalize_partition(mesh, group, broken)


@dataclass
class KornReport:
    """Norms of the piecewise-Korn remainder v = u - sum_j a_j chi_{P_j}.

    All v-norms run over unbroken components only (the broken set is the
    exceptional set); interface vertices contribute one-sided values per
    incident triangle.  grad_norms maps each exponent p to the L^p norm of
    the full gradient of v; ratio_* are the same quantities divided by the
    L^2 norm of e(u) over the unbroken region.
    """

    motions: list
    sup_norm_v: float
    grad_norms: dict
    e_norm: float
    added_boundary: float
    ratio_sup: float
    ratio_grad: dict


def korn_diagnostic(mesh, u, partition, motions, p=1.5):
    """Subtract per-component motions and report the remainder's norms."""
    if not (1.0 <= p < 2.0):
        raise ExponentOutOfRange(f"exponent must lie in [1, 2), got {p}")
    u = np.asarray(u, dtype=float)
    area, gx, gy = mesh.geometry()
    labels = partition.labels
    unbroken = labels > 0
    if not unbroken.any():
        raise ValueError("partition has no unbroken components")

    tri_nodes = mesh.triangles[unbroken]
    lab = labels[unbroken]
    omegas = np.array([m.omega for m in motions])
    bs = np.stack([m.b for m in motions])
    pts = mesh.vertices[tri_nodes]  # (ntu, 3, 2)
    a_vals = np.empty_like(pts)
    a_vals[..., 0] = -omegas[lab][:, None] * pts[..., 1] + bs[lab, 0][:, None]
    a_vals[..., 1] = omegas[lab][:, None] * pts[..., 0] + bs[lab, 1][:, None]
    v = u[tri_nodes] - a_vals
    sup_norm = float(np.max(np.hypot(v[..., 0], v[..., 1])))

    grad_u = kernels.full_gradients(mesh.triangles, gx, gy, u)[unbroken]
    grad_v = grad_u.copy()
    grad_v[:, 0, 1] += omegas[lab]
    grad_v[:, 1, 0] -= omegas[lab]
    fro = np.sqrt(np.einsum("tij,tij->t", grad_v, grad_v))
    w = area[unbroken]
    exponents = sorted({1.0, 1.5, float(p)})
    grad_norms = {
        q: float(np.sum(w * fro**q) ** (1.0 / q)) for q in exponents
    }

    strain = kernels.strain_fields(mesh.triangles, gx, gy, u)[unbroken]
    e_sq = strain[:, 0] ** 2 + strain[:, 1] ** 2 + 2.0 * strain[:, 2] ** 2
    e_norm = float(np.sqrt(np.sum(w * e_sq)))

    def ratio(num):
        if e_norm > 0:
            return num / e_norm
        return 0.0 if num == 0 else float("inf")

    return KornReport(
        motions=list(motions),
        sup_norm_v=sup_norm,
        grad_norms=grad_norms,
        e_norm=e_norm,
        added_boundary=partition.interface_length,
        ratio_sup=ratio(sup_norm),
        ratio_grad={q: ratio(n) for q, n in grad_norms.items()},
    )
