"""Structured triangulations of the padded computational domain.

The body occupies the rectangle [0, width] x [0, height].  Boundary data is
imposed in a relaxed sense: two padding strips [-pad, 0] x [0, height] and
[width, width + pad] x [0, height] are meshed along with the body, tagged
PADDING, and the load is prescribed at every vertex touching them.  A crack
is free to run along the body/padding interface (debonding), paying surface
energy there like everywhere else.

Meshes are crossed-triangle structured grids: every cell is split into two
triangles with the diagonal direction alternating in a checkerboard pattern,
which avoids a preferred crack direction.  A mesh is immutable after
construction and safe to share between threads; derived geometry (areas,
basis gradients, edge tables) is computed lazily and cached.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kernels
from .errors import InvalidGeometry

INTERIOR = 0
PADDING = 1


@dataclass(frozen=True)
class Violation:
    """One failed mesh invariant. ``entity`` indexes the offending triangle,
    vertex or edge; -1 for global invariants."""

    invariant: str
    entity: int
    detail: str = ""


@dataclass(frozen=True)
class DirichletSet:
    """Vertex indices carrying prescribed displacements (sorted, unique)."""

    indices: np.ndarray

    def __len__(self):
        return len(self.indices)

    def mask(self, num_vertices):
        m = np.zeros(num_vertices, dtype=bool)
        m[self.indices] = True
        return m


@dataclass
class Mesh:
    """Triangulation of the padded domain.

    vertices : (nv, 2) float64
    triangles : (nt, 3) int64, counterclockwise
    region : (nt,) uint8, INTERIOR or PADDING
    boundary_edges : (nb, 2) int64, sorted vertex pairs on the outer boundary
    xs, ys : grid line coordinates when the mesh came from the structured
        generator (vertex (ix, iy) has index iy * len(xs) + ix), else None.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    region: np.ndarray
    boundary_edges: np.ndarray
    xs: np.ndarray | None = None
    ys: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    def geometry(self):
        """(areas, gx, gy): signed areas and P1 basis gradients, cached."""
        if "geom" not in self._cache:
            self._cache["geom"] = kernels.tri_geometry(self.vertices, self.triangles)
        return self._cache["geom"]

    def areas(self):
        return self.geometry()[0]

    def edge_table(self):
        """(edges, edge_of_tri, counts): unique sorted edges (ne, 2), the
        edge index of each triangle side (nt, 3), and per-edge incidence
        counts."""
        if "edges" not in self._cache:
            t = self.triangles
            raw = np.concatenate((t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]))
            raw = np.sort(raw, axis=1)
            edges, inverse, counts = np.unique(
                raw, axis=0, return_inverse=True, return_counts=True
            )
            edge_of_tri = inverse.reshape(3, -1).T
            self._cache["edges"] = (edges, edge_of_tri, counts)
        return self._cache["edges"]

    def edge_lengths(self):
        if "edge_lengths" not in self._cache:
            edges, _, _ = self.edge_table()
            d = self.vertices[edges[:, 1]] - self.vertices[edges[:, 0]]
            self._cache["edge_lengths"] = np.hypot(d[:, 0], d[:, 1])
        return self._cache["edge_lengths"]

    def interior_edge_pairs(self):
        """(pairs, edge_ids): triangle pairs sharing each interior edge."""
        if "pairs" not in self._cache:
            edges, edge_of_tri, counts = self.edge_table()
            ne = len(edges)
            flat = edge_of_tri.ravel()
            tri_ids = np.repeat(np.arange(self.num_triangles), 3)
            order = np.argsort(flat, kind="stable")
            sorted_edges = flat[order]
            sorted_tris = tri_ids[order]
            starts = np.searchsorted(sorted_edges, np.arange(ne))
            shared = np.flatnonzero(counts == 2)
            pairs = np.stack(
                (sorted_tris[starts[shared]], sorted_tris[starts[shared] + 1]),
                axis=1,
            )
            self._cache["pairs"] = (pairs, shared)
        return self._cache["pairs"]

    def vertex_grid(self):
        """Structured vertex index grid (len(ys), len(xs)); requires xs/ys."""
        if self.xs is None or self.ys is None:
            raise ValueError("mesh does not carry structured-grid metadata")
        return np.arange(self.num_vertices).reshape(len(self.ys), len(self.xs))


def build_rectangle_mesh(width, height, pad, nx, ny):
    """Crossed-triangle mesh of [-pad, width + pad] x [0, height].

    The body [0, width] x [0, height] gets nx x ny cells; each padding strip
    gets ceil(pad / hx) columns so x = 0 and x = width are always grid lines.
    Triangles whose cell lies in a strip are tagged PADDING.
    """
    if not (width > 0 and height > 0 and pad > 0):
        raise InvalidGeometry(
            f"width, height and pad must be positive, got "
            f"({width}, {height}, {pad})"
        )
    if nx < 2 or ny < 2:
        raise InvalidGeometry(f"nx and ny must be at least 2, got ({nx}, {ny})")

    hx = width / nx
    npad = max(1, int(math.ceil(pad / hx - 1e-9)))
    xs = np.concatenate(
        (
            np.linspace(-pad, 0.0, npad + 1)[:-1],
            np.linspace(0.0, width, nx + 1),
            np.linspace(width, width + pad, npad + 1)[1:],
        )
    )
    ys = np.linspace(0.0, height, ny + 1)
    ncx = len(xs) - 1

    gx, gy = np.meshgrid(xs, ys)
    vertices = np.stack((gx.ravel(), gy.ravel()), axis=1)

    ix, iy = np.meshgrid(np.arange(ncx), np.arange(ny), indexing="ij")
    ix = ix.ravel()
    iy = iy.ravel()
    v00 = iy * len(xs) + ix
    v10 = v00 + 1
    v01 = v00 + len(xs)
    v11 = v01 + 1

    ncell = ncx * ny
    triangles = np.empty((2 * ncell, 3), dtype=np.int64)
    even = (ix + iy) % 2 == 0
    # diagonal v00-v11 on even cells, v10-v01 on odd ones; all CCW
    triangles[0::2][even] = np.stack((v00, v10, v11), axis=1)[even]
    triangles[1::2][even] = np.stack((v00, v11, v01), axis=1)[even]
    odd = ~even
    triangles[0::2][odd] = np.stack((v00, v10, v01), axis=1)[odd]
    triangles[1::2][odd] = np.stack((v10, v11, v01), axis=1)[odd]

    region = np.where(
        (ix < npad) | (ix >= npad + nx), PADDING, INTERIOR
    ).astype(np.uint8)
    region = np.repeat(region, 2)

    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        region=region,
        boundary_edges=np.empty((0, 2), dtype=np.int64),
        xs=xs,
        ys=ys,
    )
    edges, _, counts = mesh.edge_table()
    mesh.boundary_edges = edges[counts == 1]
    return mesh


def validate(mesh):
    """Check all Mesh invariants; returns a list of Violations (empty = ok)."""
    violations = []
    t = mesh.triangles
    nv = mesh.num_vertices

    p0 = mesh.vertices[t[:, 0]]
    d1 = mesh.vertices[t[:, 1]] - p0
    d2 = mesh.vertices[t[:, 2]] - p0
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    for i in np.flatnonzero(area <= 0):
        violations.append(
            Violation("positive-area", int(i), f"signed area {area[i]:g}")
        )

    used = np.bincount(t.ravel(), minlength=nv)
    for i in np.flatnonzero(used == 0):
        violations.append(Violation("orphan-vertex", int(i)))

    bad_tag = ~np.isin(mesh.region, (INTERIOR, PADDING))
    for i in np.flatnonzero(bad_tag):
        violations.append(Violation("region-tag", int(i), str(mesh.region[i])))

    if not (mesh.region == PADDING).any():
        violations.append(
            Violation("missing-padding", -1, "no PADDING triangles")
        )
    else:
        pairs, _ = mesh.interior_edge_pairs()
        ra = mesh.region[pairs[:, 0]]
        rb = mesh.region[pairs[:, 1]]
        if not (ra != rb).any() and (mesh.region == INTERIOR).any():
            violations.append(
                Violation(
                    "detached-padding",
                    -1,
                    "no edge shared between INTERIOR and PADDING",
                )
            )

    edges, _, counts = mesh.edge_table()
    for e in np.flatnonzero(counts > 2):
        violations.append(
            Violation("edge-manifold", int(e), f"edge {tuple(edges[e])} in {counts[e]} triangles")
        )
    actual_boundary = edges[counts == 1]
    declared = {tuple(sorted(e)) for e in np.asarray(mesh.boundary_edges)}
    actual = {tuple(e) for e in actual_boundary}
    if declared != actual:
        violations.append(
            Violation(
                "boundary-edges",
                -1,
                f"{len(declared ^ actual)} edges differ from single-incidence set",
            )
        )
    return violations


def dirichlet_set(mesh):
    """Vertices incident to at least one PADDING triangle."""
    pad_tris = mesh.triangles[mesh.region == PADDING]
    return DirichletSet(indices=np.unique(pad_tris.ravel()))
