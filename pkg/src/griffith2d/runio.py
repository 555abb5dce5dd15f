"""Output formats: legacy VTK, CSV ledgers, JSON-lines summaries.

Everything is written with shortest round-trip float formatting (``repr``),
so identical runs produce byte-identical files and readers recover the
exact binary values.
"""

import json

import numpy as np

from .mesh import Mesh


def _fmt(x):
    return repr(float(x))


LEDGER_COLUMNS = [
    "t",
    "elastic",
    "surface",
    "total",
    "work_cum",
    "balance_residual",
    "am_iters",
    "fallback_used",
]


def write_ledger(path, records):
    lines = [",".join(LEDGER_COLUMNS)]
    for r in records:
        lines.append(
            ",".join(
                [
                    _fmt(r.t),
                    _fmt(r.elastic),
                    _fmt(r.surface),
                    _fmt(r.total),
                    _fmt(r.work_cum),
                    _fmt(r.balance_residual),
                    str(r.am_iters),
                    str(int(r.fallback_used)),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n")


def read_ledger(path):
    rows = []
    lines = path.read_text().strip().splitlines()
    for line in lines[1:]:
        parts = line.split(",")
        rows.append(
            {
                key: (int(val) if key in ("am_iters", "fallback_used") else float(val))
                for key, val in zip(LEDGER_COLUMNS, parts)
            }
        )
    return rows


def write_summary(path, entries):
    with open(path, "w") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def write_vtk(path, mesh, u, alpha, labels=None):
    """Legacy ASCII VTK unstructured grid with point data u, alpha and cell
    data region (and partition labels when given)."""
    nv = mesh.num_vertices
    nt = mesh.num_triangles
    out = []
    out.append("# vtk DataFile Version 3.0")
    out.append("griffith2d fields")
    out.append("ASCII")
    out.append("DATASET UNSTRUCTURED_GRID")
    out.append(f"POINTS {nv} double")
    for p in mesh.vertices:
        out.append(f"{_fmt(p[0])} {_fmt(p[1])} 0.0")
    out.append(f"CELLS {nt} {4 * nt}")
    for tri in mesh.triangles:
        out.append(f"3 {tri[0]} {tri[1]} {tri[2]}")
    out.append(f"CELL_TYPES {nt}")
    out.extend(["5"] * nt)
    out.append(f"POINT_DATA {nv}")
    out.append("VECTORS displacement double")
    for row in u:
        out.append(f"{_fmt(row[0])} {_fmt(row[1])} 0.0")
    out.append("SCALARS damage double 1")
    out.append("LOOKUP_TABLE default")
    for a in alpha:
        out.append(_fmt(a))
    out.append(f"CELL_DATA {nt}")
    out.append("SCALARS region int 1")
    out.append("LOOKUP_TABLE default")
    out.extend(str(int(r)) for r in mesh.region)
    if labels is not None:
        out.append("SCALARS partition int 1")
        out.append("LOOKUP_TABLE default")
        out.extend(str(int(c)) for c in labels)
    path.write_text("\n".join(out) + "\n")


def read_vtk(path):
    """Read the fields written by write_vtk; returns (mesh, u, alpha).

    The returned mesh has no structured metadata or boundary edges; callers
    needing those should rebuild the mesh from the run configuration.
    """
    tokens = path.read_text().split("\n")
    i = 0

    def expect(prefix):
        nonlocal i
        while not tokens[i].strip():
            i += 1
        line = tokens[i]
        if not line.startswith(prefix):
            raise ValueError(f"expected {prefix!r} at line {i + 1}, got {line!r}")
        i += 1
        return line

    expect("# vtk DataFile")
    i += 1  # title
    expect("ASCII")
    expect("DATASET UNSTRUCTURED_GRID")
    nv = int(expect("POINTS").split()[1])
    vertices = np.empty((nv, 2))
    for k in range(nv):
        parts = tokens[i].split()
        vertices[k] = (float(parts[0]), float(parts[1]))
        i += 1
    nt = int(expect("CELLS").split()[1])
    triangles = np.empty((nt, 3), dtype=np.int64)
    for k in range(nt):
        parts = tokens[i].split()
        triangles[k] = [int(p) for p in parts[1:4]]
        i += 1
    expect("CELL_TYPES")
    i += nt
    expect("POINT_DATA")
    expect("VECTORS displacement")
    u = np.empty((nv, 2))
    for k in range(nv):
        parts = tokens[i].split()
        u[k] = (float(parts[0]), float(parts[1]))
        i += 1
    expect("SCALARS damage")
    expect("LOOKUP_TABLE")
    alpha = np.empty(nv)
    for k in range(nv):
        alpha[k] = float(tokens[i])
        i += 1
    expect("CELL_DATA")
    expect("SCALARS region")
    expect("LOOKUP_TABLE")
    region = np.empty(nt, dtype=np.uint8)
    for k in range(nt):
        region[k] = int(tokens[k + i])
    i += nt
    mesh = Mesh(
        vertices=vertices,
        triangles=triangles,
        region=region,
        boundary_edges=np.empty((0, 2), dtype=np.int64),
    )
    return mesh, u, alpha


def write_stability_csv(path, reports):
    lines = ["t,check,name,value,threshold,status"]
    for rep in reports:
        for check, value, threshold in (
            ("kkt-elastic", rep.kkt_elastic, ""),
            ("kkt-damage-active", rep.kkt_damage_active, ""),
            ("kkt-damage-inactive", rep.kkt_damage_inactive, ""),
        ):
            lines.append(f"{_fmt(rep.t)},{check},,{_fmt(value)},{threshold},info")
        for name, margin, hard in rep.competitor_margins:
            if hard:
                status = "pass" if margin >= -rep.tol_margin else "fail"
            else:
                status = "info"
            lines.append(
                f"{_fmt(rep.t)},competitor,{name},{_fmt(margin)},"
                f"{_fmt(-rep.tol_margin)},{status}"
            )
    path.write_text("\n".join(lines) + "\n")


def write_korn_csv(path, partition, report, p):
    lines = ["kind,component,area,padding_touch,omega,b1,b2"]
    for label in range(partition.num_components):
        m = report.motions[label]
        lines.append(
            ",".join(
                [
                    "component",
                    str(label),
                    _fmt(partition.component_areas[label]),
                    str(int(partition.padding_touch[label])) if label > 0 else "0",
                    _fmt(m.omega),
                    _fmt(m.b[0]),
                    _fmt(m.b[1]),
                ]
            )
        )
    lines.append("kind,name,value,,,,")
    stats = [
        ("sup_norm_v", report.sup_norm_v),
        ("e_norm", report.e_norm),
        ("added_boundary", report.added_boundary),
        ("ratio_sup", report.ratio_sup),
    ]
    for q, norm in sorted(report.grad_norms.items()):
        stats.append((f"grad_norm_p{q:g}", norm))
    for q, ratio in sorted(report.ratio_grad.items()):
        stats.append((f"ratio_grad_p{q:g}", ratio))
    stats.append(("exponent", float(p)))
    for name, value in stats:
        lines.append(f"norm,{name},{_fmt(value)},,,,")
    path.write_text("\n".join(lines) + "\n")
