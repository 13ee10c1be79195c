"""report.json assembly, network records and the networks.csv polyline export.

Reports are plain dicts built in a fixed key order and serialised with
``json.dumps``; no timestamps or timings are stored, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from . import __version__, shooting
from .errors import GeonetError
from .stiefel import FramePoint

SCHEMA = "geonet.report/1"
CONTEXT_LABEL = "paper-asserted, not computed"


def context_block(space, dim):
    """Multiplicity constants for the report; quoted, never computed."""
    if space == "ball":
        cat = 4 if dim in (2, 3) else 3
        count = 2 if dim == 2 else cat
        return {"label": CONTEXT_LABEL, "manifold": f"V_2(R^{dim})", "category": cat,
                "category_note": "equality for d = 2, 3; value 3 for d >= 4",
                "minimal_triods_lower_bound": count,
                "count_note": "d = 2: category / 2 (two components); d >= 3: category"}
    if dim == 2:
        cat, cat_note, count = 8, "equal to 8", 4
    elif dim in (3, 4):
        cat, cat_note, count = 5, "at least 5", 5
    else:
        cat, cat_note, count = 4, "equal to 4", 4
    return {"label": CONTEXT_LABEL, "manifold": f"V_3(R^{dim + 1})", "category": cat,
            "category_note": cat_note, "theta_networks_lower_bound": count,
            "count_note": "d = 2: category / 2 (two components); d >= 3: category"}


def _floats(a):
    return [float(v) for v in np.ravel(a)]


def network_record(space, network):
    """Initial-value description of each edge, enough to re-integrate it exactly."""
    if space == "ball":
        x = network.junction
        edges = [{"edge_id": j, "start": _floats(x), "direction": _floats(network.u[j]),
                  "length": float(network.lengths[j])} for j in range(3)]
        return {"junctions": [_floats(x)], "edges": edges}
    x, y = network.junctions
    edges = [{"edge_id": j, "start": _floats(x), "direction": _floats(network.u[j]),
              "k0": _floats(network.k0[j]), "length": float(network.lengths[j])} for j in range(3)]
    return {"junctions": [_floats(x), _floats(y)], "edges": edges}


def class_table(reports):
    table = {}
    for r in reports:
        if r.converged and r.class_id is not None:
            entry = table.setdefault(r.class_id, {"class_id": r.class_id, "value": r.value,
                                                  "inertia": r.inertia, "representative": r.start,
                                                  "members": 0})
            entry["members"] += 1
    return [table[k] for k in sorted(table)]


def build_report(command, config, reports, class_count):
    results = []
    for r in sorted(reports, key=lambda r: r.start):
        item = r.to_dict()
        item["network"] = None if r.network is None else network_record(config.space, r.network)
        results.append(item)
    verified = sum(1 for r in reports if r.converged and r.verification is not None and r.verification.passed)
    return {
        "schema": SCHEMA,
        "tool": {"name": "geonet", "version": __version__},
        "command": command,
        "config": config.to_dict(),
        "summary": {"starts": len(reports), "converged": sum(r.converged for r in reports),
                    "verified": verified, "failed": sum(not r.converged for r in reports),
                    "classes": class_count},
        "classes": class_table(reports),
        "results": results,
        "context": context_block(config.space, config.dim),
    }


def dumps(report):
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def write_report(report, path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(report))


def load_report(path):
    with open(path) as fh:
        data = json.load(fh)
    if data.get("schema") != SCHEMA:
        raise GeonetError(f"{path}: unsupported report schema {data.get('schema')!r}")
    return data


# ---------------------------------------------------------------- rebuilding and export


def rebuild_network(metric, result, mesh_steps):
    """Reconstruct a network from a converged result's canonical frame and junctions."""
    from .ball import TriodParam, build_triod
    from .sphere import ThetaParam, build_theta

    if result.get("frame") is None or result.get("junctions") is None:
        raise GeonetError(f"result {result.get('start')} has no frame/junction data")
    frame = FramePoint(np.array(result["frame"], dtype=float).T)
    junctions = [np.array(j, dtype=float) for j in result["junctions"]]
    if metric.space == "ball":
        return build_triod(metric, TriodParam(junctions[0], frame), mesh_steps)
    return build_theta(metric, ThetaParam(frame, junctions[1]), mesh_steps)


def edge_polyline(metric, edge, resolution, min_steps=None):
    """R + 1 points of an edge at arclengths s = L i / R, from its initial-value record."""
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    for key in ("start", "direction", "length"):
        if key not in edge:
            raise GeonetError(f"edge {edge.get('edge_id')} lacks trajectory data ({key!r})")
    length = float(edge["length"])
    x, u = np.array(edge["start"]), np.array(edge["direction"])
    if min_steps is None:
        min_steps = shooting.BALL_MESH if metric.space == "ball" else shooting.SPHERE_MESH
    sub = max(1, math.ceil(min_steps / resolution))
    n = resolution * sub
    if metric.space == "ball":
        Y = shooting.ball_mesh(metric, x, u, length, n)
        pts = Y[:, :metric.dim]
    else:
        if "k0" not in edge:
            raise GeonetError(f"edge {edge.get('edge_id')} lacks its curvature vector")
        traj = shooting.shoot_constant_curvature(metric, x, u, np.array(edge["k0"]), length,
                                                 n_steps=n, check=False)
        pts = traj.gamma
    s = np.linspace(0.0, length, resolution + 1)
    return s, pts[::sub]


def export_polylines(report, metric, resolution):
    """CSV text with columns network_id, edge_id, s, x_0..x_{n-1}; 12 decimals."""
    rows = [r for r in report["results"] if r.get("status") == "converged"]
    if not rows:
        raise GeonetError("report has no converged networks to export")
    n = metric.ambient_dim
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["network_id", "edge_id", "s"] + [f"x_{i}" for i in range(n)])
    for r in rows:
        net = r.get("network")
        if not net or not net.get("edges"):
            raise GeonetError(f"result {r.get('start')} has no trajectory data")
        for edge in net["edges"]:
            s, pts = edge_polyline(metric, edge, resolution)
            for si, p in zip(s, pts):
                w.writerow([r["start"], edge["edge_id"], f"{si:.12f}"] + [f"{v:.12f}" for v in p])
    return buf.getvalue()
