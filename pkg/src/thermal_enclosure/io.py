"""CSV/JSON serialization.  Every file starts with the configuration hash so
artifacts from different runs cannot be mixed silently.  Floats are written
with 17 significant digits, which round-trips exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .forward_heat import BoundaryTrace


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if np.isfinite(v) else str(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows, config_hash=""):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# config_hash: {config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    """Return ``(config_hash, header, rows)`` with rows as lists of strings."""
    with Path(path).open(newline="") as fh:
        first = fh.readline()
        if not first.startswith("# config_hash:"):
            raise ConfigurationError(f"{path} has no config hash header")
        chash = first.split(":", 1)[1].strip()
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return chash, header, rows


def write_json(path, payload, config_hash=""):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"config_hash": config_hash, **payload}
    path.write_text(json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# --------------------------------------------------------------------------- traces


def trace_header(dim):
    axes = "xyz"[:dim]
    return ["facet_id", *axes, *("n" + a for a in axes), "measure", "t", "u", "f"]


def trace_rows(trace: BoundaryTrace):
    grid = trace.grid
    scale = float(np.exp(trace.log_scale))
    t = grid.times
    for f in range(grid.n_facets):
        head = [f, *grid.facet_center[f], *grid.facet_normal[f], grid.facet_measure[f]]
        for k in range(grid.n_t + 1):
            yield [*head, t[k], trace.u[f, k] * scale, trace.f[f, k] * scale]


def write_trace_csv(path, trace: BoundaryTrace, config_hash=""):
    return write_csv(path, trace_header(trace.grid.dim), trace_rows(trace), config_hash)


def read_trace_csv(path):
    """Load a trace CSV into arrays ``(facet_id, centers, normals, measure, t, u, f)``."""
    chash, header, rows = read_csv(path)
    arr = np.array(rows, dtype=float)
    dim = (len(header) - 5) // 2
    fid = arr[:, 0].astype(int)
    nf = fid.max() + 1
    nt = len(arr) // nf
    arr = arr.reshape(nf, nt, -1)
    return {
        "config_hash": chash,
        "facet_id": fid.reshape(nf, nt)[:, 0],
        "center": arr[:, 0, 1:1 + dim],
        "normal": arr[:, 0, 1 + dim:1 + 2 * dim],
        "measure": arr[:, 0, 1 + 2 * dim],
        "t": arr[0, :, 2 + 2 * dim],
        "u": arr[:, :, 3 + 2 * dim],
        "f": arr[:, :, 4 + 2 * dim],
    }


def write_transformed_csv(path, transforms, config_hash=""):
    rows = []
    for tt in transforms:
        scale = float(np.exp(tt.log_scale))
        rows.extend([f, tt.tau, tt.w[f] * scale, tt.g[f] * scale] for f in range(len(tt.w)))
    return write_csv(path, ["facet_id", "tau", "w", "g"], rows, config_hash)


def write_indicator_csv(path, samples, config_hash=""):
    rows = [[s.tau, s.sign, s.log_abs, s.theorem, s.guard] for s in samples]
    return write_csv(path, ["tau", "sign", "log_abs_I", "theorem", "guard"], rows, config_hash)


def write_layer_csv(path, density, config_hash=""):
    rows = [[s, *node, psi] for s, node, psi in zip(np.atleast_1d(density.param[:, 0] if density.dim == 3
                                                                   else density.param),
                                                      density.nodes, density.psi)]
    axes = ["node_x", "node_y", "node_z"][:density.dim]
    return write_csv(path, ["s", *axes, "psi"], rows, config_hash)


def write_checks_csv(path, checks, config_hash=""):
    rows = [row for c in checks for row in c.rows()]
    return write_csv(path, ["name", "tau", "scaled_value", "verdict"], rows, config_hash)
