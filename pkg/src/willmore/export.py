"""Writers for meshes (OBJ), node tables (CSV) and JSON reports."""

from __future__ import annotations

import csv
import io
import json
import math
from importlib import resources

import numpy as np

from . import __version__
from .calculus import form_magnitude
from .mcs import SurfaceChart
from .tolerances import TABLE_VERSION


def _faces(chart):
    nx, ny = chart.shape
    cx = nx if chart.periodic[0] else nx - 1
    cy = ny if chart.periodic[1] else ny - 1
    idx = lambda i, j: (i % nx) * ny + (j % ny) + 1  # noqa: E731  (OBJ is 1-based)
    for i in range(cx):
        for j in range(cy):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            yield a, b, c
            yield a, c, d


def obj_text(s: SurfaceChart) -> str:
    """Vertices are the (1, i, j) coordinates of ``g``; ``k`` goes in ``#k`` comment lines."""
    g = s.g.reshape(-1, 4)
    out = io.StringIO()
    out.write(f"# willmore {__version__} surface {s.name}\n")
    out.write(f"# grid {s.chart.nx} x {s.chart.ny}, periodic {s.chart.periodic[0]} {s.chart.periodic[1]}\n")
    for w, x, y, z in g:
        out.write(f"v {w!r} {x!r} {y!r}\n")
        out.write(f"#k {z!r}\n")
    for a, b, c in _faces(s.chart):
        out.write(f"f {a} {b} {c}\n")
    return out.getvalue()


CSV_HEADER = (
    ["u", "v"]
    + [f"g_{c}" for c in "1ijk"]
    + [f"N_{c}" for c in "1ijk"]
    + [f"R_{c}" for c in "1ijk"]
    + [f"H_{c}" for c in "1ijk"]
    + ["abs_A", "abs_Q"]
)


def csv_text(s: SurfaceChart) -> str:
    """One row per node: ``u, v, g, N, R, H`` (4 reals each), ``|A|``, ``|Q|``."""
    u, v = s.chart.coords()
    cols = [u[..., None], v[..., None], s.g, s.N, s.R, s.H, form_magnitude(s.A)[..., None], form_magnitude(s.Q)[..., None]]
    table = np.concatenate(cols, axis=-1).reshape(-1, len(CSV_HEADER))
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in table:
        w.writerow([repr(float(x)) for x in row])
    return out.getvalue()


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def build_report(surface: str, resolution: int, results: dict, residuals: dict, seed: int, command: str = "", threads: int = 1) -> dict:
    rep = {
        "surface": surface,
        "resolution": int(resolution),
        "results": _clean(results),
        "residuals": _clean(residuals),
        "provenance": {"version": __version__, "seed": int(seed), "tolerance_table": TABLE_VERSION, "threads": int(threads)},
    }
    if command:
        rep["command"] = command
    return rep


def dumps(report: dict) -> str:
    """Canonical serialisation: sorted keys, fixed indentation, shortest float repr."""
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def load_schema() -> dict:
    return json.loads(resources.files("willmore").joinpath("schema/report.schema.json").read_text())


def validate_report(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``report`` does not match the shipped schema."""
    import jsonschema

    jsonschema.validate(report, load_schema())
