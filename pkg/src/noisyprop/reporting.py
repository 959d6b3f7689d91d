"""Output writers shared by the CLI commands.

``report.json`` keeps everything that depends on wall-clock time inside the
``header`` object, so two runs with the same configuration differ only there.
CSV and ``.dat`` floats use ``repr``, which is the shortest string that
parses back to the same double.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
from importlib import metadata
from pathlib import Path

import numpy as np


def version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        from . import __version__

        return __version__


def jsonable(obj):
    """Recursively convert numpy and complex values; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": jsonable(float(obj.real)), "im": jsonable(float(obj.imag))}
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def split_complex(columns: list, rows: list) -> tuple:
    """Expand complex cells into ``<name>_re``/``<name>_im`` column pairs."""
    if not rows:
        return list(columns), []
    is_c = [any(isinstance(r[i], (complex, np.complexfloating)) for r in rows) for i in range(len(columns))]
    header = []
    for name, c in zip(columns, is_c):
        header += [f"{name}_re", f"{name}_im"] if c else [name]
    out = []
    for r in rows:
        row = []
        for v, c in zip(r, is_c):
            if c:
                z = complex(v)
                row += [z.real, z.imag]
            else:
                row.append(v)
        out.append(row)
    return header, out


def render_json(command: str, config: dict, results: dict, timestamp: str | None = None) -> str:
    if timestamp is None:
        timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat()
    doc = {
        "header": {"timestamp": timestamp, "version": version()},
        "command": command,
        "config": config,
        "version": version(),
        "results": results,
    }
    return json.dumps(jsonable(doc), sort_keys=True, indent=2) + "\n"


def render_csv(config: dict, columns: list, rows: list) -> str:
    header, body = split_complex(columns, rows)
    buf = io.StringIO()
    buf.write(f"# version: {version()}\n")
    buf.write(f"# config: {json.dumps(jsonable(config), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in body:
        w.writerow([format_value(v) for v in r])
    return buf.getvalue()


def render_dat(config: dict, columns: list, rows: list) -> str:
    header, body = split_complex(columns, rows)
    lines = [
        f"# version: {version()}",
        f"# config: {json.dumps(jsonable(config), sort_keys=True)}",
        "# " + " ".join(header),
    ]
    lines += [" ".join(format_value(v) for v in r) for r in body]
    return "\n".join(lines) + "\n"


def write_outputs(out_dir: Path, command: str, config: dict, results: dict,
                  columns: list, rows: list, dat: dict | None = None) -> list:
    """Write ``report.json``, ``summary.csv`` and any ``name -> (columns, rows)`` .dat tables."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    p = out_dir / "report.json"
    p.write_text(render_json(command, config, results))
    written.append(p)
    p = out_dir / "summary.csv"
    p.write_text(render_csv(config, columns, rows))
    written.append(p)
    for name, (cols, rs) in sorted((dat or {}).items()):
        p = out_dir / f"{name}.dat"
        p.write_text(render_dat(config, cols, rs))
        written.append(p)
    return written


def read_csv(path) -> tuple:
    """Parse a ``summary.csv`` back into ``(header, rows)`` with floats where possible."""
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    rows = []
    for r in reader:
        row = []
        for v in r:
            try:
                row.append(float(v))
            except ValueError:
                row.append(v)
        rows.append(row)
    return header, rows
