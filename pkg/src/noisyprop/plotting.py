"""Optional figure rendering for CLI tables (needs matplotlib).

Each ``.dat`` table is drawn as one PNG with the first column on the x-axis
and every other numeric column as a line.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def render_tables(out_dir, tables: dict, title_prefix: str = "") -> list:
    """Write ``<name>.png`` for each ``name -> (columns, rows)`` entry."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .reporting import split_complex

    written = []
    for name, (cols, rows) in sorted(tables.items()):
        header, body = split_complex(cols, rows)
        if not body:
            continue
        data = np.array([[float(v) for v in r] for r in body])
        fig, ax = plt.subplots(figsize=(6, 4))
        for j in range(1, data.shape[1]):
            ax.plot(data[:, 0], data[:, j], marker=".", label=header[j])
        ax.set_xlabel(header[0])
        ax.set_title(f"{title_prefix}{name}")
        ax.legend(fontsize="small")
        fig.tight_layout()
        path = Path(out_dir) / f"{name}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
