"""Serialization: CSV field dumps, JSON reports, and plot-script emission.

CSV schema for matrix fields: header ``x,t,re_<name>_<i><j>,im_<name>_<i><j>,...``
(1-based entry indices), rows in t-major/x-minor order, 17 significant
digits.  Scalar fields use ``x,t,<name>``.  All writes happen after the
values exist, so files are never partial, and the output is byte-identical
across runs.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, is_dataclass

import numpy as np

from .errors import DomainError
from .hierarchy import FieldGrid
from .solitons import ScalarField


def fmt(v) -> str:
    return f"{float(v):.17g}"


def write_matrix_field_csv(path, field: FieldGrid) -> None:
    name = field.name or "field"
    n = field.n
    cols = []
    for i in range(n):
        for j in range(n):
            cols.append(f"re_{name}_{i + 1}{j + 1}")
            cols.append(f"im_{name}_{i + 1}{j + 1}")
    lines = ["x,t," + ",".join(cols)]
    grid = field.grid
    for it, t in enumerate(grid.t_samples):
        for ix, x in enumerate(grid.x):
            entry = field.values[it, ix]
            row = [fmt(x), fmt(t)]
            for i in range(n):
                for j in range(n):
                    row.append(fmt(entry[i, j].real))
                    row.append(fmt(entry[i, j].imag))
            lines.append(",".join(row))
    _write_text(path, "\n".join(lines) + "\n")


def write_scalar_field_csv(path, sf: ScalarField, name: str = "u") -> None:
    lines = [f"x,t,{name}"]
    for it, t in enumerate(sf.grid.t_samples):
        for ix, x in enumerate(sf.grid.x):
            lines.append(f"{fmt(x)},{fmt(t)},{fmt(sf.u[it, ix])}")
    _write_text(path, "\n".join(lines) + "\n")


def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def write_json(path, payload) -> None:
    _write_text(path, json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def _write_text(path, text: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def emit_plot_script(field_files, study_file=None) -> str:
    """Self-contained matplotlib script: u(x) per time sample, plus the
    residual-vs-step log-log lines with fitted slopes when a study file
    is given.  Static PNG output only."""
    field_files = [str(f) for f in field_files]
    for f in field_files:
        if not os.path.exists(f):
            raise DomainError(f"field file does not exist: {f}")
        with open(f) as fh:
            header = fh.readline().strip()
            body = fh.readline()
        if not header.startswith("x,") or not body:
            raise DomainError(f"field file is empty or malformed: {f}")
    if study_file is not None and not os.path.exists(str(study_file)):
        raise DomainError(f"study file does not exist: {study_file}")
    lines = [
        "#!/usr/bin/env python3",
        '"""Auto-generated plotting script (static output)."""',
        "import json",
        "import numpy as np",
        "import matplotlib",
        "matplotlib.use('Agg')",
        "import matplotlib.pyplot as plt",
        "",
        f"field_files = {field_files!r}",
        f"study_file = {str(study_file)!r}" if study_file else "study_file = None",
        "",
        "for path in field_files:",
        "    data = np.genfromtxt(path, delimiter=',', names=True)",
        "    names = data.dtype.names",
        "    value_col = names[2]",
        "    fig, ax = plt.subplots(figsize=(7, 4))",
        "    for t in np.unique(data['t']):",
        "        sel = data['t'] == t",
        "        ax.plot(data['x'][sel], data[value_col][sel], label=f't = {t:g}')",
        "    ax.set_xlabel('x')",
        "    ax.set_ylabel(value_col)",
        "    ax.legend()",
        "    ax.set_title(path)",
        "    out = path.rsplit('.', 1)[0] + '.png'",
        "    fig.savefig(out, dpi=150, bbox_inches='tight')",
        "    plt.close(fig)",
        "    print('wrote', out)",
        "",
        "if study_file:",
        "    with open(study_file) as fh:",
        "        study = json.load(fh)",
        "    fig, ax = plt.subplots(figsize=(6, 4))",
        "    for name, data in sorted(study.items()):",
        "        if not isinstance(data, dict) or 'residuals' not in data:",
        "            continue",
        "        hs = np.asarray(data['dts'], dtype=float)",
        "        rs = np.asarray(data['residuals'], dtype=float)",
        "        slope = np.polyfit(np.log(hs), np.log(rs), 1)[0]",
        "        ax.loglog(hs, rs, 'o-', label=f'{name} (slope {slope:.2f})')",
        "    ax.set_xlabel('time step')",
        "    ax.set_ylabel('residual')",
        "    ax.legend()",
        "    out = study_file.rsplit('.', 1)[0] + '.png'",
        "    fig.savefig(out, dpi=150, bbox_inches='tight')",
        "    plt.close(fig)",
        "    print('wrote', out)",
        "",
    ]
    return "\n".join(lines)
