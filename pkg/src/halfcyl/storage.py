"""Import/export: sections as CSV or columnar npz, grids and operators as JSON."""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .spectral import EigenSystem
from .cylinder import CylinderGrid, CylinderSection

SECTION_CSV_HEADER = ["t_index", "eigen_index", "re", "im"]


def section_to_csv(section: CylinderSection, path=None) -> str:
    """Write a section as rows (t_index, eigen_index, re, im)."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(SECTION_CSV_HEADER)
    nt, n = section.values.shape
    for i in range(nt):
        for j in range(n):
            z = section.values[i, j]
            writer.writerow([i, j, repr(float(z.real)), repr(float(z.imag))])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def section_from_csv(grid: CylinderGrid, source) -> CylinderSection:
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source) as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    if rows[0] != SECTION_CSV_HEADER:
        raise ValueError(f"unexpected CSV header {rows[0]}")
    vals = np.zeros((grid.nt, grid.base.dimension), dtype=complex)
    for i_s, j_s, re_s, im_s in rows[1:]:
        vals[int(i_s), int(j_s)] = float(re_s) + 1j * float(im_s)
    return CylinderSection(vals, grid)


def section_to_npz(section: CylinderSection, path) -> None:
    """Columnar binary format: one array per column."""
    np.savez_compressed(
        path,
        re=np.real(section.values),
        im=np.imag(section.values),
        times=section.grid.times,
    )


def section_from_npz(grid: CylinderGrid, path) -> CylinderSection:
    data = np.load(path)
    return CylinderSection(data["re"] + 1j * data["im"], grid)


def grid_to_json(grid: CylinderGrid) -> dict:
    return {
        "T": grid.T,
        "nt": grid.nt,
        "eigenvalues": grid.base.eigenvalues.tolist(),
    }


def grid_from_json(doc: dict, base: EigenSystem | None = None) -> CylinderGrid:
    if base is None:
        base = EigenSystem.from_eigenvalues(doc["eigenvalues"])
    return CylinderGrid(doc["T"], int(doc["nt"]), base)


def operator_from_json(doc: dict) -> EigenSystem:
    """Build an operator from ``{"kind": ..., "data": ...}``.

    Kinds: ``dense`` (data.matrix, optionally data.matrix_im), ``diagonal``
    (data.eigenvalues), ``circle_dirac`` (data.N, data.shift,
    data.potential as samples or expression string).
    """
    kind = doc.get("kind")
    data = doc.get("data", {})
    if kind == "dense":
        mat = np.asarray(data["matrix"], dtype=complex)
        if "matrix_im" in data:
            mat = mat + 1j * np.asarray(data["matrix_im"])
        return EigenSystem.from_matrix(mat)
    if kind == "diagonal":
        return EigenSystem.from_eigenvalues(data["eigenvalues"])
    if kind == "circle_dirac":
        from .dirac import CircleDiracSpec, circle_dirac

        spec = CircleDiracSpec(int(data["N"]), float(data.get("shift", 0.0)),
                               data.get("potential"))
        return circle_dirac(spec)
    raise ValueError(f"unknown operator kind {kind!r}")


def dump_json(doc: dict, path) -> None:
    """Deterministic JSON: sorted keys, repr floats, trailing newline."""
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1, default=_coerce)
        fh.write("\n")


def _coerce(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj)}")
