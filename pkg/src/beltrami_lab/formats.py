"""On-disk formats: QCBF1 binary fields, point-cloud CSV, report CSV.

All writers go through :func:`atomic_write`, so interrupted runs never
leave partial artifacts behind.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import ComplexField, GridSpec

QCBF_MAGIC = b"QCBF1\x00"

REPORT_COLUMNS = ("experiment", "param", "K", "p", "set", "generation",
                  "dim_source", "dim_image", "bound", "pass")


def atomic_write(path, data: bytes) -> None:
    """Write bytes to path via a temp file in the same directory + rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write(path, text.encode("utf-8"))


# -- QCBF1 binary field format ----------------------------------------------

def field_to_bytes(field: ComplexField) -> bytes:
    header = QCBF_MAGIC + struct.pack("<I", field.grid.resolution) \
        + struct.pack("<d", field.grid.half_extent)
    payload = np.ascontiguousarray(field.samples, dtype="<c16").tobytes()
    return header + payload


def write_field_qcbf(field: ComplexField, path) -> None:
    atomic_write(path, field_to_bytes(field))


def read_field_qcbf(path) -> ComplexField:
    data = Path(path).read_bytes()
    if len(data) < len(QCBF_MAGIC) + 12 or data[: len(QCBF_MAGIC)] != QCBF_MAGIC:
        raise ValueError(f"{path}: not a QCBF1 field (bad magic)")
    off = len(QCBF_MAGIC)
    (n,) = struct.unpack_from("<I", data, off)
    (half_extent,) = struct.unpack_from("<d", data, off + 4)
    off += 12
    expected = n * n * 16
    if len(data) - off != expected:
        raise ValueError(f"{path}: payload size {len(data) - off} != {expected} for N={n}")
    samples = np.frombuffer(data, dtype="<c16", count=n * n, offset=off).reshape(n, n)
    if not np.all(np.isfinite(samples.view(np.float64))):
        raise ValueError(f"{path}: non-finite payload rejected")
    return ComplexField(GridSpec(n, half_extent), samples.astype(np.complex128))


# -- point-cloud CSV ----------------------------------------------------------

def cloud_to_csv(points: np.ndarray) -> str:
    lines = ["re,im"]
    for z in points:
        lines.append(f"{z.real:.17g},{z.imag:.17g}")
    return "\n".join(lines) + "\n"


def write_cloud_csv(points: np.ndarray, path) -> None:
    atomic_write_text(path, cloud_to_csv(points))


def read_cloud_csv(path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].replace(" ", "") != "re,im":
        raise ValueError(f"{path}: expected 're,im' header")
    pts = []
    for ln in lines[1:]:
        re_s, im_s = ln.split(",")
        pts.append(complex(float(re_s), float(im_s)))
    out = np.asarray(pts, dtype=np.complex128)
    if out.size and not np.all(np.isfinite(out.view(np.float64))):
        raise ValueError(f"{path}: non-finite points rejected")
    return out


# -- experiment report CSV -----------------------------------------------------

def _format_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    if v is None:
        return ""
    return str(v)


def report_to_csv(rows: Iterable[Sequence]) -> str:
    lines = [",".join(REPORT_COLUMNS)]
    for row in rows:
        if len(row) != len(REPORT_COLUMNS):
            raise ValueError(f"report row must have {len(REPORT_COLUMNS)} cells, got {len(row)}")
        lines.append(",".join(_format_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def write_report_csv(rows: Iterable[Sequence], path) -> None:
    atomic_write_text(path, report_to_csv(rows))


# -- generic curve CSV (plot data) --------------------------------------------

def write_curve_csv(path, columns: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(f"{float(v):.17g}" for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")
