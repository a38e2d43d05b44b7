"""Reader/writer for a small NRRD subset.

Supported: magic ``NRRD0004`` (older versions are read too), ``type`` short or
float, ``dimension: 3``, diagonal ``space directions``, ``space origin``,
``encoding`` raw or gzip, little-endian, attached header.
"""
from __future__ import annotations

import gzip
import os
import re

import numpy as np

from .volume import Mask, Volume

_TYPES = {
    "short": "<i2", "short int": "<i2", "signed short": "<i2", "signed short int": "<i2",
    "int16": "<i2", "int16_t": "<i2",
    "float": "<f4",
}


class NRRDError(ValueError):
    pass


def _parse_vector(text):
    m = re.fullmatch(r"\s*\(([^)]*)\)\s*", text)
    if not m:
        raise NRRDError(f"malformed vector {text!r}")
    try:
        return [float(x) for x in m.group(1).split(",")]
    except ValueError as exc:
        raise NRRDError(f"malformed vector {text!r}") from exc


def read_header(fh):
    magic = fh.readline().decode("ascii", "replace").strip()
    if not magic.startswith("NRRD000"):
        raise NRRDError(f"not an NRRD file (magic {magic!r})")
    fields = {}
    lineno = 1
    while True:
        raw = fh.readline()
        lineno += 1
        if not raw:
            raise NRRDError("header not terminated by a blank line")
        line = raw.decode("ascii", "replace").rstrip("\r\n")
        if line == "":
            break
        if line.startswith("#"):
            continue
        if ":=" in line:
            continue  # key/value pairs carry no geometry
        if ": " not in line:
            raise NRRDError(f"malformed header line {lineno}: {line!r}")
        key, value = line.split(": ", 1)
        fields[key.strip().lower()] = value.strip()
    return fields


def _geometry(fields):
    try:
        dim = int(fields["dimension"])
    except (KeyError, ValueError) as exc:
        raise NRRDError("missing or malformed 'dimension'") from exc
    if dim != 3:
        raise NRRDError(f"dimension ≠ 3 (got {dim})")
    try:
        sizes = [int(s) for s in fields["sizes"].split()]
    except (KeyError, ValueError) as exc:
        raise NRRDError("missing or malformed 'sizes'") from exc
    if len(sizes) != 3 or min(sizes) < 1:
        raise NRRDError(f"bad sizes {sizes}")

    if "space directions" in fields:
        vecs = re.findall(r"\([^)]*\)", fields["space directions"])
        if len(vecs) != 3:
            raise NRRDError("'space directions' must hold 3 vectors")
        mat = np.array([_parse_vector(v) for v in vecs])
        if mat.shape != (3, 3):
            raise NRRDError("'space directions' vectors must have 3 components")
        if np.any(mat[~np.eye(3, dtype=bool)] != 0):
            raise NRRDError("non-diagonal direction matrix is not supported")
        spacing = tuple(float(x) for x in np.diag(mat))
        if any(s <= 0 for s in spacing):
            raise NRRDError(f"non-positive spacing {spacing} (flipped axes are not supported)")
    elif "spacings" in fields:
        spacing = tuple(float(s) for s in fields["spacings"].split())
    else:
        spacing = (1.0, 1.0, 1.0)

    origin = tuple(_parse_vector(fields["space origin"])) if "space origin" in fields else (0.0, 0.0, 0.0)
    if len(origin) != 3:
        raise NRRDError("'space origin' must have 3 components")
    return tuple(sizes), spacing, origin


def read_array(path):
    """Return ``(array zyx, spacing, origin)`` from an NRRD file."""
    with open(path, "rb") as fh:
        fields = read_header(fh)
        payload = fh.read()
    sizes, spacing, origin = _geometry(fields)

    type_name = fields.get("type", "").lower()
    if type_name not in _TYPES:
        raise NRRDError(f"unsupported element type {type_name!r}")
    dtype = np.dtype(_TYPES[type_name])
    if fields.get("endian", "little").lower() != "little":
        raise NRRDError("only little-endian data is supported")
    encoding = fields.get("encoding", "raw").lower()
    if encoding in ("gz", "gzip"):
        payload = gzip.decompress(payload)
    elif encoding != "raw":
        raise NRRDError(f"unsupported encoding {encoding!r}")
    if "data file" in fields or "datafile" in fields:
        raise NRRDError("detached data files are not supported")

    n = sizes[0] * sizes[1] * sizes[2]
    if len(payload) != n * dtype.itemsize:
        raise NRRDError(f"data section holds {len(payload)} bytes, expected {n * dtype.itemsize}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(sizes[2], sizes[1], sizes[0])
    return arr, spacing, origin


def load_volume(path):
    arr, spacing, origin = read_array(path)
    return Volume(arr.astype(np.float64), spacing, origin)


def load_mask(path):
    arr, spacing, origin = read_array(path)
    return Mask(arr != 0, spacing, origin)


def _fmt(x):
    return repr(float(x))


def _write(path, arr, type_name, spacing, origin, encoding):
    nz, ny, nx = arr.shape
    sx, sy, sz = spacing
    header = [
        "NRRD0004",
        f"type: {type_name}",
        "dimension: 3",
        "space: left-posterior-superior",
        f"sizes: {nx} {ny} {nz}",
        f"space directions: ({_fmt(sx)},0,0) (0,{_fmt(sy)},0) (0,0,{_fmt(sz)})",
        "kinds: domain domain domain",
        "endian: little",
        f"encoding: {encoding}",
        "space origin: (" + ",".join(_fmt(o) for o in origin) + ")",
    ]
    payload = np.ascontiguousarray(arr).tobytes()
    if encoding == "gzip":
        payload = gzip.compress(payload, mtime=0)
    elif encoding != "raw":
        raise NRRDError(f"unsupported encoding {encoding!r}")
    tmp = f"{path}.part"
    with open(tmp, "wb") as fh:
        fh.write(("\n".join(header) + "\n\n").encode("ascii"))
        fh.write(payload)
    os.replace(tmp, path)


def save_volume(v, path, encoding="raw"):
    """Write a Volume as little-endian float32."""
    if not np.all(np.isfinite(v.array)):
        raise ValueError("non-finite data")
    _write(path, v.array.astype("<f4"), "float", v.spacing, v.origin, encoding)


def save_mask(m, path, encoding="gzip"):
    _write(path, m.array.astype("<i2"), "short", m.spacing, m.origin, encoding)
