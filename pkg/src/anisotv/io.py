"""Field dumps: raw binary with a small text header, and PGM/PBM bitmaps.

Binary layout::

    ANISOTV-FIELD 1
    kind scalar            (or: vector)
    shape 256 256
    components 1
    spacing 0.00390625
    origin 0.0 0.0
    dtype <f8
    end
    <values, C order, little-endian float64><mask, uint8, C order>
"""

from pathlib import Path

import numpy as np

from .exceptions import InvalidInputError
from .grid import GridSpec, ScalarField, VectorField

MAGIC = "ANISOTV-FIELD 1"


def save_field(path, field):
    """Write a scalar or vector field to ``path``."""
    grid = field.grid
    kind = "vector" if isinstance(field, VectorField) else "scalar"
    comps = grid.dim if kind == "vector" else 1
    header = "\n".join([
        MAGIC,
        f"kind {kind}",
        "shape " + " ".join(str(n) for n in grid.shape),
        f"components {comps}",
        f"spacing {grid.spacing!r}",
        "origin " + " ".join(repr(o) for o in grid.origin),
        "dtype <f8",
        "end",
    ]) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(grid.mask, dtype=np.uint8).tobytes())


def load_field(path):
    """Read a field written by :func:`save_field`."""
    data = Path(path).read_bytes()
    meta = {}
    pos = 0
    first = True
    while True:
        end = data.index(b"\n", pos)
        line = data[pos:end].decode("ascii")
        pos = end + 1
        if first:
            if line != MAGIC:
                raise InvalidInputError(f"{path}: not an anisotv field dump")
            first = False
            continue
        if line == "end":
            break
        key, _, rest = line.partition(" ")
        meta[key] = rest.split()
    shape = tuple(int(n) for n in meta["shape"])
    comps = int(meta["components"][0])
    spacing = float(meta["spacing"][0])
    origin = tuple(float(o) for o in meta["origin"])
    n_values = comps * int(np.prod(shape))
    values = np.frombuffer(data, dtype="<f8", count=n_values, offset=pos)
    mask = np.frombuffer(data, dtype=np.uint8, count=int(np.prod(shape)), offset=pos + 8 * n_values)
    grid = GridSpec(shape, spacing, origin, mask.reshape(shape).astype(bool))
    if meta["kind"][0] == "vector":
        return VectorField(grid, values.reshape((comps,) + shape).copy())
    return ScalarField(grid, values.reshape(shape).copy())


def _image_rows(arr):
    # first array axis is x; image rows run top-down in y
    return np.flipud(np.asarray(arr).T)


def write_pgm(path, field):
    """Binary PGM (P5) of a 2-d scalar field, min-max scaled to 0..255."""
    if field.grid.dim != 2:
        raise InvalidInputError("PGM export needs a 2-d field")
    v = np.where(field.grid.mask, field.values, np.nan)
    lo, hi = np.nanmin(v), np.nanmax(v)
    scaled = np.zeros_like(v) if hi == lo else (v - lo) / (hi - lo)
    img = np.nan_to_num(scaled, nan=0.0)
    img = _image_rows(np.round(255 * img).astype(np.uint8))
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def write_pbm(path, mask):
    """Plain PBM (P1) of a 2-d boolean mask; set cells are black."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise InvalidInputError("PBM export needs a 2-d mask")
    img = _image_rows(mask.astype(np.uint8))
    lines = [f"P1\n{img.shape[1]} {img.shape[0]}"]
    for row in img:
        lines.append(" ".join(str(int(b)) for b in row))
    Path(path).write_text("\n".join(lines) + "\n")
