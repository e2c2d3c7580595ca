"""Bit-exact grayscale heatmaps of court surfaces.

Binary portable graymaps only: no palette, no compression, nothing that
could vary across platforms.  A surface renders identically everywhere,
which keeps image artifacts usable in byte-comparison tests.
"""

from __future__ import annotations

import os

import numpy as np

from .court import CourtGrid
from .lgcp import read_surface_csv


def render_heatmap(values: np.ndarray, grid: CourtGrid, path) -> None:
    """Write one surface as a binary graymap (P5).

    Image width is the tile count along x, height along y; row 0 is the
    row of tiles nearest the baseline.  Pixels scale the value range to
    0..255; a constant surface renders all-zero.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (grid.n_tiles,):
        raise ValueError(
            f"surface has {values.size} values, grid has {grid.n_tiles} tiles"
        )
    lo, hi = values.min(), values.max()
    if hi > lo:
        pixels = np.rint(255.0 * (values - lo) / (hi - lo)).astype(np.uint8)
    else:
        pixels = np.zeros(grid.n_tiles, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{grid.nx} {grid.ny}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())


def read_heatmap(path) -> np.ndarray:
    """Read back a P5 graymap written by render_heatmap, as a (ny, nx) array."""
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"P5":
            raise ValueError(f"not a binary graymap: magic {magic!r}")
        nx, ny = (int(t) for t in f.readline().split())
        maxval = int(f.readline())
        if maxval != 255:
            raise ValueError(f"unsupported maxval {maxval}")
        data = f.read(nx * ny)
    if len(data) != nx * ny:
        raise ValueError("truncated pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(ny, nx)


def render_surface_csv(csv_path, out_dir) -> list:
    """Render every row of a shared-format surface CSV to <out>/<id>.pgm."""
    ids, matrix, grid = read_surface_csv(csv_path)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, row in zip(ids, matrix):
        safe = "".join(c if (c.isalnum() or c in "-_") else "_" for c in name)
        path = os.path.join(out_dir, f"{safe}.pgm")
        render_heatmap(row, grid, path)
        paths.append(path)
    return paths
