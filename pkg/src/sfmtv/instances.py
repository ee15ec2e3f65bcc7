"""Grid instances and file formats.

Grids of shape (H, W) or (H, W, D) are flattened in C order, so element
``(h, x, d)`` has index ``(h * W + x) * D + d`` and every depth column is a
contiguous run. Formats:

* graph file: first line ``n m``, then ``m`` lines ``i j weight`` (0-indexed);
* image: ASCII PGM (P2);
* volume: text file listing one P2 slice per line (relative paths allowed);
  slice k is depth k;
* region labels: one integer per element, negative meaning "no region".
"""

from __future__ import annotations

import os
from typing import Optional, Sequence, Tuple

import numpy as np

from .oracles import ChainFunction, ConcaveCardinalityFunction, CutFunction


def grid_edges(shape: Sequence[int], axes: Optional[Sequence[int]] = None):
    """Nearest-neighbour edges of a grid along the given axes (default: all)."""
    shape = tuple(int(d) for d in shape)
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    axes = range(len(shape)) if axes is None else axes
    ei, ej = [], []
    for ax in axes:
        if shape[ax] < 2:
            continue
        lo = [slice(None)] * len(shape)
        hi = [slice(None)] * len(shape)
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        ei.append(idx[tuple(lo)].ravel())
        ej.append(idx[tuple(hi)].ravel())
    if not ei:
        return np.zeros(0, np.intp), np.zeros(0, np.intp)
    return np.concatenate(ei), np.concatenate(ej)


def grid_cut(shape, lam: float = 1.0):
    """lam times the anisotropic TV of a 2D or 3D grid as a cut function.

    A grid with a single non-trivial axis becomes a :class:`ChainFunction`.
    """
    shape = tuple(int(d) for d in shape)
    n = int(np.prod(shape))
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    long_axes = [d for d in shape if d > 1]
    if len(long_axes) <= 1:
        return ChainFunction(n, [np.arange(n)], lam)
    ei, ej = grid_edges(shape)
    return CutFunction(n, ei, ej, np.full(ei.size, float(lam)))


def volume_split(shape, lam: float = 1.0) -> Tuple[CutFunction, ChainFunction]:
    """Split the 3D grid cut into per-slice 2D cuts and depth chains.

    F1 carries the in-slice edges (axes 0 and 1), F2 the edges along depth,
    so F1 + F2 is exactly the full 3D cut.
    """
    H, W, D = (int(d) for d in shape)
    n = H * W * D
    ei, ej = grid_edges((H, W, D), axes=(0, 1))
    F1 = CutFunction(n, ei, ej, np.full(ei.size, float(lam)))
    chains = np.arange(n).reshape(H * W, D)
    F2 = ChainFunction(n, list(chains), lam)
    return F1, F2


def unary_from_image(img, center: float = 128.0, scale: float = 64.0) -> np.ndarray:
    """u = (I - center) / scale, flattened in C order."""
    return (np.asarray(img, dtype=float).ravel() - center) / scale


def build_grid(shape, lam: float = 1.0, data=None, decompose: bool = False,
               center: float = 128.0, scale: float = 64.0):
    """Grid TV instance: returns (F, u), or ((F1, F2), u) with ``decompose``.

    ``data`` holds pixel or voxel intensities of the given shape (default:
    zeros, so u = 0 after centering by ``center``).
    """
    shape = tuple(int(d) for d in shape)
    if data is None:
        u = np.zeros(int(np.prod(shape)))
    else:
        data = np.asarray(data, dtype=float)
        if data.shape != shape:
            raise ValueError(f"data has shape {data.shape}, expected {shape}")
        u = unary_from_image(data, center, scale)
    if decompose:
        if len(shape) != 3:
            raise ValueError("decomposition needs a 3D grid (H, W, D)")
        return volume_split(shape, lam), u
    return grid_cut(shape, lam), u


def regions_function(labels, profile=None) -> ConcaveCardinalityFunction:
    """Concave-of-cardinality function over the regions of a label vector.

    ``profile(size)`` returns the table g(0..size); default g(k) = k (size - k).
    """
    labels = np.asarray(labels, dtype=np.intp).ravel()
    ids = np.unique(labels[labels >= 0])
    regions = [np.flatnonzero(labels == r) for r in ids]
    profiles = None if profile is None else [profile(len(r)) for r in regions]
    return ConcaveCardinalityFunction(labels.size, regions, profiles)


# ---------------------------------------------------------------- file formats

def _tokens(path):
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0]
            yield from line.split()


def read_pgm(path) -> np.ndarray:
    tok = _tokens(path)
    if next(tok) != "P2":
        raise ValueError(f"{path}: not an ASCII PGM (P2) file")
    width, height = int(next(tok)), int(next(tok))
    next(tok)  # maxval
    vals = np.array([float(t) for t in tok])
    if vals.size != width * height:
        raise ValueError(f"{path}: expected {width * height} pixels, found {vals.size}")
    return vals.reshape(height, width)


def write_pgm(path, img, maxval: int = 255) -> None:
    img = np.clip(np.rint(np.asarray(img, dtype=float)), 0, maxval).astype(int)
    h, w = img.shape
    with open(path, "w") as fh:
        fh.write(f"P2\n{w} {h}\n{maxval}\n")
        for row in img:
            fh.write(" ".join(map(str, row)) + "\n")


def read_volume(path) -> np.ndarray:
    """Stack of P2 slices listed in a text file, returned as (H, W, D)."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path) as fh:
        names = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not names:
        raise ValueError(f"{path}: empty volume list")
    slices = [read_pgm(os.path.join(base, name)) for name in names]
    if any(s.shape != slices[0].shape for s in slices):
        raise ValueError(f"{path}: slices have different sizes")
    return np.stack(slices, axis=-1)


def write_volume(path, vol) -> None:
    vol = np.asarray(vol)
    stem = os.path.splitext(os.path.basename(path))[0]
    base = os.path.dirname(os.path.abspath(path))
    names = []
    for k in range(vol.shape[2]):
        name = f"{stem}_{k:03d}.pgm"
        write_pgm(os.path.join(base, name), vol[:, :, k])
        names.append(name)
    with open(path, "w") as fh:
        fh.write("\n".join(names) + "\n")


def read_graph(path) -> CutFunction:
    with open(path) as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    n, m = int(rows[0][0]), int(rows[0][1])
    edges = rows[1:]
    if len(edges) != m:
        raise ValueError(f"{path}: header announces {m} edges, found {len(edges)}")
    if m == 0:
        return CutFunction(n, [], [], [])
    arr = np.array(edges, dtype=float)
    return CutFunction(n, arr[:, 0].astype(np.intp), arr[:, 1].astype(np.intp), arr[:, 2])


def write_graph(path, F: CutFunction) -> None:
    with open(path, "w") as fh:
        fh.write(f"{F.n} {F.num_edges}\n")
        for i, j, a in zip(F.ei, F.ej, F.a):
            fh.write(f"{i} {j} {float(a)!r}\n")


def read_labels(path) -> np.ndarray:
    return np.array([int(t) for t in _tokens(path)], dtype=np.intp)
