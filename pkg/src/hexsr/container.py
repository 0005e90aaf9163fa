"""Raw-plane container for hexagonal imagery and distance matrices.

Layout (bit-exact):

* UTF-8 text header, one ``key: value`` pair per line, starting with the
  magic line ``HEXSR-RAW 1`` and terminated by a line containing only
  ``end`` followed by a newline.
* Binary payload: little-endian 32-bit floats, channel-major then
  plane-major, each plane row-major.  For ``channels=C`` and ``planes=P``
  the order is c0p0, c0p1, ..., c0p(P-1), c1p0, ...

Required header keys: ``kind`` (``hex_image`` or ``distance_matrix``),
``channels``, ``planes``, per-plane dims ``plane<i>_rows``/``plane<i>_cols``,
and the geometry keys of the kind (hex: ``t1 t2 origin_x origin_y``;
distance: ``pitch origin_x origin_y``).  Floats are stored with ``repr`` so
they round-trip exactly.  Any other keys are preserved as provenance.
"""

from __future__ import annotations

import numpy as np

from .observe import HexImage
from .sampling import HexGrid, RectGrid

MAGIC = "HEXSR-RAW 1"

_GEOM_KEYS = {
    "kind", "channels", "planes", "t1", "t2", "pitch",
    "origin_x", "origin_y", "approximate",
}


def _write(path, kind: str, planes: list[np.ndarray], header: dict) -> None:
    channels = planes[0].shape[0]
    lines = [MAGIC, f"kind: {kind}", f"channels: {channels}", f"planes: {len(planes)}"]
    for i, pl in enumerate(planes):
        lines.append(f"plane{i}_rows: {pl.shape[1]}")
        lines.append(f"plane{i}_cols: {pl.shape[2]}")
    for k in sorted(header):
        lines.append(f"{k}: {header[k]}")
    lines.append("end")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
        for c in range(channels):
            for pl in planes:
                fh.write(np.ascontiguousarray(pl[c], dtype="<f4").tobytes())


def _read(path) -> tuple[str, list[np.ndarray], dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    nl = data.index(b"\nend\n") + len(b"\nend\n")
    text = data[:nl].decode("utf-8").splitlines()
    if text[0] != MAGIC:
        raise ValueError(f"not a {MAGIC} container")
    meta: dict[str, str] = {}
    for line in text[1:-1]:
        key, _, value = line.partition(": ")
        meta[key] = value
    kind = meta["kind"]
    channels = int(meta["channels"])
    n_planes = int(meta["planes"])
    shapes = [
        (int(meta[f"plane{i}_rows"]), int(meta[f"plane{i}_cols"]))
        for i in range(n_planes)
    ]
    payload = np.frombuffer(data[nl:], dtype="<f4")
    expected = channels * sum(r * c for r, c in shapes)
    if payload.size != expected:
        raise ValueError(f"payload holds {payload.size} floats, expected {expected}")
    planes = [np.empty((channels, r, c)) for r, c in shapes]
    pos = 0
    for c in range(channels):
        for i, (r, w) in enumerate(shapes):
            n = r * w
            planes[i][c] = payload[pos : pos + n].reshape(r, w)
            pos += n
    return kind, planes, meta


def save_hex_image(img: HexImage, path, provenance: dict | None = None) -> None:
    """Serialize a hexagonal image with its lattice geometry."""
    g = img.grid
    header = {
        "t1": repr(g.t1),
        "t2": repr(g.t2),
        "origin_x": repr(g.origin[0]),
        "origin_y": repr(g.origin[1]),
        "approximate": int(g.approximate),
    }
    header.update(provenance or {})
    _write(path, "hex_image", [img.plane0, img.plane1], header)


def load_hex_image(path) -> tuple[HexImage, dict]:
    """Read a hexagonal image container; returns (image, provenance dict)."""
    kind, planes, meta = _read(path)
    if kind != "hex_image":
        raise ValueError(f"container holds {kind!r}, not a hex_image")
    p0, p1 = planes
    grid = HexGrid(
        t1=float(meta["t1"]),
        t2=float(meta["t2"]),
        rows0=p0.shape[1],
        cols0=p0.shape[2],
        rows1=p1.shape[1],
        cols1=p1.shape[2],
        origin=(float(meta["origin_x"]), float(meta["origin_y"])),
        approximate=bool(int(meta.get("approximate", "0"))),
    )
    prov = {k: v for k, v in meta.items() if k not in _GEOM_KEYS and not k.startswith("plane")}
    return HexImage(p0, p1, grid), prov


def save_distance_matrix(values: np.ndarray, grid: RectGrid, path, provenance: dict | None = None) -> None:
    """Serialize a distance matrix over its target grid (single channel/plane)."""
    header = {
        "pitch": repr(grid.pitch),
        "origin_x": repr(grid.origin[0]),
        "origin_y": repr(grid.origin[1]),
    }
    header.update(provenance or {})
    _write(path, "distance_matrix", [np.asarray(values, dtype=float)[None]], header)


def load_distance_matrix(path) -> tuple[np.ndarray, RectGrid, dict]:
    """Read a distance-matrix container; returns (values, grid, provenance)."""
    kind, planes, meta = _read(path)
    if kind != "distance_matrix":
        raise ValueError(f"container holds {kind!r}, not a distance_matrix")
    values = planes[0][0]
    grid = RectGrid(
        pitch=float(meta["pitch"]),
        rows=values.shape[0],
        cols=values.shape[1],
        origin=(float(meta["origin_x"]), float(meta["origin_y"])),
    )
    prov = {k: v for k, v in meta.items() if k not in _GEOM_KEYS and not k.startswith("plane")}
    return values, grid, prov
