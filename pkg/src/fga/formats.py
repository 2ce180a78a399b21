"""Little-endian binary formats and PGM export.

FGAT  tensor      b"FGAT", u8 rank, rank x u32 extents, float64 payload
FGAD  density     b"FGAD", u32 H, u32 W, float64 payload
FGAC  checkpoint  b"FGAC", u32 count, then per entry: u16 name length,
                  utf-8 name, one FGAT record
"""
import io
import struct

import numpy as np


class FormatError(ValueError):
    pass


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(f"truncated {what}: wanted {n} bytes, got {len(data)}")
    return data


def pack_tensor(arr):
    arr = np.ascontiguousarray(arr, dtype="<f8")
    if arr.ndim > 255:
        raise FormatError(f"rank {arr.ndim} does not fit in a u8")
    head = b"FGAT" + struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + arr.tobytes()


def unpack_tensor(fh):
    if _read_exact(fh, 4, "tensor magic") != b"FGAT":
        raise FormatError("bad tensor magic, expected FGAT")
    (rank,) = struct.unpack("<B", _read_exact(fh, 1, "tensor rank"))
    shape = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, "tensor extents"))
    count = int(np.prod(shape)) if rank else 1
    payload = _read_exact(fh, 8 * count, "tensor payload")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(shape)


def write_tensor(path, arr):
    with open(path, "wb") as fh:
        fh.write(pack_tensor(arr))


def read_tensor(path):
    with open(path, "rb") as fh:
        return unpack_tensor(fh)


def write_density(path, grid):
    grid = getattr(grid, "grid", grid)
    grid = np.ascontiguousarray(grid, dtype="<f8")
    if grid.ndim != 2:
        raise FormatError(f"density maps are 2-D, got shape {grid.shape}")
    with open(path, "wb") as fh:
        fh.write(b"FGAD" + struct.pack("<II", *grid.shape) + grid.tobytes())


def read_density(path):
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "density magic") != b"FGAD":
            raise FormatError(f"{path}: bad density magic, expected FGAD")
        h, w = struct.unpack("<II", _read_exact(fh, 8, "density header"))
        payload = _read_exact(fh, 8 * h * w, "density payload")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(h, w)


def write_checkpoint(path, entries):
    """Write an ordered mapping name -> array."""
    buf = io.BytesIO()
    buf.write(b"FGAC" + struct.pack("<I", len(entries)))
    for name, arr in entries.items():
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise FormatError(f"entry name too long: {name[:40]}...")
        buf.write(struct.pack("<H", len(raw)) + raw)
        buf.write(pack_tensor(arr))
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def read_checkpoint(path):
    out = {}
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "checkpoint magic") != b"FGAC":
            raise FormatError(f"{path}: bad checkpoint magic, expected FGAC")
        (count,) = struct.unpack("<I", _read_exact(fh, 4, "entry count"))
        for _ in range(count):
            (n,) = struct.unpack("<H", _read_exact(fh, 2, "name length"))
            name = _read_exact(fh, n, "entry name").decode("utf-8")
            out[name] = unpack_tensor(fh)
    return out


def write_pgm(path, grid):
    """Binary P5 greyscale, scaled so the maximum maps to 255."""
    grid = np.asarray(getattr(grid, "grid", grid), dtype=np.float64)
    if grid.ndim != 2:
        raise FormatError(f"PGM export needs a 2-D grid, got shape {grid.shape}")
    peak = grid.max() if grid.size else 0.0
    scaled = np.zeros(grid.shape) if peak <= 0 else np.clip(grid, 0, None) / peak * 255.0
    pixels = np.rint(scaled).astype(np.uint8)
    h, w = grid.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes())


def read_pgm(path):
    """Read a binary P5 image (maxval <= 255) as float64 in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: only binary P5 PGM is supported")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise FormatError(f"{path}: 16-bit PGM not supported")
    pos += 1
    pix = np.frombuffer(data[pos:pos + w * h], dtype=np.uint8)
    if pix.size != w * h:
        raise FormatError(f"{path}: truncated pixel data")
    return pix.reshape(h, w).astype(np.float64) / maxval
