"""Radiance HDR (RGBE) codec.

Pixels are stored as four bytes (r, g, b, e) sharing one exponent:
value = mantissa * 2^(e - 136). The encoder rounds mantissas to nearest,
which keeps the roundtrip error within half a mantissa quantum of the
per-pixel maximum. Scanlines are written with the adaptive run-length
encoding used by modern writers; the reader also accepts flat scanlines
and the old-style repeat codes.
"""

from __future__ import annotations

import re

import numpy as np

from .image import LinearImage, ValidationError

_MIN_RLE_WIDTH = 8
_MAX_RLE_WIDTH = 32767


def _float_to_rgbe(pixels: np.ndarray) -> np.ndarray:
    """Vectorized float RGB -> RGBE, shape (..., 3) -> (..., 4) uint8."""
    maxc = pixels.max(axis=-1)
    rgbe = np.zeros(pixels.shape[:-1] + (4,), dtype=np.uint8)
    nz = maxc >= 1e-32
    if not np.any(nz):
        return rgbe
    # frexp: maxc = m * 2^e with m in [0.5, 1) => shared scale 2^(8-e)
    _, e = np.frexp(maxc[nz])
    scale = np.ldexp(1.0, 8 - e)
    mant = pixels[nz] * scale[..., None] + 0.5
    np.minimum(mant, 255.0, out=mant)
    rgbe[nz, :3] = mant.astype(np.uint8)
    rgbe[nz, 3] = (e + 128).astype(np.uint8)
    return rgbe


def _rgbe_to_float(rgbe: np.ndarray) -> np.ndarray:
    """Vectorized RGBE -> float RGB."""
    e = rgbe[..., 3].astype(np.int32)
    scale = np.ldexp(1.0, e - 136)
    out = rgbe[..., :3].astype(np.float64) * scale[..., None]
    out[e == 0] = 0.0
    return out


def _encode_rle_component(comp: bytes) -> bytearray:
    """Run-length encode one scanline component (runs of >= 4 become runs)."""
    out = bytearray()
    n = len(comp)
    pos = 0
    while pos < n:
        # find next run of at least 4 equal bytes
        run_start = pos
        run_len = 0
        while run_start < n:
            run_len = 1
            while (
                run_len < 127
                and run_start + run_len < n
                and comp[run_start + run_len] == comp[run_start]
            ):
                run_len += 1
            if run_len >= 4:
                break
            run_start += run_len
        else:
            run_len = 0
        if run_len < 4:
            run_start = n
        # literal bytes up to the run
        lit = pos
        while lit < run_start:
            chunk = min(128, run_start - lit)
            out.append(chunk)
            out.extend(comp[lit : lit + chunk])
            lit += chunk
        if run_start < n:
            out.append(128 + run_len)
            out.append(comp[run_start])
            pos = run_start + run_len
        else:
            pos = n
    return out


def _decode_rle_component(data: bytes, pos: int, width: int) -> tuple[bytearray, int]:
    out = bytearray()
    while len(out) < width:
        if pos >= len(data):
            raise ValidationError("truncated RLE scanline")
        code = data[pos]
        pos += 1
        if code > 128:
            count = code - 128
            if pos >= len(data):
                raise ValidationError("truncated RLE scanline")
            out.extend(data[pos : pos + 1] * count)
            pos += 1
        else:
            if code == 0:
                raise ValidationError("corrupt RLE scanline (zero-length literal)")
            if pos + code > len(data):
                raise ValidationError("truncated RLE scanline")
            out.extend(data[pos : pos + code])
            pos += code
    if len(out) != width:
        raise ValidationError("RLE scanline overrun")
    return out, pos


def _read_flat_scanline(
    data: bytes, pos: int, width: int, prev: np.ndarray | None
) -> tuple[np.ndarray, int]:
    """Read one flat scanline, honoring old-style (1,1,1,n) repeat codes."""
    row = np.empty((width, 4), dtype=np.uint8)
    filled = 0
    shift = 0
    while filled < width:
        if pos + 4 > len(data):
            raise ValidationError("truncated scanline")
        px = data[pos : pos + 4]
        pos += 4
        if px[0] == 1 and px[1] == 1 and px[2] == 1:
            count = px[3] << shift
            if filled == 0:
                if prev is None:
                    raise ValidationError("repeat code with no previous pixel")
                src = prev[-1]
            else:
                src = row[filled - 1]
            count = min(count, width - filled)
            row[filled : filled + count] = src
            filled += count
            shift += 8
        else:
            row[filled] = np.frombuffer(px, dtype=np.uint8)
            filled += 1
            shift = 0
    return row, pos


def read_rgbe(path) -> LinearImage:
    """Read a Radiance HDR file (flat or RLE scanlines)."""
    with open(path, "rb") as f:
        data = f.read()

    if not (data.startswith(b"#?RADIANCE") or data.startswith(b"#?RGBE")):
        raise ValidationError(f"{path}: missing Radiance signature")
    # header is text lines up to the first empty line, then the resolution line
    pos = 0
    saw_blank = False
    resolution = None
    while pos < len(data):
        eol = data.find(b"\n", pos)
        if eol < 0:
            raise ValidationError(f"{path}: unterminated header")
        line = data[pos:eol]
        pos = eol + 1
        if not saw_blank:
            if line == b"":
                saw_blank = True
            continue
        resolution = line
        break
    if resolution is None:
        raise ValidationError(f"{path}: missing resolution line")
    m = re.fullmatch(rb"-Y (\d+) \+X (\d+)", resolution.strip())
    if m is None:
        raise ValidationError(
            f"{path}: unsupported orientation line {resolution!r} (only '-Y h +X w')"
        )
    height, width = int(m.group(1)), int(m.group(2))

    rows = []
    prev = None
    for _ in range(height):
        if pos + 4 > len(data):
            raise ValidationError(f"{path}: truncated scanline")
        head = data[pos : pos + 4]
        if (
            head[0] == 2
            and head[1] == 2
            and (head[2] << 8) + head[3] == width
            and head[2] <= 127
        ):
            pos += 4
            comps = []
            for _ in range(4):
                comp, pos = _decode_rle_component(data, pos, width)
                comps.append(comp)
            row = np.stack(
                [np.frombuffer(bytes(c), dtype=np.uint8) for c in comps], axis=1
            )
        else:
            row, pos = _read_flat_scanline(data, pos, width, prev)
        rows.append(row)
        prev = row
    rgbe = np.stack(rows, axis=0)
    return LinearImage(_rgbe_to_float(rgbe))


def write_rgbe(img: LinearImage, path) -> None:
    """Write a Radiance HDR file with RLE scanlines where the format allows."""
    h, w = img.height, img.width
    rgbe = _float_to_rgbe(img.pixels)
    parts = [b"#?RADIANCE\n", b"FORMAT=32-bit_rle_rgbe\n", b"\n"]
    parts.append(f"-Y {h} +X {w}\n".encode())
    use_rle = _MIN_RLE_WIDTH <= w <= _MAX_RLE_WIDTH
    for y in range(h):
        row = rgbe[y]
        if use_rle:
            parts.append(bytes((2, 2, w >> 8, w & 0xFF)))
            for c in range(4):
                parts.append(bytes(_encode_rle_component(row[:, c].tobytes())))
        else:
            parts.append(row.tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


def read_rgbe_gray(path) -> np.ndarray:
    """Read a single-channel map stored as RGBE (channels assumed equal)."""
    return read_rgbe(path).pixels[..., 0]


def write_rgbe_gray(values: np.ndarray, path) -> None:
    values = np.asarray(values, dtype=np.float64)
    write_rgbe(LinearImage(np.repeat(values[..., None], 3, axis=-1)), path)
