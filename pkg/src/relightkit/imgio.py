"""Float image and flow-field file IO.

Images are numpy arrays of shape (height, width, channels), float32 for
anything read from disk, rows top-to-bottom, linear radiance.
Flow fields are (height, width, 2) float32 arrays of (dx, dy) in pixels.
"""

from __future__ import annotations

import os
import re
import struct

import numpy as np

FLO_MAGIC = b"FLO1"


class ImageFormatError(ValueError):
    """A file could not be decoded; the message names the byte offset."""

    def __init__(self, path, offset: int, reason: str):
        super().__init__(f"{path}: byte {offset}: {reason}")
        self.path = path
        self.offset = offset


def as_image(img) -> np.ndarray:
    """Return `img` as a 3-D (H, W, C) array; 2-D inputs gain a channel axis."""
    img = np.asarray(img)
    if img.ndim == 2:
        img = img[..., None]
    if img.ndim != 3:
        raise ValueError(f"image must be (H, W) or (H, W, C), got shape {img.shape}")
    return img


def _read_token_line(data: bytes, pos: int, path) -> tuple[str, int]:
    end = data.find(b"\n", pos)
    if end < 0:
        raise ImageFormatError(path, pos, "unterminated header line")
    return data[pos:end].decode("ascii", errors="replace").strip(), end + 1


def _handle_nonfinite(img: np.ndarray, path, header_len: int, nonfinite: str) -> np.ndarray:
    bad = ~np.isfinite(img)
    if not bad.any():
        return img
    if nonfinite == "clamp":
        return np.nan_to_num(img, nan=0.0, posinf=np.finfo(np.float32).max, neginf=-np.finfo(np.float32).max)
    first = int(np.flatnonzero(bad.reshape(-1))[0])
    raise ImageFormatError(path, header_len + 4 * first, "non-finite value in payload")


def load_pfm(path, nonfinite: str = "reject") -> np.ndarray:
    """Read a PFM file ("PF" RGB or "Pf" grey) into an (H, W, C) float32 array.

    `nonfinite` is "reject" (raise on NaN/Inf) or "clamp" (NaN -> 0,
    +-Inf -> +-float32 max).
    """
    with open(path, "rb") as f:
        data = f.read()
    magic, pos = _read_token_line(data, 0, path)
    if magic == "PF":
        channels = 3
    elif magic == "Pf":
        channels = 1
    else:
        raise ImageFormatError(path, 0, f"bad magic {magic!r}, expected 'PF' or 'Pf'")
    dims_at = pos
    dims, pos = _read_token_line(data, pos, path)
    m = re.fullmatch(r"(\d+)\s+(\d+)", dims)
    if not m:
        raise ImageFormatError(path, dims_at, f"bad dimensions line {dims!r}")
    width, height = int(m.group(1)), int(m.group(2))
    if width == 0 or height == 0:
        raise ImageFormatError(path, dims_at, "zero-sized image")
    scale_at = pos
    scale_line, pos = _read_token_line(data, pos, path)
    try:
        scale = float(scale_line)
    except ValueError:
        raise ImageFormatError(path, scale_at, f"bad scale line {scale_line!r}") from None
    if scale == 0.0 or not np.isfinite(scale):
        raise ImageFormatError(path, scale_at, "scale must be finite and non-zero")

    count = width * height * channels
    if len(data) - pos < 4 * count:
        raise ImageFormatError(path, len(data), f"truncated payload, expected {4 * count} bytes after header")
    dtype = "<f4" if scale < 0 else ">f4"
    img = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(np.float32)
    img = _handle_nonfinite(img, path, pos, nonfinite)
    # file rows run bottom-to-top
    return img.reshape(height, width, channels)[::-1].copy()


def save_pfm(img, path) -> None:
    """Write an (H, W, 1|3) image as little-endian PFM."""
    img = as_image(img)
    height, width, channels = img.shape
    if width == 0 or height == 0:
        raise ValueError("cannot write a zero-sized image")
    if channels not in (1, 3):
        raise ValueError(f"PFM holds 1 or 3 channels, got {channels}")
    magic = "PF" if channels == 3 else "Pf"
    payload = np.ascontiguousarray(img[::-1], dtype="<f4")
    with open(path, "wb") as f:
        f.write(f"{magic}\n{width} {height}\n-1.0\n".encode("ascii"))
        f.write(payload.tobytes())


def _rgbe_to_float(rgbe: np.ndarray) -> np.ndarray:
    """value = mantissa / 256 * 2^(e - 128); exponent 0 encodes black."""
    e = rgbe[..., 3].astype(np.int32)
    scale = np.where(e == 0, 0.0, np.ldexp(1.0, e - 136))
    return (rgbe[..., :3].astype(np.float64) * scale[..., None]).astype(np.float32)


def _read_rgbe_scanline(data: bytes, pos: int, width: int, path) -> tuple[np.ndarray, int]:
    if pos + 4 > len(data):
        raise ImageFormatError(path, pos, "corrupt scanline: unexpected end of data")
    head = data[pos : pos + 4]
    is_rle = 8 <= width <= 0x7FFF and head[0] == 2 and head[1] == 2 and not head[2] & 0x80
    if not is_rle:
        end = pos + 4 * width
        if end > len(data):
            raise ImageFormatError(path, pos, "corrupt scanline: truncated flat scanline")
        return np.frombuffer(data, np.uint8, 4 * width, pos).reshape(width, 4), end

    if (head[2] << 8 | head[3]) != width:
        raise ImageFormatError(path, pos, "corrupt scanline: RLE width mismatch")
    pos += 4
    line = np.empty((4, width), np.uint8)
    for ch in range(4):
        x = 0
        while x < width:
            if pos >= len(data):
                raise ImageFormatError(path, pos, "corrupt scanline: truncated RLE data")
            count = data[pos]
            pos += 1
            if count > 128:
                count -= 128
                if x + count > width or pos >= len(data):
                    raise ImageFormatError(path, pos - 1, "corrupt scanline: bad run length")
                line[ch, x : x + count] = data[pos]
                pos += 1
            else:
                if count == 0 or x + count > width or pos + count > len(data):
                    raise ImageFormatError(path, pos - 1, "corrupt scanline: bad literal count")
                line[ch, x : x + count] = np.frombuffer(data, np.uint8, count, pos)
                pos += count
            x += count
    return line.T, pos


def load_radiance_hdr(path) -> np.ndarray:
    """Read a Radiance RGBE (.hdr) file with a "-Y h +X w" resolution line."""
    with open(path, "rb") as f:
        data = f.read()
    if not (data.startswith(b"#?RADIANCE") or data.startswith(b"#?RGBE")):
        raise ImageFormatError(path, 0, "missing #?RADIANCE signature")
    pos = 0
    while True:
        line, nxt = _read_token_line(data, pos, path)
        if line.startswith("FORMAT=") and line != "FORMAT=32-bit_rle_rgbe":
            raise ImageFormatError(path, pos, f"unsupported pixel format {line!r}")
        pos = nxt
        if line == "":
            break
    res_at = pos
    res, pos = _read_token_line(data, pos, path)
    m = re.fullmatch(r"-Y\s+(\d+)\s+\+X\s+(\d+)", res)
    if not m:
        raise ImageFormatError(path, res_at, f"unsupported orientation {res!r}, expected '-Y h +X w'")
    height, width = int(m.group(1)), int(m.group(2))
    if width == 0 or height == 0:
        raise ImageFormatError(path, res_at, "zero-sized image")

    rgbe = np.empty((height, width, 4), np.uint8)
    for y in range(height):
        rgbe[y], pos = _read_rgbe_scanline(data, pos, width, path)
    return _rgbe_to_float(rgbe)


def load_flow(path) -> np.ndarray:
    """Read a FLO1 flow file into an (H, W, 2) float32 array."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 12:
        raise ImageFormatError(path, len(data), "truncated header")
    if data[:4] != FLO_MAGIC:
        raise ImageFormatError(path, 0, f"bad magic {data[:4]!r}, expected {FLO_MAGIC!r}")
    width, height = struct.unpack("<II", data[4:12])
    count = width * height * 2
    if len(data) - 12 < 4 * count:
        raise ImageFormatError(path, len(data), f"truncated payload, expected {4 * count} bytes after header")
    flow = np.frombuffer(data, "<f4", count, 12).astype(np.float32)
    flow = _handle_nonfinite(flow, path, 12, "reject")
    return flow.reshape(height, width, 2)


def save_flow(flow, path) -> None:
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must be (H, W, 2), got shape {flow.shape}")
    height, width = flow.shape[:2]
    with open(path, "wb") as f:
        f.write(FLO_MAGIC + struct.pack("<II", width, height))
        f.write(np.ascontiguousarray(flow, dtype="<f4").tobytes())


def save_png_preview(img, path, exposure: float = 1.0) -> None:
    """Write an 8-bit sRGB preview of a linear image (values clamped to [0, 1])."""
    from PIL import Image

    img = as_image(img).astype(np.float64) * exposure
    img = np.clip(img, 0.0, 1.0)
    srgb = np.where(img <= 0.0031308, 12.92 * img, 1.055 * np.power(img, 1 / 2.4) - 0.055)
    pixels = np.round(srgb * 255.0).astype(np.uint8)
    if pixels.shape[2] == 1:
        pixels = pixels[..., 0]
    Image.fromarray(pixels).save(os.fspath(path))
