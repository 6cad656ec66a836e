"""Binary Netpbm codecs: P6 colour images and P5 grey maps, maxval 255 only."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class NetpbmError(ValueError):
    """Malformed or truncated Netpbm data."""


class UnsupportedMaxval(NetpbmError):
    """A header declares a maxval other than 255."""


_WS = b" \t\r\n\v\f"


def _parse_header(data: bytes, magic: bytes) -> tuple[int, int, int]:
    if data[:2] != magic:
        raise NetpbmError(f"bad magic {data[:2]!r}, expected {magic!r}")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        if pos >= len(data):
            raise NetpbmError("truncated header")
        ch = data[pos:pos + 1]
        if ch in (b"",):
            raise NetpbmError("truncated header")
        if ch[0] in _WS:
            pos += 1
            continue
        if ch == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise NetpbmError("truncated header comment")
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and data[pos] not in _WS and data[pos:pos + 1] != b"#":
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise NetpbmError(f"non-numeric header field {token!r}")
        fields.append(int(token))
    if pos >= len(data) or data[pos] not in _WS:
        raise NetpbmError("missing whitespace after maxval")
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise NetpbmError(f"invalid extents {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} not supported (only 255)")
    return width, height, pos + 1


def _decode(data: bytes, magic: bytes, channels: int) -> np.ndarray:
    width, height, offset = _parse_header(data, magic)
    need = width * height * channels
    payload = data[offset:offset + need]
    if len(payload) < need:
        raise NetpbmError(f"truncated payload: {len(payload)} of {need} bytes")
    arr = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    return arr.reshape((height, width, channels) if channels > 1 else (height, width))


def quantize(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(values, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def read_ppm(data: bytes) -> np.ndarray:
    """P6 bytes -> ``(H, W, 3)`` float array in [0, 1]."""
    return _decode(data, b"P6", 3)


def read_pgm(data: bytes) -> np.ndarray:
    """P5 bytes -> ``(H, W)`` float array in [0, 1]."""
    return _decode(data, b"P5", 1)


def write_ppm(image: np.ndarray) -> bytes:
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"write_ppm expects (H, W, 3), got {img.shape}")
    h, w = img.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + quantize(img).tobytes()


def write_pgm(image: np.ndarray) -> bytes:
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError(f"write_pgm expects (H, W), got {img.shape}")
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + quantize(img).tobytes()


def load_image(path) -> np.ndarray:
    data = Path(path).read_bytes()
    return read_ppm(data) if data[:2] == b"P6" else read_pgm(data)
