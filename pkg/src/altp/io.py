"""Image decoding, importance/result documents and PPM/PGM writers."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import ImageBuffer, ImportanceMap, PruneConfig, PruneResult, SuperpixelMap, TokenGrid

RESULT_FORMAT = "altp-result"
RESULT_FORMAT_VERSION = 1


class ImageLoadError(ValueError):
    code = "image_error"


class UnsupportedFormatError(ImageLoadError):
    code = "unsupported_format"


class TruncatedImageError(ImageLoadError):
    code = "truncated"


class EmptyImageError(ImageLoadError):
    code = "zero_dimensions"


class ImportanceError(ValueError):
    pass


def _read_netpbm_header(buf: bytes):
    """Parse magic, width, height, maxval; return them and the payload offset."""
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < len(buf) and buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise TruncatedImageError("truncated image header")
        try:
            tokens.append(int(buf[start:pos]))
        except ValueError:
            raise UnsupportedFormatError(f"malformed header field {buf[start:pos]!r}") from None
    if pos >= len(buf):
        raise TruncatedImageError("truncated image data")
    # exactly one whitespace byte separates maxval from the raster
    return tokens[0], tokens[1], tokens[2], pos + 1


def decode_netpbm(buf: bytes) -> ImageBuffer:
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise UnsupportedFormatError(f"unsupported netpbm variant {magic!r}")
    channels = 3 if magic == b"P6" else 1
    width, height, maxval, offset = _read_netpbm_header(buf)
    if width <= 0 or height <= 0:
        raise EmptyImageError("image has zero dimensions")
    if not 0 < maxval < 65536:
        raise UnsupportedFormatError(f"invalid maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    payload = buf[offset : offset + count * dtype.itemsize]
    if len(payload) < count * dtype.itemsize:
        raise TruncatedImageError("truncated image data")
    raw = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    if raw.max(initial=0) > maxval:
        raise UnsupportedFormatError("sample exceeds maxval")
    return ImageBuffer(raw.reshape(height, width, channels) / maxval)


def _decode_png(path) -> ImageBuffer:
    from PIL import Image

    with Image.open(path) as im:
        im.load()
        if im.width == 0 or im.height == 0:
            raise EmptyImageError("image has zero dimensions")
        if im.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
            return ImageBuffer(np.clip(arr, 0.0, 1.0))
        if im.mode in ("1", "L", "LA"):
            return ImageBuffer(np.asarray(im.convert("L"), dtype=np.float64) / 255.0)
        return ImageBuffer(np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0)


def load_image(path) -> ImageBuffer:
    """Decode a PNG or binary PPM (P6) / PGM (P5) file into [0, 1] intensities."""
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:2] in (b"P5", b"P6"):
        return decode_netpbm(buf)
    if buf[:8] == b"\x89PNG\r\n\x1a\n":
        try:
            return _decode_png(path)
        except ImageLoadError:
            raise
        except Exception as exc:
            raise TruncatedImageError(f"cannot decode PNG: {exc}") from exc
    raise UnsupportedFormatError(f"unsupported image format in {os.fspath(path)}")


def to_bytes8(data: np.ndarray) -> np.ndarray:
    return np.round(np.clip(data, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_ppm(path, rgb: np.ndarray) -> None:
    """Write an ``(h, w, 3)`` [0, 1] float array (or uint8) as binary P6."""
    arr = rgb if rgb.dtype == np.uint8 else to_bytes8(rgb)
    if arr.ndim == 2 or arr.shape[2] == 1:
        arr = np.repeat(arr.reshape(arr.shape[0], arr.shape[1], 1), 3, axis=2)
    h, w, _ = arr.shape
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(arr).tobytes())


def write_label_pgm(path, spmap: SuperpixelMap) -> None:
    """Region labels as a P5 PGM, 16-bit when more than 256 regions."""
    maxval = max(spmap.region_count - 1, 1)
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n%d\n" % (spmap.width, spmap.height, maxval))
        f.write(spmap.labels.astype(dtype).tobytes())


def resize_bilinear(image: ImageBuffer, width: int, height: int) -> ImageBuffer:
    """Bilinear resampling with half-pixel centres and edge clamping."""
    if (width, height) == (image.width, image.height):
        return image
    src = image.data

    def coords(n_out, n_in):
        x = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        x = np.clip(x, 0.0, n_in - 1)
        lo = np.floor(x).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, x - lo

    y0, y1, fy = coords(height, image.height)
    x0, x1, fx = coords(width, image.width)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    return ImageBuffer(np.clip(top * (1 - fy) + bottom * fy, 0.0, 1.0))


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def load_importance(path, v_total: int) -> ImportanceMap:
    """Read ``{"v_total": int, "values": [...]}`` and validate it against the grid."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ImportanceError(f"importance file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "values" not in doc or "v_total" not in doc:
        raise ImportanceError('importance file needs "v_total" and "values"')
    values = doc["values"]
    if doc["v_total"] != v_total:
        raise ImportanceError(f"importance v_total={doc['v_total']} but grid has {v_total} tokens")
    if len(values) != v_total:
        raise ImportanceError(f"importance has {len(values)} values, expected {v_total}")
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
            raise ImportanceError(f"importance value at index {i} is invalid: {v!r}")
    return ImportanceMap(values, "external")


@dataclass(frozen=True)
class RunManifest:
    input_image: str
    input_sha256: str
    config: PruneConfig
    grid: TokenGrid
    tool_version: str
    importance_path: Optional[str] = None
    importance_sha256: Optional[str] = None
    extra: dict = field(default_factory=dict)

    @property
    def content_hash(self) -> str:
        h = hashlib.sha256(self.input_sha256.encode())
        h.update((self.importance_sha256 or "").encode())
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "tool": "altp",
            "tool_version": self.tool_version,
            "input_image": self.input_image,
            "input_sha256": self.input_sha256,
            "importance_path": self.importance_path,
            "importance_sha256": self.importance_sha256,
            "content_hash": self.content_hash,
            "config": self.config.to_dict(),
            "grid": self.grid.to_dict(),
            "extra": dict(self.extra),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        return cls(
            input_image=d["input_image"],
            input_sha256=d["input_sha256"],
            config=PruneConfig.from_dict(d["config"]),
            grid=TokenGrid.from_dict(d["grid"]),
            tool_version=d["tool_version"],
            importance_path=d.get("importance_path"),
            importance_sha256=d.get("importance_sha256"),
            extra=dict(d.get("extra", {})),
        )


def dumps(obj, indent: int = 0) -> str:
    """JSON with nested objects indented and scalar lists kept on one line."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(k))}: {dumps(v, indent + 1)}' for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)) and any(isinstance(v, (dict, list, tuple)) for v in obj):
        items = [f"{pad}  {dumps(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return json.dumps(obj, allow_nan=False)


def result_document(result: PruneResult, manifest: RunManifest, segmentation: Optional[SuperpixelMap] = None) -> dict:
    doc = {"format": RESULT_FORMAT, "format_version": RESULT_FORMAT_VERSION}
    doc.update(result.to_dict())
    doc["manifest"] = manifest.to_dict()
    if segmentation is not None:
        doc["segmentation"] = segmentation.to_dict()
    return doc


def emit_result(result: PruneResult, manifest: RunManifest, path, segmentation: Optional[SuperpixelMap] = None) -> None:
    """Write the result document with a fixed key order (byte-reproducible)."""
    text = dumps(result_document(result, manifest, segmentation)) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def read_result(path):
    """Parse a result document into ``(PruneResult, RunManifest, SuperpixelMap | None)``."""
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format") != RESULT_FORMAT:
        raise ValueError(f"{os.fspath(path)} is not an altp result document")
    seg = doc.get("segmentation")
    return (
        PruneResult.from_dict(doc),
        RunManifest.from_dict(doc["manifest"]),
        SuperpixelMap.from_dict(seg) if seg is not None else None,
    )
