"""On-disk light-field containers: an ``lf.meta`` manifest plus 16-bit binary PGM views.

Manifest lines are ``key=value`` (UTF-8, ``\\n`` terminated)::

    views_s=5
    views_t=5
    height=64
    width=64
    bitdepth=16
    pattern=view_%02d_%02d.pgm

View ``(s, t)`` (0-based) is stored in ``pattern % (s, t)``. Extra keys are
preserved and returned by :func:`read_manifest`.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .lightfield import HybridInput, LightField

MANIFEST = "lf.meta"
VIEW_PATTERN = "view_%02d_%02d.pgm"
DISPARITY_PATTERN = "disparity_%02d_%02d.pgm"
CENTER_FILE = "center.pgm"
MAXVAL = 65535


class LfFormatError(ValueError):
    pass


# -- PGM ---------------------------------------------------------------------


def write_pgm(path, samples: np.ndarray) -> None:
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise LfFormatError(f"PGM image must be 2-D, got shape {samples.shape}")
    H, W = samples.shape
    header = f"P5\n{W} {H}\n{MAXVAL}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(samples.astype(">u2").tobytes())


def _header_tokens(blob: bytes, count: int):
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(blob) and blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            while pos < len(blob) and blob[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise LfFormatError("truncated PGM header")
        tokens.append(blob[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pgm(path) -> np.ndarray:
    """Return the raw integer samples of a binary (P5) PGM."""
    blob = Path(path).read_bytes()
    if blob[:2] != b"P5":
        raise LfFormatError(f"{path}: bad magic {blob[:2]!r}, expected b'P5'")
    (_, w, h, maxval), pos = _header_tokens(blob, 4)
    W, H, maxval = int(w), int(h), int(maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    expected = W * H * np.dtype(dtype).itemsize
    raster = blob[pos:pos + expected]
    if len(raster) != expected:
        raise LfFormatError(f"{path}: raster has {len(raster)} bytes, expected {expected}")
    return np.frombuffer(raster, dtype=dtype).reshape(H, W).astype(np.int64)


def quantize(values: np.ndarray) -> np.ndarray:
    """Map [0, 1] floats to 16-bit samples, clamping and rounding half up."""
    return np.floor(np.clip(values, 0.0, 1.0) * MAXVAL + 0.5).astype(np.int64)


def write_image(path, image: np.ndarray) -> None:
    write_pgm(path, quantize(image))


def read_image(path) -> np.ndarray:
    return read_pgm(path) / float(MAXVAL)


# -- manifest ----------------------------------------------------------------


def write_manifest(path, entries: dict) -> None:
    lines = [f"{k}={v}\n" for k, v in entries.items()]
    Path(path).write_text("".join(lines), encoding="utf-8", newline="\n")


def read_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST
    if not path.exists():
        raise LfFormatError(f"manifest not found: {path}")
    entries = {}
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        if "=" not in line:
            raise LfFormatError(f"{path}:{n}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def _int_entry(meta: dict, key: str, where) -> int:
    try:
        return int(meta[key])
    except KeyError:
        raise LfFormatError(f"{where}: manifest lacks {key!r}") from None
    except ValueError:
        raise LfFormatError(f"{where}: {key}={meta[key]!r} is not an integer") from None


# -- light fields ------------------------------------------------------------


def save_lf(lf: LightField, path, extra: dict | None = None, pattern: str = VIEW_PATTERN) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "views_s": lf.views_s,
        "views_t": lf.views_t,
        "height": lf.height,
        "width": lf.width,
        "bitdepth": 16,
        "pattern": pattern,
    }
    meta.update(extra or {})
    write_manifest(path / MANIFEST, meta)
    for s in range(lf.views_s):
        for t in range(lf.views_t):
            write_image(path / (pattern % (s, t)), lf.luma[s, t])


def load_lf(path) -> LightField:
    path = Path(path)
    meta = read_manifest(path)
    M = _int_entry(meta, "views_s", path)
    N = _int_entry(meta, "views_t", path)
    H = _int_entry(meta, "height", path)
    W = _int_entry(meta, "width", path)
    if meta.get("bitdepth", "16") != "16":
        raise LfFormatError(f"{path}: unsupported bitdepth {meta['bitdepth']}")
    pattern = meta.get("pattern", VIEW_PATTERN)
    luma = np.empty((M, N, H, W))
    for s in range(M):
        for t in range(N):
            name = pattern % (s, t)
            view_path = path / name
            if not view_path.exists():
                raise LfFormatError(f"{path}: missing view file {name}")
            samples = read_pgm(view_path)
            if samples.shape != (H, W):
                raise LfFormatError(f"{name}: dimensions {samples.shape[1]}x{samples.shape[0]} != declared {W}x{H}")
            luma[s, t] = samples / float(MAXVAL)
    return LightField(luma)


def save_hybrid(hybrid: HybridInput, path) -> None:
    """LR views in the light-field container plus the HR central view as ``center.pgm``."""
    path = Path(path)
    save_lf(hybrid.lr_lf, path, extra={"scale": hybrid.scale, "center": CENTER_FILE})
    write_image(path / CENTER_FILE, hybrid.center)


def load_hybrid(path) -> HybridInput:
    path = Path(path)
    meta = read_manifest(path)
    if "scale" not in meta:
        raise LfFormatError(f"{path}: manifest lacks 'scale'; not a hybrid input")
    lf = load_lf(path)
    center_path = path / meta.get("center", CENTER_FILE)
    if not center_path.exists():
        raise LfFormatError(f"{path}: missing central view file {center_path.name}")
    return HybridInput(center=read_image(center_path), lr_lf=lf, scale=int(meta["scale"]))


def save_disparity(disparity: np.ndarray, path, lo: float, hi: float) -> dict:
    """Affine-code a 4-D disparity array into 16-bit PGMs; returns the manifest entries."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    span = hi - lo if hi > lo else 1.0
    M, N = disparity.shape[:2]
    for s in range(M):
        for t in range(N):
            write_image(path / (DISPARITY_PATTERN % (s, t)), (disparity[s, t] - lo) / span)
    return {"disparity_pattern": DISPARITY_PATTERN, "disparity_min": repr(float(lo)), "disparity_max": repr(float(hi))}


def load_disparity(path) -> np.ndarray:
    path = Path(path)
    meta = read_manifest(path)
    M, N = int(meta["views_s"]), int(meta["views_t"])
    lo, hi = float(meta["disparity_min"]), float(meta["disparity_max"])
    span = hi - lo if hi > lo else 1.0
    pattern = meta.get("disparity_pattern", DISPARITY_PATTERN)
    maps = [[read_image(path / (pattern % (s, t))) for t in range(N)] for s in range(M)]
    return lo + np.asarray(maps) * span


