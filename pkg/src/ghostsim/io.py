"""File formats: frame stacks, PGM/CSV images and masks, result tables.

Frame stack file (little-endian throughout)::

    offset  size  field
    0       4     magic b"GFS1"
    4       2     version (u16) = 1
    6       4     width (u32)
    10      4     height (u32)
    14      4     H, frame count (u32)
    18      1     dtype code (u8), 1 = float64
    19      7     reserved, zero
    26      ...   payload: H frames, each height x width row-major

Every writer goes through a temporary file in the destination directory
followed by an atomic rename.
"""
from __future__ import annotations

import csv
import json
import os
import re
import struct
import tempfile
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import (FormatError, MagicMismatchError, TruncatedFileError, ValidationError,
                     VersionMismatchError)
from .simulator import FrameStack

MAGIC = b"GFS1"
VERSION = 1
DTYPE_FLOAT64 = 1
HEADER = struct.Struct("<4sHIIIB7x")
assert HEADER.size == 26

PGM_MAX = 65535
_UMASK = os.umask(0)
os.umask(_UMASK)
_SCALE_RE = re.compile(r"ghostsim-affine\s+scale=(\S+)\s+offset=(\S+)")


def _atomic_write(path, write_fn, mode="wb"):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, mode, **({} if "b" in mode else {"newline": ""})) as fh:
            write_fn(fh)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_stack(path, stack: FrameStack) -> None:
    H, height, width = stack.values.shape
    header = HEADER.pack(MAGIC, VERSION, width, height, H, DTYPE_FLOAT64)
    payload = np.ascontiguousarray(stack.values, dtype="<f8")

    def write(fh):
        fh.write(header)
        payload.tofile(fh)

    _atomic_write(path, write)


def read_stack_header(path):
    with open(path, "rb") as fh:
        raw = fh.read(HEADER.size)
    if len(raw) < 4 or raw[:4] != MAGIC:
        raise MagicMismatchError(f"{path}: not a frame stack file (bad magic)")
    if len(raw) < HEADER.size:
        raise TruncatedFileError(f"{path}: header truncated")
    magic, version, width, height, H, dtype = HEADER.unpack(raw)
    if version != VERSION:
        raise VersionMismatchError(f"{path}: unsupported version {version}")
    if dtype != DTYPE_FLOAT64:
        raise FormatError(f"{path}: unsupported dtype code {dtype}")
    return width, height, H


def read_stack(path) -> FrameStack:
    width, height, H = read_stack_header(path)
    expected = width * height * H * 8
    actual = os.path.getsize(path) - HEADER.size
    if actual < expected:
        raise TruncatedFileError(f"{path}: payload has {actual} bytes, expected {expected}")
    if actual > expected:
        raise FormatError(f"{path}: {actual - expected} trailing bytes after payload")
    values = np.fromfile(path, dtype="<f8", count=width * height * H, offset=HEADER.size)
    return FrameStack(values.astype(np.float64, copy=False).reshape(H, height, width))


def _image_array(image) -> np.ndarray:
    if hasattr(image, "S"):
        image = image.S
    elif hasattr(image, "t"):
        image = image.t
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError("images must be 2-D")
    return arr


def write_pgm(path, pixels: np.ndarray, maxval: int = PGM_MAX, comment: str = "") -> None:
    pixels = np.asarray(pixels)
    height, width = pixels.shape
    head = "P5\n"
    if comment:
        head += f"# {comment}\n"
    head += f"{width} {height}\n{maxval}\n"
    dtype = ">u2" if maxval > 255 else "u1"
    body = np.ascontiguousarray(pixels, dtype=dtype).tobytes()
    _atomic_write(path, lambda fh: (fh.write(head.encode("ascii")), fh.write(body)))


def read_pgm(path):
    """Read a binary (P5) or ASCII (P2) PGM; returns ``(pixels, maxval, comments)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    comments = []
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise TruncatedFileError(f"{path}: PGM header truncated")
        if data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            end = len(data) if end < 0 else end
            comments.append(data[pos + 1:end].decode("ascii", "replace").strip())
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    magic = tokens[0]
    if magic not in (b"P5", b"P2"):
        raise MagicMismatchError(f"{path}: not a PGM file")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise FormatError(f"{path}: malformed PGM header") from None
    if width < 1 or height < 1 or not (0 < maxval <= PGM_MAX):
        raise FormatError(f"{path}: invalid PGM dimensions or maxval")
    if magic == b"P2":
        values = data[pos:].split()
        if len(values) < width * height:
            raise TruncatedFileError(f"{path}: PGM payload truncated")
        pixels = np.array([int(v) for v in values[:width * height]], dtype=np.int64)
    else:
        pos += 1  # single whitespace after maxval
        dtype = ">u2" if maxval > 255 else "u1"
        nbytes = width * height * np.dtype(dtype).itemsize
        if len(data) - pos < nbytes:
            raise TruncatedFileError(f"{path}: PGM payload truncated")
        pixels = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos).astype(np.int64)
    return pixels.reshape(height, width), maxval, comments


def pgm_affine(image: np.ndarray):
    """``(scale, offset)`` mapping 16-bit pixels back to values: ``v = offset + scale * p``."""
    lo, hi = float(image.min()), float(image.max())
    if hi == lo:
        return 1.0, lo
    return (hi - lo) / PGM_MAX, lo


def export_image(image, path, fmt=None) -> None:
    """Write a reconstruction or map as 16-bit PGM or CSV.

    PGM output is rescaled linearly from ``[min, max]`` to ``[0, 65535]``
    and the inverse transform is recorded in a comment line.  CSV output
    holds the raw values and round-trips exactly.
    """
    arr = _image_array(image)
    if fmt is None:
        fmt = "csv" if os.fspath(path).lower().endswith(".csv") else "pgm"
    fmt = fmt.lower().replace("-16", "")
    if fmt == "csv":
        def write(fh):
            w = csv.writer(fh)
            for row in arr:
                w.writerow([repr(float(v)) for v in row])
        _atomic_write(path, write, mode="w")
    elif fmt == "pgm":
        scale, offset = pgm_affine(arr)
        pixels = np.rint((arr - offset) / scale).clip(0, PGM_MAX).astype(np.uint16)
        write_pgm(path, pixels, PGM_MAX, f"ghostsim-affine scale={scale!r} offset={offset!r}")
    else:
        raise ValidationError(f"unknown image format {fmt!r}")


def read_image(path) -> np.ndarray:
    """Inverse of :func:`export_image` (exact for CSV, quantized for PGM)."""
    if os.fspath(path).lower().endswith(".csv"):
        with open(path, newline="") as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        if not rows or len({len(r) for r in rows}) != 1:
            raise FormatError(f"{path}: ragged or empty CSV image")
        return np.array(rows, dtype=np.float64)
    pixels, maxval, comments = read_pgm(path)
    for c in comments:
        m = _SCALE_RE.search(c)
        if m:
            return float(m.group(2)) + float(m.group(1)) * pixels.astype(np.float64)
    return pixels.astype(np.float64)


def read_mask(path) -> np.ndarray:
    """Boolean mask from a PGM: every non-zero pixel is inside."""
    pixels, _, _ = read_pgm(path)
    return pixels > 0


def write_mask(path, mask) -> None:
    write_pgm(path, np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8), 255)


RESULT_COLUMNS = ("protocol", "eta", "n2", "M", "delta_el", "N_pixels", "H", "epsilon",
                  "t_plus", "t_minus", "snr", "snr_err")


@dataclass
class ResultRow:
    protocol: str
    eta: float
    n2: float
    M: float
    delta_el: float
    N_pixels: int
    H: int
    epsilon: float
    t_plus: float
    t_minus: float
    snr: float
    snr_err: float
    extra: dict = field(default_factory=dict)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def results_table(rows, path, extra_columns=(), append=False) -> None:
    """Write (or append to) a results CSV with the fixed column order.

    Columns listed in ``extra_columns`` follow the fixed ones and are read
    from each row's ``extra`` mapping.
    """
    rows = list(rows)
    extra_columns = tuple(extra_columns)
    header = list(RESULT_COLUMNS) + list(extra_columns)
    existing = []
    if append and os.path.exists(path):
        existing_header, existing = _read_table_raw(path)
        if existing_header != header:
            raise FormatError(f"{path}: existing header {existing_header} differs from {header}")

    def write(fh):
        w = csv.writer(fh)
        w.writerow(header)
        for raw in existing:
            w.writerow(raw)
        for r in rows:
            d = asdict(r)
            w.writerow([_fmt(d[c]) for c in RESULT_COLUMNS]
                       + [_fmt(r.extra.get(c, float("nan"))) for c in extra_columns])

    _atomic_write(path, write, mode="w")


def _read_table_raw(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: missing header row") from None
        return header, [row for row in reader if row]


def read_results_table(path):
    header, raw = _read_table_raw(path)
    if tuple(header[:len(RESULT_COLUMNS)]) != RESULT_COLUMNS:
        raise FormatError(f"{path}: unexpected columns {header}")
    extras = header[len(RESULT_COLUMNS):]
    types = {f.name: f.type for f in fields(ResultRow)}
    rows = []
    for line in raw:
        if len(line) != len(header):
            raise FormatError(f"{path}: row has {len(line)} fields, expected {len(header)}")
        vals = {}
        for name, text in zip(RESULT_COLUMNS, line):
            t = types[name]
            vals[name] = text if t == "str" else (int(float(text)) if t == "int" else float(text))
        extra = {c: _parse_extra(v) for c, v in zip(extras, line[len(RESULT_COLUMNS):])}
        rows.append(ResultRow(**vals, extra=extra))
    return rows


def _parse_extra(text):
    try:
        return float(text)
    except ValueError:
        return text


def write_json(path, obj) -> None:
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o).__name__)

    text = json.dumps(obj, indent=2, sort_keys=True, default=default,
                      allow_nan=True) + "\n"
    _atomic_write(path, lambda fh: fh.write(text), mode="w")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
