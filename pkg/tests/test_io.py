import os
import struct

import numpy as np
import pytest

from ghostsim import io
from ghostsim.errors import (FormatError, MagicMismatchError, TruncatedFileError,
                             VersionMismatchError)
from ghostsim.simulator import FrameStack


def test_minimal_stack_round_trip(tmp_path):
    path = tmp_path / "one.gfs"
    io.write_stack(path, FrameStack(np.zeros((1, 1, 1))))
    assert os.path.getsize(path) == 26 + 8
    raw = path.read_bytes()
    assert raw[:4] == b"GFS1"
    assert struct.unpack("<HIIIB", raw[4:19]) == (1, 1, 1, 1, 1)
    assert raw[19:26] == bytes(7)
    back = io.read_stack(path)
    assert back.values.shape == (1, 1, 1) and back.values[0, 0, 0] == 0.0


def test_stack_round_trip_is_bit_exact(tmp_path):
    v = np.random.default_rng(0).normal(size=(5, 3, 4)) * 1e3
    v[0, 0, 0] = np.nextafter(1.0, 2.0)
    io.write_stack(tmp_path / "s.gfs", FrameStack(v))
    back = io.read_stack(tmp_path / "s.gfs").values
    assert back.tobytes() == v.astype("<f8").tobytes()
    assert back.shape == (5, 3, 4)


def test_paper_scale_payload_size(tmp_path):
    path = tmp_path / "big.gfs"
    header = io.HEADER.pack(io.MAGIC, io.VERSION, 34, 28, 30000, io.DTYPE_FLOAT64)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.truncate(26 + 952 * 30000 * 8)  # sparse file, no real disk use
    assert io.read_stack_header(path) == (34, 28, 30000)
    assert os.path.getsize(path) - 26 == 228_480_000
    with open(path, "r+b") as fh:
        fh.truncate(26 + 228_480_000 - 1)
    with pytest.raises(TruncatedFileError):
        io.read_stack(path)


def test_malformed_stacks(tmp_path):
    good = tmp_path / "g.gfs"
    io.write_stack(good, FrameStack(np.ones((2, 2, 2))))
    raw = good.read_bytes()
    cases = {
        "magic": (b"XFS1" + raw[4:], MagicMismatchError),
        "version": (raw[:4] + struct.pack("<H", 9) + raw[6:], VersionMismatchError),
        "header": (raw[:20], TruncatedFileError),
        "trailing": (raw + b"\0", FormatError),
        "dtype": (raw[:18] + b"\x07" + raw[19:], FormatError),
        "empty": (b"", MagicMismatchError),
    }
    for name, (data, err) in cases.items():
        p = tmp_path / f"{name}.gfs"
        p.write_bytes(data)
        with pytest.raises(err):
            io.read_stack(p)
    assert issubclass(MagicMismatchError, FormatError) and issubclass(FormatError, OSError)


def test_constant_image_pgm(tmp_path):
    path = tmp_path / "c.pgm"
    io.export_image(np.full((3, 4), 7.5), path)
    pixels, maxval, comments = io.read_pgm(path)
    assert maxval == 65535 and not pixels.any()
    assert any("scale=1.0" in c for c in comments)
    np.testing.assert_array_equal(io.read_image(path), np.full((3, 4), 7.5))


def test_binary_map_pgm_levels(tmp_path):
    t = np.zeros((4, 6))
    t[:, 3:] = 1.0
    io.export_image(t, tmp_path / "b.pgm")
    pixels, _, _ = io.read_pgm(tmp_path / "b.pgm")
    assert set(np.unique(pixels)) == {0, 65535}
    np.testing.assert_array_equal(io.read_image(tmp_path / "b.pgm"), t)


def test_pgm_quantization_bound(tmp_path):
    img = np.random.default_rng(1).normal(size=(9, 11)) * 300
    io.export_image(img, tmp_path / "r.pgm")
    scale, _ = io.pgm_affine(img)
    assert np.max(np.abs(io.read_image(tmp_path / "r.pgm") - img)) <= scale / 2 * (1 + 1e-9)


def test_csv_round_trip_bit_identical(tmp_path):
    img = np.random.default_rng(2).normal(size=(6, 5)) * 1e-7
    img[0, 0] = 1 / 3
    io.export_image(img, tmp_path / "r.csv")
    assert io.read_image(tmp_path / "r.csv").tobytes() == img.tobytes()


def test_ascii_pgm_and_masks(tmp_path):
    (tmp_path / "a.pgm").write_text("P2\n# mask\n3 2\n255\n0 255 0\n1 0 0\n")
    np.testing.assert_array_equal(io.read_mask(tmp_path / "a.pgm"),
                                  [[False, True, False], [True, False, False]])
    m = np.eye(4, dtype=bool)
    io.write_mask(tmp_path / "m.pgm", m)
    np.testing.assert_array_equal(io.read_mask(tmp_path / "m.pgm"), m)
    (tmp_path / "bad.pgm").write_bytes(b"P6\n1 1\n255\n\0\0\0")
    with pytest.raises(MagicMismatchError):
        io.read_pgm(tmp_path / "bad.pgm")
    (tmp_path / "short.pgm").write_bytes(b"P5\n4 4\n255\n\0\0")
    with pytest.raises(TruncatedFileError):
        io.read_pgm(tmp_path / "short.pgm")


def row(protocol="gi", eps=0.18, snr=0.90):
    return io.ResultRow(protocol, 0.794, 1000.0, 5e10, 0.0, 952, 2000, eps, 1.0, 0.0, snr, 0.05)


def test_results_table(tmp_path):
    path = tmp_path / "r.csv"
    io.results_table([], path)
    assert path.read_text().strip() == ",".join(io.RESULT_COLUMNS)
    io.results_table([row()], path)
    assert io.read_results_table(path) == [row()]
    rows = [row(p, e) for e in np.linspace(0.1, 0.9, 10) for p in ("gi", "dgi", "odgi")]
    io.results_table(rows, path)
    assert len(io.read_results_table(path)) == 30
    io.results_table([row("odgi")], path, append=True)
    assert len(io.read_results_table(path)) == 31
    with pytest.raises(FormatError):
        io.results_table([row()], path, extra_columns=("x",), append=True)


def test_results_extra_columns(tmp_path):
    r = row()
    r.extra = {"x": 0.18, "snr_pred": 0.9}
    io.results_table([r], tmp_path / "e.csv", extra_columns=("x", "snr_pred"))
    back = io.read_results_table(tmp_path / "e.csv")[0]
    assert back.extra == {"x": 0.18, "snr_pred": 0.9}


def test_writes_leave_no_temporaries(tmp_path):
    io.write_json(tmp_path / "a.json", {"k": np.float64(1.5), "v": np.arange(3)})
    assert io.read_json(tmp_path / "a.json") == {"k": 1.5, "v": [0, 1, 2]}
    assert sorted(os.listdir(tmp_path)) == ["a.json"]
