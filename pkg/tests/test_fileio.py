"""File format round trips and worked byte layouts."""
import numpy as np
import pytest

from densematch import MotionField
from densematch.fileio import (
    read_disparity_png,
    read_flo,
    read_flow_png,
    read_pgm16,
    write_disparity_png,
    write_flo,
    write_flow_png,
    write_pgm16,
)


class TestFlo:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(42)
        f = MotionField(rng.uniform(-100, 100, (7, 9, 2)).astype(np.float32).astype(np.float64))
        path = tmp_path / "field.flo"
        write_flo(path, f)
        back = read_flo(path)
        np.testing.assert_array_equal(back.vectors, f.vectors)
        assert back.valid.all()

    def test_known_byte_layout(self, tmp_path):
        f = MotionField(np.array([[[1.5, -2.0]]]))
        path = tmp_path / "one.flo"
        write_flo(path, f)
        raw = path.read_bytes()
        assert len(raw) == 20
        assert raw == (
            b"PIEH"
            + b"\x01\x00\x00\x00"  # width 1
            + b"\x01\x00\x00\x00"  # height 1
            + b"\x00\x00\xc0\x3f"  # 1.5f
            + b"\x00\x00\x00\xc0"  # -2.0f
        )

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.flo"
        path.write_bytes(b"XIEH" + b"\x00" * 16)
        with pytest.raises(ValueError, match="magic"):
            read_flo(path)

    def test_truncated_file_rejected(self, tmp_path):
        f = MotionField(np.zeros((4, 4, 2)))
        path = tmp_path / "trunc.flo"
        write_flo(path, f)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError, match="truncated"):
            read_flo(path)

    def test_stereo_field_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_flo(tmp_path / "x.flo", MotionField(np.zeros((2, 2, 1))))

    def test_nonfinite_values_marked_invalid(self, tmp_path):
        vec = np.zeros((2, 2, 2))
        vec[0, 0, 0] = np.nan
        path = tmp_path / "nan.flo"
        write_flo(path, MotionField(vec))
        back = read_flo(path)
        assert not back.valid[0, 0]
        assert back.valid[1, 1]


class TestFlowPng:
    def test_zero_flow_raw_values(self, tmp_path):
        import cv2

        path = tmp_path / "zero.png"
        write_flow_png(path, MotionField(np.zeros((2, 3, 2))))
        raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        np.testing.assert_array_equal(raw[:, :, 2], 32768)  # u
        np.testing.assert_array_equal(raw[:, :, 1], 32768)  # v
        np.testing.assert_array_equal(raw[:, :, 0], 1)  # valid

    def test_round_trip_on_quantization_grid(self, tmp_path):
        rng = np.random.default_rng(7)
        raw = rng.integers(0, 65536, (6, 5, 2))
        vec = (raw - 2.0**15) / 64.0
        valid = rng.random((6, 5)) > 0.3
        f = MotionField(vec, valid)
        path = tmp_path / "f.png"
        write_flow_png(path, f)
        back = read_flow_png(path)
        np.testing.assert_array_equal(back.valid, valid)
        np.testing.assert_array_equal(back.vectors[valid], vec[valid])

    def test_out_of_range_raises(self, tmp_path):
        f = MotionField(np.full((2, 2, 2), 600.0))
        with pytest.raises(ValueError, match="range"):
            write_flow_png(tmp_path / "big.png", f)

    def test_eight_bit_file_rejected(self, tmp_path):
        import cv2

        path = tmp_path / "8bit.png"
        cv2.imwrite(str(path), np.zeros((4, 4, 3), dtype=np.uint8))
        with pytest.raises(ValueError, match="16-bit"):
            read_flow_png(path)


class TestDisparityPng:
    def test_disparity_five_is_raw_1280(self, tmp_path):
        import cv2

        path = tmp_path / "d.png"
        write_disparity_png(path, np.full((2, 2), 5.0))
        raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        np.testing.assert_array_equal(raw, 1280)

    def test_raw_zero_is_invalid(self, tmp_path):
        import cv2

        path = tmp_path / "z.png"
        cv2.imwrite(str(path), np.zeros((3, 3), dtype=np.uint16))
        disp, valid = read_disparity_png(path)
        assert not valid.any()

    def test_round_trip_on_grid(self, tmp_path):
        rng = np.random.default_rng(3)
        raw = rng.integers(1, 65536, (4, 6))
        disp = raw / 256.0
        path = tmp_path / "d.png"
        write_disparity_png(path, disp)
        back, valid = read_disparity_png(path)
        assert valid.all()
        np.testing.assert_array_equal(back, disp)

    def test_unrepresentable_disparity_raises(self, tmp_path):
        with pytest.raises(ValueError):
            write_disparity_png(tmp_path / "x.png", np.full((2, 2), 300.0))


class TestPgm16:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        values = np.round(rng.random((5, 8)) * 65535) / 65535
        path = tmp_path / "c.pgm"
        write_pgm16(path, values)
        np.testing.assert_allclose(read_pgm16(path), values, atol=1e-12)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "c.pgm"
        write_pgm16(path, np.zeros((2, 3)))
        raw = path.read_bytes()
        assert raw.startswith(b"P5\n3 2\n65535\n")
        assert len(raw) == len(b"P5\n3 2\n65535\n") + 12

    def test_out_of_range_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_pgm16(tmp_path / "x.pgm", np.full((2, 2), 1.5))
