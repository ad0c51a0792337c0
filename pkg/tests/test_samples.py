import numpy as np
import pytest
from discgan.base import Exceptions
from discgan.samples import SampleMatrix, check_same_dim, load_samples, save_samples

from .utils import write_csv


class TestSampleMatrix:
    def test_shape_and_immutability(self):
        samples = SampleMatrix([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]])
        assert samples.shape == (3, 2)
        assert len(samples) == 3
        with pytest.raises(ValueError):
            samples.data[0, 0] = 1.0

    def test_input_is_copied(self):
        data = np.zeros((2, 2))
        samples = SampleMatrix(data)
        data[0, 0] = 5.0
        assert samples.data[0, 0] == 0.0

    def test_one_dimensional_input_is_a_column(self):
        assert SampleMatrix([1.0, -1.0]).shape == (2, 1)

    @pytest.mark.parametrize(
        ["data", "error"],
        [
            (np.zeros((0, 2)), Exceptions.EmptySample),
            (np.zeros((2, 0)), Exceptions.DimensionMismatch),
            ([[1.0, np.inf]], Exceptions.NonFiniteValue),
            ([[np.nan]], Exceptions.NonFiniteValue),
        ],
    )
    def test_invalid_data(self, data, error):
        with pytest.raises(error):
            SampleMatrix(data)

    def test_unit_ball_check_is_optional(self):
        assert SampleMatrix([[2.0], [-2.0]]).rows == 2
        with pytest.raises(Exceptions.UnitBallViolation):
            SampleMatrix([[2.0], [-2.0]], unit_ball=True)
        assert SampleMatrix([[0.6, 0.8]], unit_ball=True).unit_ball

    def test_scaled(self):
        samples = SampleMatrix([[0.5, 0.0]], unit_ball=True)
        assert samples.scaled(0.5).unit_ball
        assert not samples.scaled(4.0).unit_ball
        assert samples.scaled(4.0).data[0, 0] == 2.0

    def test_check_same_dim(self):
        a, b = SampleMatrix([[1.0, 2.0]]), SampleMatrix([[1.0]])
        assert check_same_dim(a, a) == 2
        with pytest.raises(Exceptions.DimensionMismatch):
            check_same_dim(a, b)


class TestSampleFiles:
    def test_load(self, tmp_path):
        path = write_csv(tmp_path / "x.csv", [[1.0, -1.0], [0.5, 0.25]])
        samples = load_samples(path)
        assert np.array_equal(samples.data, [[1.0, -1.0], [0.5, 0.25]])

    def test_blank_lines_are_skipped(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("1,2\n\n3,4\n\n")
        assert load_samples(path).shape == (2, 2)

    def test_save_and_load_is_exact(self, tmp_path):
        data = np.random.default_rng(0).standard_normal((20, 3))
        save_samples(data, tmp_path / "x.csv")
        assert np.array_equal(load_samples(tmp_path / "x.csv").data, data)

    @pytest.mark.parametrize(
        ["content", "expected_dim", "message"],
        [
            ("1,2\n3\n", None, r"x\.csv:2: ragged row"),
            ("1,2\n3,abc\n", None, r"x\.csv:2: non-numeric field"),
            ("1,2,3\n", 2, r"x\.csv:1: dimension mismatch: expected 2 fields, found 3"),
            ("0.1,0.2\n0.3,0.4\nnan,0.2\n", None, r"x\.csv:3: non-finite field"),
            ("1,inf\n", None, r"x\.csv:1: non-finite field"),
            ("1,2\n-Infinity,0\n", 2, r"x\.csv:2: non-finite field"),
        ],
    )
    def test_format_errors_name_the_line(self, tmp_path, content, expected_dim, message):
        path = tmp_path / "x.csv"
        path.write_text(content)
        with pytest.raises(Exceptions.SampleFormatError, match=message) as info:
            load_samples(path, expected_dim=expected_dim)
        assert info.value.path == str(path)

    @pytest.mark.parametrize(
        ["content", "line"],
        [(b"\xff\xfe,1\n0.1,0.2\n", 1), (b"0.1,0.2\n0.3,\xe9\n", 2)],
    )
    def test_undecodable_bytes_name_the_line(self, tmp_path, content, line):
        path = tmp_path / "x.csv"
        path.write_bytes(content)
        message = rf"x\.csv:{line}: not UTF-8"
        with pytest.raises(Exceptions.SampleFormatError, match=message) as info:
            load_samples(path)
        assert info.value.line == line

    def test_empty_file(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("\n")
        with pytest.raises(Exceptions.EmptySample):
            load_samples(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(Exceptions.SampleFormatError, match="cannot read"):
            load_samples(tmp_path / "missing.csv")

    def test_unit_ball_on_load(self, tmp_path):
        path = write_csv(tmp_path / "x.csv", [[3.0, 0.0]])
        with pytest.raises(Exceptions.UnitBallViolation):
            load_samples(path, unit_ball=True)
