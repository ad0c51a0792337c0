import json
import logging

import numpy as np
import pytest
from discgan.base import Exceptions
from discgan.datagen import RngStream
from discgan.util import Log
from discgan.util.serialization import (
    dumps,
    format_float,
    to_jsonable,
    write_json,
    write_jsonl,
    write_xy_csv,
)
from discgan.util.typing import as_float_matrix, as_generator, check_positive, typestr


@pytest.fixture
def plain_log():
    saved = Log.level, Log.color, Log.force_builtin
    Log.color = False
    Log.force_builtin = False
    yield Log
    Log.level, Log.color, Log.force_builtin = saved


class TestLog:
    @pytest.mark.parametrize(
        ["msg", "expected"],
        [
            ("took |3| tries", "took 3 tries"),
            ("$1 step$ left", "1 step left"),
            ("$4 step$ left", "4 steps left"),
            ("$0 entry$", "0 entries"),
            ("$2 key$", "2 keys"),
            ("$2 pass$", "2 passes"),
            ("![ABORT] at step 5", "[ ABORT ] at step 5"),
        ],
    )
    def test_markup(self, plain_log, msg, expected):
        assert plain_log.format(msg) == expected

    def test_levels(self, plain_log):
        plain_log.set_level("warn")
        assert plain_log.enabled("fail")
        assert plain_log.enabled(Log.LogLevel.WARN)
        assert not plain_log.enabled("info")
        assert not plain_log.enabled("none")
        with pytest.raises(ValueError):
            plain_log.set_level("loud")

    def test_writes_to_stderr_only(self, plain_log, capsys):
        plain_log.set_level("info")
        plain_log.info("trained for $3 step$")
        plain_log.debug("hidden")
        out, err = capsys.readouterr()
        assert out == ""
        assert err.rstrip("\n").endswith("| INFO | trained for 3 steps")
        assert "hidden" not in err

    def test_lazy_messages_are_not_evaluated_when_disabled(self, plain_log, capsys):
        plain_log.set_level("fail")
        calls = []
        plain_log.info(lambda: calls.append(1) or "expensive")
        assert calls == []
        plain_log.fail(lambda: calls.append(1) or "shown")
        assert calls == [1]
        assert "shown" in capsys.readouterr().err

    def test_multiline_messages_are_prefixed(self, plain_log, capsys):
        plain_log.set_level("debug")
        plain_log.warn("first\nsecond")
        rows = capsys.readouterr().err.splitlines()
        assert len(rows) == 2
        assert all("| WARN |" in row for row in rows)

    def test_forwarding_to_builtin_logging(self, plain_log, caplog, capsys):
        plain_log.set_level("debug")
        plain_log.force_builtin = True
        with caplog.at_level(logging.DEBUG, logger="discgan"):
            plain_log.warn("|disc| is $2 value$")
        assert caplog.record_tuples == [("discgan", logging.WARNING, "disc is 2 values")]
        assert capsys.readouterr().err == ""

    def test_timed(self, plain_log, capsys):
        plain_log.set_level("debug")
        with plain_log.timed("solve"):
            pass
        assert "solve took" in capsys.readouterr().err


class TestSerialization:
    def test_numpy_values_become_plain_objects(self):
        converted = to_jsonable(
            {"a": np.float64(0.5), "b": np.arange(3), 2: (np.bool_(True), np.int32(4))}
        )
        assert converted == {"a": 0.5, "b": [0, 1, 2], "2": [True, 4]}
        assert type(converted["a"]) is float
        assert type(converted["2"][0]) is bool

    @pytest.mark.parametrize("value", [float("nan"), np.inf, [1.0, -np.inf]])
    def test_non_finite_numbers_are_rejected(self, value):
        with pytest.raises(Exceptions.NonFiniteValue):
            dumps({"x": value})

    def test_dumps_keeps_key_order_and_exact_floats(self):
        text = dumps({"z": 0.1, "a": 1 / 3})
        assert text == '{"z": 0.1, "a": 0.3333333333333333}'
        assert json.loads(text)["a"] == 1 / 3

    def test_write_json(self, tmp_path):
        path = tmp_path / "out.json"
        write_json({"disc": 0.25, "converged": True}, path)
        assert path.read_text() == '{\n  "disc": 0.25,\n  "converged": true\n}\n'

    def test_write_jsonl(self, tmp_path):
        path = tmp_path / "trace.jsonl"
        write_jsonl([{"step": 1, "F": 0.5}, {"step": 2, "F": 0.25}], path)
        lines = path.read_text().splitlines()
        assert [json.loads(line) for line in lines] == [
            {"step": 1, "F": 0.5},
            {"step": 2, "F": 0.25},
        ]

    @pytest.mark.parametrize(
        ["value", "expected"],
        [(0.1, "0.10000000000000001"), (1.0, "1"), (-2.5, "-2.5"), (np.float32(0.5), "0.5")],
    )
    def test_format_float(self, value, expected):
        assert format_float(value) == expected
        assert float(format_float(value)) == float(value)

    def test_write_xy_csv(self, tmp_path):
        path = tmp_path / "plot.csv"
        write_xy_csv([(64, 0.5), (128, 0.25)], path)
        assert path.read_text() == "x,y\n64,0.5\n128,0.25\n"


class TestTypingHelpers:
    @pytest.mark.parametrize(
        ["obj", "expected"],
        [
            (np.zeros((3, 2)), "ndarray[float64, (3, 2)]"),
            ([1, "a", 2], "list[int | str]"),
            (0.5, "float"),
        ],
    )
    def test_typestr(self, obj, expected):
        assert typestr(obj) == expected

    def test_random_sources(self):
        generator = np.random.default_rng(1)
        assert as_generator(generator) is generator
        assert as_generator(5).random() == np.random.default_rng(5).random()
        assert as_generator(None).random() == as_generator(0).random()
        stream = RngStream(3)
        assert as_generator(stream) is stream.generator
        with pytest.raises(Exceptions.ParameterError):
            as_generator(True)

    def test_float_matrix(self):
        assert as_float_matrix([1, 2, 3]).shape == (3, 1)
        with pytest.raises(Exceptions.DimensionMismatch):
            as_float_matrix(np.zeros((2, 2, 2)))
        with pytest.raises(Exceptions.ParameterError):
            as_float_matrix([["a", "b"]])

    @pytest.mark.parametrize(
        ["value", "kwargs", "ok"],
        [
            (3, {"integer": True}, True),
            (3.0, {"integer": True}, False),
            (0, {}, False),
            (0, {"allow_zero": True}, True),
            (-1e-9, {"allow_zero": True}, False),
            (float("inf"), {}, False),
            (True, {}, False),
        ],
    )
    def test_check_positive(self, value, kwargs, ok):
        if ok:
            assert check_positive(value, "x", **kwargs) == value
        else:
            with pytest.raises(Exceptions.ParameterError):
                check_positive(value, "x", **kwargs)
