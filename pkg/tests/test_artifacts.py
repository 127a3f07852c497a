import io
import json

import numpy as np
import pytest

from core import __version__
from core.artifacts import (
    load_quantile_table,
    load_study,
    parse_study,
    power_frame,
    read_series,
    write_json,
    write_power,
    write_quantile_table,
    write_records,
    write_series,
)
from core.errors import InputError, StudyFileError
from core.montecarlo import PowerCell, QuantileEntry, QuantileKey, QuantileTable
from core.state import Method, Mode, Sidedness
from tests.config import SEED

STUDY = """
# Gaussian power table
n = 2000
tau = 0.05, 0.1
tau = 0.3, 0.5
h = 0.5, 1, 2
transform = gaussian
hurst = 0.7
reps = 10000
seed = 42
"""


# ---------------------------------------------------------------------------
# Study files
# ---------------------------------------------------------------------------

class TestStudyFile:
    def test_parse(self):
        cfg = parse_study(STUDY)
        assert cfg.sample_sizes == (2000,)
        assert cfg.taus == (0.05, 0.1, 0.3, 0.5)
        assert cfg.shifts == (0.5, 1.0, 2.0)
        assert cfg.shift_kind == "absolute"
        assert cfg.replications == 10_000
        assert cfg.base_seed == 42
        assert cfg.methods == (Method.CUSUM, Method.WILCOXON)
        assert cfg.sidedness is Sidedness.TWO_SIDED
        assert cfg.mode is Mode.LRD

    def test_shift_constants(self):
        cfg = parse_study("n = 266, 1332\ntau = 0.5\nc = 1\nmethod = cusum\ntransform = pareto31\n")
        assert cfg.shift_kind == "constant"
        assert cfg.methods == (Method.CUSUM,)
        assert cfg.transform == "pareto31"

    @pytest.mark.parametrize(
        "text,line_no",
        [
            ("n = 100\ntau 0.5\nh = 1\n", 2),
            ("n = 100\ntau = 0.5\nh = 1\ncolour = red\n", 4),
            ("n = 100\ntau = 0.5\nh = 1\nhurst = 0.7\nhurst = 0.8\n", 5),
            ("n = 100\ntau =\nh = 1\n", 2),
        ],
    )
    def test_errors_carry_line(self, text, line_no):
        with pytest.raises(StudyFileError) as info:
            parse_study(text)
        assert info.value.line_no == line_no
        assert f"line {line_no}" in str(info.value)
        assert info.value.exit_code == 2

    @pytest.mark.parametrize(
        "text",
        [
            "tau = 0.5\nh = 1\n",
            "n = 100\ntau = 0.5\n",
            "n = 100\ntau = 0.5\nh = 1\nc = 1\n",
            "n = 100\ntau = 0.5\nh = 1\nmethod = ttest\n",
            "n = 100\ntau = 0.5\nh = 1\nreps = many\n",
            "n = 100\ntau = 2\nh = 1\n",
        ],
    )
    def test_invalid_studies(self, text):
        with pytest.raises(StudyFileError):
            parse_study(text)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_study(str(tmp_path / "missing.txt"))

    def test_load(self, tmp_path):
        path = tmp_path / "study.txt"
        path.write_text(STUDY, encoding="utf-8")
        assert load_study(str(path)).taus == (0.05, 0.1, 0.3, 0.5)


# ---------------------------------------------------------------------------
# Series
# ---------------------------------------------------------------------------

class TestSeries:
    def test_write_then_read(self, tmp_path):
        values = np.array([0.1, -2.5, 1e-17, 3.0 / 7.0])
        path = tmp_path / "x.txt"
        with open(path, "w", encoding="utf-8") as f:
            write_series(values, f, {"seed": SEED, "hurst": 0.7})
        text = path.read_text(encoding="utf-8")
        assert text.startswith("# schema=1\n")
        assert f"# version={__version__}" in text
        np.testing.assert_array_equal(read_series(str(path)).values, values)

    def test_header_row(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("value\n1.5\n2.5\n-1\n", encoding="utf-8")
        np.testing.assert_array_equal(read_series(str(path)).values, [1.5, 2.5, -1.0])

    @pytest.mark.parametrize(
        "content",
        ["1.0\nnan\n2.0\n", "1.0\nabc\n2.0\n", "1,2\n3,4\n", "", "1.5\n", "value\n"],
        ids=["nan", "text", "two-columns", "empty", "single-value", "header-only"],
    )
    def test_bad_input(self, tmp_path, content):
        path = tmp_path / "bad.txt"
        path.write_text(content, encoding="utf-8")
        with pytest.raises(InputError) as info:
            read_series(str(path))
        assert info.value.exit_code == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            read_series(str(tmp_path / "nope.txt"))


# ---------------------------------------------------------------------------
# Quantile and power tables
# ---------------------------------------------------------------------------

class TestTables:
    def test_quantile_table_round_trip(self, tmp_path):
        table = QuantileTable()
        table.add(QuantileKey(0.05, 0.7, None, "two-sided"), QuantileEntry(0.8712345678901234, 10_000, 7, grid_n=8192))
        table.add(
            QuantileKey(0.05, 0.7, 266, "two-sided", "cusum", "pareto31"),
            QuantileEntry(0.73, 10_000, 7, hermite_scale=1.0),
        )
        path = tmp_path / "q.csv"
        with open(path, "w", encoding="utf-8", newline="") as f:
            write_quantile_table(table, f)
        loaded = load_quantile_table(str(path))
        assert dict(loaded.items()) == dict(table.items())

    def test_quantile_table_missing_columns(self, tmp_path):
        path = tmp_path / "q.csv"
        path.write_text("alpha,hurst\n0.05,0.7\n", encoding="utf-8")
        with pytest.raises(InputError):
            load_quantile_table(str(path))

    def _cell(self):
        return PowerCell(
            Method.WILCOXON, Mode.LRD, "gaussian", 0.7, 2000, 0.5, 0.5, 0.5, 0.05,
            Sidedness.TWO_SIDED, 0.87, 10_000, 8760, SEED,
        )

    def test_power_csv(self):
        out = io.StringIO()
        write_power([self._cell()], "csv", out, {"hurst": 0.7})
        header, row = out.getvalue().strip().splitlines()
        assert header.split(",")[0:3] == ["schema", "version", "method"]
        assert "wilcoxon" in row
        assert power_frame([self._cell()])["power"].iloc[0] == pytest.approx(0.876)

    def test_power_json(self):
        out = io.StringIO()
        write_power([self._cell()], "json", out, {"hurst": 0.7})
        doc = json.loads(out.getvalue())
        assert doc["schema"] == 1
        assert doc["config"] == {"hurst": 0.7}
        assert doc["cells"][0]["rejection_count"] == 8760

    def test_records_csv_repeats_metadata(self):
        out = io.StringIO()
        write_records([{"value": 1.0}, {"value": 2.0}], "csv", out, {"seed": 3, "taus": [0.5]})
        lines = out.getvalue().strip().splitlines()
        assert lines[0] == "schema,version,seed,value"
        assert len(lines) == 3

    def test_json_handles_numpy(self):
        out = io.StringIO()
        write_json({"a": np.float64(1.5), "b": np.int64(2), "c": np.arange(2), "d": Method.CUSUM}, out)
        assert json.loads(out.getvalue()) == {"a": 1.5, "b": 2, "c": [0, 1], "d": "cusum"}
