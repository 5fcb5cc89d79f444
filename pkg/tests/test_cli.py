import csv
import io
import json
import math

import numpy as np
import pytest

from qkinetic.cli import (
    COMMANDS, ConfigError, dump_matrix, load_config, main, parse_matrix, run, to_csv,
)
from qkinetic.solvers import AdmissibilityWarning

pytestmark = pytest.mark.filterwarnings("ignore", category=AdmissibilityWarning)


def write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


FAST = {"series": {"n_max": 2}, "times": [0.0, 0.2], "n_max_list": [1, 2],
        "sweep": {"epsilons": [0.4, 0.2], "vlasov_order": 2}}


class TestConfig:
    def test_defaults(self):
        cfg = load_config({})
        assert cfg.command == "selftest" and cfg.model.dim == 2 and cfg.workers == 1

    @pytest.mark.parametrize("value", [
        [[[0, 0], [1, 0]], [[0, 0], [0, 0]]],
        [[0, 0], [1, 0], [0, 0], [0, 0]],
        [[[1, 1], [0, 0]], [[0, 0], [1, 0]]],
    ])
    def test_non_hermitian_one_body(self, value):
        with pytest.raises(ConfigError, match="model.one_body.*hermitian"):
            load_config({"model": {"one_body": value}})

    @pytest.mark.parametrize("doc,field", [
        ({"bogus": 1}, "bogus"),
        ({"series": {"n_max": -2}}, "series"),
        ({"series": {"colour": 1}}, "series.colour"),
        ({"sweep": {"epsilons": [0.1, 0.2]}}, "sweep"),
        ({"schema_version": 9}, "schema_version"),
        ({"command": "fly"}, "command"),
        ({"initial": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]]}, "initial"),
        ({"initial": [[1, 0]] * 3}, "initial"),
        ({"initial": [[1]]}, "initial"),
        ({"time": "soon"}, "time"),
        ({"format": "xml"}, "format"),
        ({"model": {"pair_potential": np.eye(9).tolist()}}, "model.pair_potential"),
    ])
    def test_errors_name_field(self, doc, field):
        with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
            load_config(doc)

    def test_complex_pairs(self):
        a = parse_matrix([[[1, 0], [0, -1]], [[0, 1], [2, 0]]], "x")
        np.testing.assert_array_equal(a, [[1, -1j], [1j, 2]])
        np.testing.assert_array_equal(parse_matrix(dump_matrix(a), "x"), a)

    def test_resolved_omits_workers(self):
        a = load_config({"workers": 1}).resolved()
        b = load_config({"workers": 4}).resolved()
        assert a == b and "workers" not in a["series"]


class TestCommands:
    @pytest.mark.parametrize("command", [c for c in COMMANDS if c != "selftest"])
    def test_each_command_runs(self, command):
        status, text = run(load_config(dict(FAST, command=command)))
        assert status == 0
        rows = list(csv.DictReader(io.StringIO(text)))
        assert rows

    def test_equivalence_without_coupling_is_zero(self):
        doc = dict(FAST, command="equivalence", model={"coupling": 0.0})
        _, text = run(load_config(doc))
        for row in csv.DictReader(io.StringIO(text)):
            assert float(row["residual"]) < 1e-12

    def test_selftest_passes(self):
        status, text = run(load_config({"command": "selftest"}))
        rows = list(csv.DictReader(io.StringIO(text)))
        assert status == 0
        assert all(r["passed"] == "1" for r in rows), [r for r in rows if r["passed"] != "1"]

    def test_invert_rows(self):
        _, text = run(load_config(dict(FAST, command="invert")))
        rows = list(csv.DictReader(io.StringIO(text)))
        assert float(rows[-1]["recovery_error"]) < 1e-8
        assert all(float(r["ratio"]) < 1 for r in rows[1:] if r["ratio"] != "nan")


class TestOutput:
    def test_seventeen_digits(self):
        text = to_csv([{"x": 0.1, "n": 3, "b": True}])
        assert text == "x,n,b\n0.10000000000000001,3,1\n"

    def test_round_trip_exact(self):
        value = math.pi / 7
        row = next(csv.DictReader(io.StringIO(to_csv([{"v": value}]))))
        assert float(row["v"]) == value

    def test_json_document(self):
        cfg = load_config(dict(FAST, command="meanfield", format="json"))
        doc = json.loads(run(cfg)[1])
        assert set(doc) == {"meta", "rows"}
        assert doc["meta"]["command"] == "meanfield"
        assert doc["rows"][0]["ratio"] is None
        assert load_config(doc["meta"]).resolved() == doc["meta"]


class TestMain:
    def test_error_exit_code(self, tmp_path, capsys):
        path = write(tmp_path, {"model": {"one_body": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]]}})
        assert main(["evolve", path]) == 2
        assert "model.one_body" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "none.json")]) == 2
        assert main(["run"]) == 2

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        assert main(["evolve", "--config", str(path)]) == 2

    def test_run_uses_config_command(self, tmp_path, capsys):
        path = write(tmp_path, dict(FAST, command="equivalence"))
        assert main(["run", path]) == 0
        assert capsys.readouterr().out.startswith("s,time,n_max,residual")

    def test_output_file_and_format(self, tmp_path):
        out = tmp_path / "r.json"
        path = write(tmp_path, FAST)
        assert main(["evolve", path, "-o", str(out), "--format", "json"]) == 0
        assert json.loads(out.read_text())["meta"]["command"] == "evolve"

    def test_warning_goes_to_stderr(self, tmp_path, capsys):
        path = write(tmp_path, dict(FAST, initial=[[[0.3, 0], [0, 0]], [[0, 0], [0.2, 0]]]))
        assert main(["evolve", path]) == 0
        assert "qkinetic: warning:" in capsys.readouterr().err

    @pytest.mark.parametrize("command", ["equivalence", "chaos"])
    def test_byte_identical_across_workers(self, tmp_path, command):
        path = write(tmp_path, FAST)
        outputs = []
        for k, workers in enumerate([1, 4, 1, 4]):
            out = tmp_path / f"out{k}.json"
            assert main([command, path, "--workers", str(workers), "--format", "json",
                         "-o", str(out)]) == 0
            outputs.append(out.read_bytes())
        assert len(set(outputs)) == 1
