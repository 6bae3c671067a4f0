"""
CLI tests - subcommands, exit codes and output files.
"""

import json
import math
import os
import sys

import pytest

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

import cli
from core import SCHEMA_VERSION

SQUARE = json.dumps({"type": "vpolytope", "vertices": [[-1, -1], [1, -1], [1, 1], [-1, 1]]})


@pytest.fixture(autouse=True)
def log_to_tmp(tmp_path, monkeypatch):
    """Keep the CLI log file out of the project tree."""
    monkeypatch.setattr(cli, "LOG_PATH", str(tmp_path / "log" / "hilbertlab.log"))


def _json_output(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


class TestDistanceCommands:
    def test_family_disk(self, capsys):
        assert cli.main(["distance", "--body", "family:ellipsoid", "--x", "0,0", "--y", "0.5,0"]) == 0
        result = _json_output(capsys)
        assert result["distance"] == pytest.approx(0.5 * math.log(3))
        assert len(result["a"]) == 3

    def test_inline_square(self, capsys):
        assert cli.main(["distance", "--body", SQUARE, "--x", "[0, 0]", "--y", "0.5,0"]) == 0
        assert _json_output(capsys)["distance"] == pytest.approx(0.5 * math.log(3))

    def test_body_file_and_output(self, tmp_path):
        body = tmp_path / "square.json"
        body.write_text(SQUARE, encoding="utf-8")
        out = tmp_path / "result" / "distance.json"
        assert cli.main(["distance", "--body", str(body), "--x", "0,0", "--y", "0,0", "--out", str(out)]) == 0
        result = json.loads(out.read_text(encoding="utf-8"))
        assert result["distance"] == 0.0
        assert result["a"] is None

    def test_displacement(self, capsys):
        """diag(2, 1, 1/2) moves the simplex center by ln 2."""
        code = cli.main(["displacement", "--body", "family:simplex:2", "--x", "1,1,1",
                         "--g", "[[2, 0, 0], [0, 1, 0], [0, 0, 0.5]]"])
        assert code == 0
        assert _json_output(capsys)["displacement"] == pytest.approx(math.log(2))


class TestExitCodes:
    """HilbertLabError subclasses map to their exit codes."""

    def test_bad_point_is_schema_error(self):
        assert cli.main(["distance", "--body", "family:ellipsoid", "--x", "a,b", "--y", "0,0"]) == 2

    def test_malformed_body(self):
        assert cli.main(["distance", "--body", "{oops", "--y", "0,0"]) == 2

    def test_non_automorphism(self):
        code = cli.main(["displacement", "--body", "family:ellipsoid", "--x", "0,0",
                         "--g", "[[2, 0, 0], [0, 1, 0], [0, 0, 1]]"])
        assert code == 3

    def test_point_outside(self):
        assert cli.main(["distance", "--body", "family:ellipsoid", "--x", "0,0", "--y", "2,0"]) == 1

    def test_bad_family_dimension(self):
        assert cli.main(["distance", "--body", "family:ellipsoid:two", "--y", "0,0"]) == 2

    def test_missing_scenario(self, tmp_path):
        assert cli.main(["scan", "--scenario", str(tmp_path / "absent.json")]) == 2

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            cli.main(["teleport"])


class TestStandardize:
    def test_off_center_disk(self, capsys):
        assert cli.main(["standardize", "--body", "family:ellipsoid", "--x", "0.5,0"]) == 0
        audit = _json_output(capsys)
        assert audit["certificate"]["valid"] is True
        assert audit["body"]["type"] == "ellipsoid"


class TestScan:
    def test_scenario_to_directory(self, tmp_path):
        scenario = json.dumps({
            "schema": SCHEMA_VERSION,
            "family": {"tag": "ellipsoid", "n": 2, "parameters": {"boosts": [[0, 2.0]]}},
            "epsilons": [0.5, 2.5],
            "depth": 2,
        })
        assert cli.main(["scan", "--scenario", scenario, "--out", str(tmp_path), "--seed", "5"]) == 0
        report = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
        assert report["seed"] == 5
        assert [row["subgroup_size"] for row in report["rows"]] == [1, 3]
        assert (tmp_path / "report.csv").exists()

    def test_scenario_to_stdout(self, capsys):
        scenario = json.dumps({"schema": SCHEMA_VERSION, "body": json.loads(SQUARE), "epsilons": [0.5]})
        assert cli.main(["scan", "--scenario", scenario]) == 0
        assert _json_output(capsys)["rows"][0]["verdict"] == "Nilpotent"


class TestRenderAndVerify:
    def test_render(self, tmp_path):
        out = tmp_path / "ball.svg"
        assert cli.main(["render", "--body", "family:ellipsoid", "--x", "0,0", "--radii", "0.5",
                         "--samples", "16", "--out", str(out)]) == 0
        assert out.read_text(encoding="utf-8").count('class="ball"') == 1

    def test_verify_projective(self, capsys):
        assert cli.main(["verify", "projective"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines
        assert all(line.startswith("PASS projective.") for line in lines)

    def test_stabilizer(self, capsys):
        assert cli.main(["stabilizer", "--families", "ellipsoid:2", "--epsilons", "0.1,0.5", "--samples", "20"]) == 0
        report = _json_output(capsys)
        assert [row["epsilon"] for row in report["rows"]] == [0.1, 0.5]
