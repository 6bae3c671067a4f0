"""
Scenario tests - schema validation, epsilon scans, Margulis scans, reports and
the stabilizer experiment.
"""

import csv
import json
import os
import sys

import numpy as np
import pytest

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from convex import make_family
from core import SCHEMA_VERSION, NotAnAutomorphism, SchemaError
from group_lab import is_stabilizer_element, proximity_gauge
from scenario import (
    CSV_COLUMNS,
    ScanReport,
    Scenario,
    _stabilizer_samples,
    dump_json,
    epsilon_star,
    load_scenario,
    margulis_scan,
    parse_point,
    run_scenario,
    stabilizer_experiment,
    write_report,
)

DISK = {"type": "ellipsoid", "Q": [[1, 0, 0], [0, 1, 0], [0, 0, -1]]}


def _scenario(**overrides) -> Scenario:
    data = {
        "schema": SCHEMA_VERSION,
        "family": {"tag": "ellipsoid", "n": 2, "parameters": {"boosts": [[0, 2.0], [1, 2.0]]}},
        "epsilons": [0.1, 0.5, 2.0],
        "depth": 3,
    }
    data.update(overrides)
    return Scenario.model_validate(data)


# ============================================================================
# 1. Schema
# ============================================================================

class TestScenarioSchema:
    """Versioned scenario files."""

    def test_load_from_string(self):
        scenario = load_scenario(json.dumps({"schema": SCHEMA_VERSION, "body": DISK, "epsilons": [0.5]}))
        assert scenario.body["type"] == "ellipsoid"
        assert scenario.depth == 3
        assert scenario.class_bound == 6

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps({"schema": SCHEMA_VERSION, "body": DISK, "epsilons": [0.5]}), encoding="utf-8")
        assert load_scenario(str(path)).epsilons == [0.5]

    def test_wrong_schema(self):
        with pytest.raises(SchemaError):
            load_scenario(json.dumps({"schema": "hilbertlab/v0", "body": DISK, "epsilons": [0.5]}))

    def test_epsilons_must_increase(self):
        with pytest.raises(SchemaError):
            load_scenario(json.dumps({"schema": SCHEMA_VERSION, "body": DISK, "epsilons": [0.5, 0.1]}))

    def test_one_source_only(self):
        with pytest.raises(SchemaError):
            load_scenario(json.dumps({"schema": SCHEMA_VERSION, "body": DISK,
                                      "family": {"tag": "simplex"}, "epsilons": [0.5]}))

    def test_unknown_field(self):
        with pytest.raises(SchemaError):
            load_scenario(json.dumps({"schema": SCHEMA_VERSION, "body": DISK, "epsilons": [0.5], "colour": 1}))

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError):
            load_scenario(str(tmp_path / "absent.json"))

    def test_points(self):
        """n coordinates are affine, n+1 homogeneous."""
        assert parse_point([0.5, 0.0], 2) == parse_point([1.0, 0.0, 2.0], 2)
        with pytest.raises(SchemaError):
            parse_point([1.0], 2)


# ============================================================================
# 2. Scans
# ============================================================================

class TestRunScenario:
    """Epsilon scans over one marked body."""

    def test_klein_boosts(self):
        """Boosts of length 2 stay out until epsilon reaches 2."""
        report = run_scenario(_scenario())
        sizes = [row.subgroup_size for row in report.rows]
        assert sizes[:2] == [1, 1]
        assert sizes[2] >= 3
        assert [row.verdict for row in report.rows[:2]] == ["Nilpotent", "Nilpotent"]
        assert report.rows[2].min_displacement == pytest.approx(2.0, abs=1e-9)
        assert report.epsilon_star >= 0.5

    def test_commuting_diagonals(self):
        """Diagonal simplex automorphisms are abelian at every epsilon."""
        report = run_scenario(_scenario(
            family={"tag": "simplex", "n": 2, "parameters": {"diagonals": [[2.0, 1.0, 0.5], [1.0, 2.0, 0.5]]}},
            epsilons=[0.1, 1.0, 5.0], depth=2))
        assert all(row.verdict == "Nilpotent" and row.nilpotency_class == 1 for row in report.rows)
        assert report.rows[-1].subgroup_size > 1
        assert report.monotone
        assert report.epsilon_star == 5.0

    def test_no_generators(self):
        """A body without generators scans the trivial group."""
        report = run_scenario(_scenario(family=None, body=DISK, basepoint=[0.2, 0.1]))
        assert [row.subgroup_size for row in report.rows] == [1, 1, 1]
        assert all(row.verdict == "Nilpotent" and row.nilpotency_class == 1 for row in report.rows)
        assert report.pairs[0].word == []
        assert report.pairs[0].displacement == 0.0

    def test_bad_generator(self):
        with pytest.raises(NotAnAutomorphism):
            run_scenario(_scenario(family=None, body=DISK, generators=[[[2, 0, 0], [0, 1, 0], [0, 0, 1]]]))

    def test_deterministic(self):
        first = dump_json(run_scenario(_scenario()))
        assert dump_json(run_scenario(_scenario())) == first
        assert dump_json(ScanReport.model_validate_json(first)) == first

    def test_outputs_written(self, tmp_path):
        json_path, csv_path = tmp_path / "out" / "report.json", tmp_path / "out" / "report.csv"
        run_scenario(_scenario(outputs={"json": str(json_path), "csv": str(csv_path)}))
        data = json.loads(json_path.read_text(encoding="utf-8"))
        assert data["schema"] == SCHEMA_VERSION
        assert len(data["rows"]) == 3
        with open(csv_path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == CSV_COLUMNS
        assert len(rows) == 4


class TestEpsilonStar:
    def test_stops_at_first_failure(self):
        report = run_scenario(_scenario())
        rows = [row.model_copy(update={"verdict": v}) for row, v in zip(report.rows, ["Nilpotent", "NotNilpotent",
                                                                                     "Nilpotent"])]
        assert epsilon_star(rows) == 0.1

    def test_zero_when_first_fails(self):
        report = run_scenario(_scenario())
        rows = [row.model_copy(update={"verdict": "Inconclusive"}) for row in report.rows]
        assert epsilon_star(rows) == 0.0


class TestMargulisScan:
    """Parameter grids over a family."""

    def _grid(self, **overrides):
        return _scenario(epsilons=[0.5], scan={"configurations": [
            {"boosts": [[0, 2.0]]},
            {"boosts": [[0, 2.0], [1, 2.0]]},
            {"boosts": [[0, 1.5], [1, 3.0]]},
        ]}, **overrides)

    def test_one_row_per_configuration(self):
        report = margulis_scan(self._grid(), threads=1)
        assert len(report.configurations) == 3
        assert all(len(c.rows) == 1 for c in report.configurations)
        assert report.epsilon_star == 0.5
        assert report.configurations[1].label == "ellipsoid[1]"

    def test_threads_do_not_change_results(self):
        assert dump_json(margulis_scan(self._grid(), threads=2)) == dump_json(margulis_scan(self._grid(), threads=1))

    def test_csv_has_configuration_column(self, tmp_path):
        report = margulis_scan(self._grid(), threads=1)
        path = tmp_path / "scan.csv"
        write_report(report, None, str(path))
        with open(path, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["configuration"] + CSV_COLUMNS
        assert [r[0] for r in rows[1:]] == ["0", "1", "2"]

    def test_needs_scan_block(self):
        with pytest.raises(SchemaError):
            margulis_scan(_scenario())


# ============================================================================
# 3. Stabilizer experiment
# ============================================================================

class TestStabilizerExperiment:
    """Small displacement against closeness to the stabilizer."""

    @pytest.fixture(scope="class")
    def report(self):
        return stabilizer_experiment([("ellipsoid", 2), ("simplex", 2)], [0.01, 0.1, 0.5], samples=200, seed=7)

    def test_rows(self, report):
        assert len(report.rows) == 6
        assert {r.family for r in report.rows} == {"ellipsoid:2", "simplex:2"}

    def test_samples_grow_with_epsilon(self, report):
        for family in ("ellipsoid:2", "simplex:2"):
            counts = [r.samples for r in report.rows if r.family == family]
            assert counts == sorted(counts)
            assert counts[-1] == 200

    def test_gauges_nondecreasing(self, report):
        for family in ("ellipsoid:2", "simplex:2"):
            gauges = [r.stabilizer_gauge for r in report.rows if r.family == family and r.stabilizer_gauge is not None]
            assert gauges == sorted(gauges)

    def test_small_displacement_is_near_stabilizer(self, report):
        smallest = next(r for r in report.rows if r.family == "ellipsoid:2")
        assert smallest.samples > 0
        assert smallest.stabilizer_gauge < 0.05

    def test_stabilizer_samples_leave_the_grid(self):
        """Ball stabilizer samples fix the center without being listed grid elements."""
        family = make_family("ellipsoid", 2)
        samples = _stabilizer_samples(family, 50, np.random.default_rng(11))
        assert len(samples) == 50
        for k in samples:
            assert is_stabilizer_element(family.marked(), k)
            assert min(proximity_gauge(s, k) for s in family.stabilizer) > 1e-9

    def test_finite_stabilizer_samples(self):
        family = make_family("simplex", 2)
        for k in _stabilizer_samples(family, 20, np.random.default_rng(11)):
            assert min(proximity_gauge(s, k) for s in family.stabilizer) < 1e-12
