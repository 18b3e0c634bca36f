"""
Tests for the rollhol command line
"""
import json

import pytest

from cli import EXIT_INPUT, EXIT_OK, EXIT_TOLERANCE, build_parser, main
from report import validate_report
from speclang import run_cli


def _run(tmp_path, *argv):
    out = tmp_path / "report.json"
    code = main(list(argv) + ["--out", str(out)])
    report = json.loads(out.read_text()) if out.exists() else None
    return code, report


def test_describe(tmp_path):
    code, report = _run(tmp_path, "describe", "heisenberg:m=1")
    assert code == EXIT_OK
    validate_report(report)
    assert report['describe']['dim'] == 3
    assert report['describe']['einstein_defect_at_base'] > 1.0


def test_holonomy_of_plane(tmp_path):
    code, report = _run(tmp_path, "holonomy", "euclidean:2", "--steps", "64")
    assert code == EXIT_OK
    section = report['holonomy']
    assert section['algebra_dim'] == 3
    assert section['label'] == "SO(3)"
    assert section['controllable'] is True


@pytest.mark.slow
def test_heisenberg_holonomy_report(tmp_path):
    code, report = _run(tmp_path, "holonomy", "heisenberg:m=1", "--seed", "7", "--steps", "128")
    assert code == EXIT_OK
    section = report['holonomy']
    assert (section['algebra_dim'], section['commutant_skew_dim']) == (4, 1)
    assert section['label'] == "U(2)"
    assert section['controllable'] is False


def test_heisenberg_holonomy_with_coarse_steps(tmp_path):
    code, report = _run(tmp_path, "holonomy", "heisenberg:m=1", "--loops", "4", "--seed", "7", "--steps", "64")
    assert code == EXIT_OK
    assert report['status'] == 'ok'
    section = report['holonomy']
    assert section['algebra_dim'] == 4
    assert section['svd_rank'] == 4
    assert section['closure_added'] == 0
    assert section['closure_residual'] < 1e-5
    assert section['label'] == "U(2)"


def test_corrupt_saved_report_is_input_error(tmp_path):
    code, report = _run(tmp_path, "classify", "euclidean:2", "--steps", "64")
    assert code == EXIT_OK
    report['status'] = 'unknown'
    saved = tmp_path / "corrupt.json"
    saved.write_text(json.dumps(report))
    assert main(["classify", str(saved)]) == EXIT_INPUT


def test_classify_sphere_then_report(tmp_path):
    code, report = _run(tmp_path, "classify", "sphere:3:radius=1", "--steps", "64")
    assert code == EXIT_OK
    assert report['holonomy']['label'] == "TRIVIAL"
    assert report['holonomy']['controllable'] is False

    saved = tmp_path / "saved.json"
    saved.write_text(json.dumps(report))
    out = tmp_path / "again.json"
    assert main(["classify", str(saved), "--out", str(out)]) == EXIT_OK
    again = json.loads(out.read_text())
    assert again['holonomy']['label'] == "TRIVIAL"
    assert again['spec_digest'] == report['spec_digest']


def test_reports_are_deterministic(tmp_path):
    first = main(["holonomy", "euclidean:2", "--steps", "32", "--out", str(tmp_path / "a.json")])
    second = main(["holonomy", "euclidean:2", "--steps", "32", "--out", str(tmp_path / "b.json")])
    assert first == second == EXIT_OK
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    a.pop('timestamp')
    b.pop('timestamp')
    assert a == b


def test_crosscheck_from_loop_file(tmp_path):
    loop = tmp_path / "square.json"
    loop.write_text(json.dumps({"segments": [{"type": "polyline",
                                              "points": [[0, 0], [0.5, 0], [0.5, 0.5], [0, 0.5], [0, 0]]}],
                                "steps": 256, "loop": True}))
    code, report = _run(tmp_path, "roll", "crosscheck", "euclidean:2", "--loop", str(loop))
    assert code == EXIT_OK
    assert report['rolling']['residuals']['holonomy'] < 1e-4
    assert report['rolling']['passed'] is True


def test_develop_with_trajectory(tmp_path):
    curve = tmp_path / "line.json"
    curve.write_text(json.dumps({"segments": [{"type": "polyline", "points": [[0, 0], [1, 0.5]]}], "steps": 64}))
    code, report = _run(tmp_path, "roll", "develop", "euclidean:2", "--curve", str(curve), "--trajectory")
    assert code == EXIT_OK
    assert len(report['rolling']['trajectory']) == 65


def test_unsupported_structure_is_tolerance_failure(tmp_path):
    """The plane has no invariant complex structure"""
    code, _ = _run(tmp_path, "sasaki", "extract", "euclidean:2", "--steps", "32", "--lattice", "2")
    assert code == EXIT_TOLERANCE


@pytest.mark.parametrize("argv", [
    ["holonomy", "torus:2"],
    ["holonomy", "euclidean:2", "--steps", "0"],
    ["roll", "develop", "euclidean:2"],
    ["frobnicate"],
    [],
])
def test_input_errors(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path / "x.json")] if argv else argv) == EXIT_INPUT


def test_run_cli_entry_point(tmp_path):
    assert run_cli(["describe", "euclidean:2", "--out", str(tmp_path / "d.json")]) == EXIT_OK


def test_parser_defaults():
    args = build_parser().parse_args(["cone", "verify", "heisenberg:m=1"])
    assert args.loops == 8
    assert args.s0 is None
    assert args.out == "-"


if __name__ == "__main__":
    print("Running command-line tests...\n")
    test_parser_defaults()
    print("All tests completed!")
