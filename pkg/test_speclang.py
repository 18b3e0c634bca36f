"""
Tests for manifold and curve documents, built-in tags and report helpers
"""
import json

import numpy as np
import pytest

from connections import ConeSpec
from errors import DomainError, MetricError, SpecError, ToleranceError
from geometry import eval_metric, frame_field
from report import check_finite, finalize, is_report, new_report, validate_report
from speclang import (builtin_manifold, load_curve, load_manifold, manifold_from_document, resolve_manifold,
                      spec_digest)


def _write(tmp_path, name, document):
    path = tmp_path / name
    path.write_text(json.dumps(document))
    return path


def test_heisenberg_builtin_file(tmp_path):
    """The declared frame of the built-in is orthonormal for its metric"""
    spec = load_manifold(_write(tmp_path, "h.json", {"builtin": "heisenberg:m=1"}))
    assert spec.dim == 3
    for x in spec.random_points(10, seed=3):
        E = np.column_stack([frame_field(spec, a)(x) for a in range(3)])
        np.testing.assert_allclose(E.T @ eval_metric(spec, x) @ E, np.eye(3), atol=1e-12)


def test_euclidean_builtin_file(tmp_path):
    spec = load_manifold(_write(tmp_path, "e.json", {"builtin": "euclidean:3", "name": "flat"}))
    assert spec.name == "flat"
    np.testing.assert_allclose(eval_metric(spec, [1.0, -2.0, 0.5]), np.eye(3))


def test_explicit_metric_file(tmp_path):
    document = {
        "name": "upper",
        "dim": 2,
        "metric": [["1/x2^2", "0"], ["0", "1/x2^2"]],
        "domain": [[None, None], [0, None]],
        "base_point": [0.0, 2.0],
    }
    spec = load_manifold(_write(tmp_path, "upper.json", document))
    assert spec.base_point.tolist() == [0.0, 2.0]
    np.testing.assert_allclose(eval_metric(spec, [3.0, 2.0]), 0.25 * np.eye(2))
    with pytest.raises(DomainError):
        eval_metric(spec, [0.0, -1.0])


@pytest.mark.parametrize("document, error", [
    ({"name": "bad", "dim": 2, "metric": [["1", "x1"], ["0", "1"]]}, MetricError),
    ({"name": "bad", "dim": 3, "metric": [["1", "0"], ["0", "1"]]}, SpecError),
    ({"name": "bad", "dim": 2, "metric": [["1", "foo"], ["foo", "1"]]}, SpecError),
    ({"builtin": "euclidean:3", "dim": 2}, SpecError),
    ({"builtin": "euclidean:3", "metric": [["1"]]}, SpecError),
    ({"dim": 2, "metric": [["1", "0"], ["0", "1"]], "colour": "red"}, SpecError),
    ({"builtin": "torus:2"}, SpecError),
])
def test_rejected_manifold_documents(document, error):
    with pytest.raises(error):
        manifold_from_document(document)


def test_unreadable_files(tmp_path):
    with pytest.raises(SpecError):
        load_manifold(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(SpecError):
        load_manifold(broken)


@pytest.mark.parametrize("tag, dim", [
    ("euclidean:4", 4),
    ("sphere:3:radius=2", 3),
    ("hyperbolic:2", 2),
    ("heisenberg:m=2", 5),
    ("heisenberg", 3),
    ("cone:heisenberg:m=1", 4),
])
def test_builtin_tags(tag, dim):
    assert builtin_manifold(tag).dim == dim


def test_cone_tag_and_bad_tags():
    assert isinstance(builtin_manifold("cone:sphere:2"), ConeSpec)
    for tag in ("sphere", "sphere:0", "sphere:2:radius=-1", "euclidean:two", "cone:", "klein:2"):
        with pytest.raises(SpecError):
            builtin_manifold(tag)
    with pytest.raises(SpecError):
        resolve_manifold("no-such-file.json")


def test_digest_is_stable():
    first = spec_digest(builtin_manifold("heisenberg:m=1"))
    assert first == spec_digest(builtin_manifold("heisenberg:m=1"))
    assert len(first) == 64
    assert first != spec_digest(builtin_manifold("euclidean:3"))


def test_curve_documents(tmp_path):
    document = {"segments": [{"type": "polyline", "points": [[0, 0], [1, 0], [1, 1]]},
                             {"type": "reversed", "segment": {"type": "polyline", "points": [[0, 0], [1, 1]]}}],
                "steps": 32, "loop": True}
    curve = load_curve(_write(tmp_path, "loop.json", document))
    assert curve.is_loop
    assert len(curve.segments) == 3
    assert curve.steps_per_segment == 32
    assert load_curve(document, steps=8).steps_per_segment == 8


@pytest.mark.parametrize("document", [
    {"segments": []},
    {"segments": [{"type": "polyline"}]},
    {"segments": [{"type": "spiral", "points": [[0, 0], [1, 1]]}]},
    {"segments": [{"type": "polyline", "points": [[0, 0], [1, 1]]}], "loop": True},
    {"segments": [{"type": "polyline", "points": [[0, 0], [1, 1]]}, {"type": "polyline", "points": [[2, 2], [3, 3]]}]},
])
def test_rejected_curve_documents(document):
    with pytest.raises(SpecError):
        load_curve(document)


def test_report_helpers():
    spec = builtin_manifold("euclidean:2")
    report = finalize(new_report('describe', spec))
    assert is_report(report)
    assert report['spec_digest'] == spec_digest(spec)
    validate_report(report)
    with pytest.raises(ToleranceError):
        check_finite({'holonomy': {'singular_values': [1.0, float('nan')]}})
    broken = dict(report, status='maybe')
    with pytest.raises(SpecError):
        validate_report(broken)


if __name__ == "__main__":
    print("Running manifold document tests...\n")
    test_digest_is_stable()
    test_cone_tag_and_bad_tags()
    test_report_helpers()
    print("All tests completed!")
