"""
Test script for the RollHol analysis pipeline
"""
import numpy as np
import pytest

from analysis import RollingAnalyzer
from config import Settings
from curves import CurvePath
from errors import SpecError, StructureError
from report import validate_report
from speclang import builtin_manifold


@pytest.fixture(scope="module")
def analyzer():
    return RollingAnalyzer(Settings(threads=2, steps=128, rank_tolerance=1e-6, log_level='INFO', port=5000))


def test_describe_sphere(analyzer):
    """Ricci of the unit 3-sphere is 2g"""
    report = analyzer.describe(builtin_manifold("sphere:3"))
    section = report['describe']
    np.testing.assert_allclose(section['ricci_at_base'], 2.0 * np.eye(3), atol=1e-8)
    assert section['scalar_curvature_at_base'] == pytest.approx(6.0)
    assert section['einstein_defect_at_base'] < 1e-8
    assert section['unit_curvature_defect_at_base'] < 1e-8


def test_closure_growth_marks_tolerance_failure(analyzer, monkeypatch):
    original = analyzer.estimate

    def widened(*args, **kwargs):
        algebra = original(*args, **kwargs)
        algebra.closure_added = 1
        return algebra

    monkeypatch.setattr(analyzer, "estimate", widened)
    report = analyzer.holonomy(builtin_manifold("euclidean:2"), steps=64)
    validate_report(report)
    assert report['status'] == 'tolerance_failure'
    assert report['holonomy']['closure_added'] == 1
    assert report['holonomy']['svd_rank'] == 3


def test_heisenberg_sasaki_verify(analyzer):
    report = analyzer.sasaki(builtin_manifold("heisenberg:m=1"), 'verify', lattice=4)
    validate_report(report)
    section = report['sasaki']
    assert report['status'] == 'ok'
    assert section['passed'] is True
    np.testing.assert_allclose(section['reeb_at_base'], [0.0, 0.0, 1.0], atol=1e-6)
    assert section['residuals']['killing'] < 1e-4
    assert section['residuals']['curvature_identity'] < 1e-4


def test_three_sphere_hopf_triple(analyzer):
    report = analyzer.sasaki(builtin_manifold("sphere:3"), 'extract', lattice=3, structure='hopf')
    section = report['sasaki']
    assert section['structures'] == 3
    assert section['residuals']['epsilon_relations'] < 1e-8
    assert section['residuals']['Z_orthonormal'] < 1e-6


def test_sphere_needs_a_seed(analyzer):
    """The unit sphere has trivial holonomy, so every skew matrix commutes with it"""
    with pytest.raises(StructureError):
        analyzer.sasaki(builtin_manifold("sphere:3"), 'extract', lattice=2)


def test_cone_verify(analyzer):
    report = analyzer.cone(builtin_manifold("heisenberg:m=1"), heights=(0.5, 3.0), loops=2)
    section = report['cone']
    assert set(section['residuals']) == {"s0=0.5", "s0=3"}
    assert all(value < 1e-5 for value in section['residuals'].values())
    assert section['passed'] is True


def test_develop_report(analyzer):
    curve = CurvePath.polyline([[0.0, 0.0], [1.0, 0.0]], steps=64)
    report = analyzer.develop(builtin_manifold("euclidean:2"), curve)
    rolling = report['rolling']
    assert rolling['passed'] is True
    np.testing.assert_allclose(rolling['final']['xhat'], [np.sin(1.0), 0.0, np.cos(1.0)], atol=1e-8)
    assert 'trajectory' not in rolling


def test_reclassify_keeps_dimensions(analyzer):
    first = analyzer.holonomy(builtin_manifold("euclidean:2"), steps=64)
    again = analyzer.classify(first)
    assert again['holonomy']['algebra_dim'] == first['holonomy']['algebra_dim'] == 3
    assert again['holonomy']['controllable'] is True
    assert again['seed'] == first['seed']


def test_bad_requests(analyzer):
    with pytest.raises(SpecError):
        analyzer.classify({'tool_version': '1.0.0', 'spec_digest': '0' * 64})
    with pytest.raises(SpecError):
        analyzer.sasaki(builtin_manifold("heisenberg:m=1"), 'guess')


if __name__ == "__main__":
    print("Testing RollHol analysis pipeline...\n")
    rolling_analyzer = RollingAnalyzer()
    test_describe_sphere(rolling_analyzer)
    test_develop_report(rolling_analyzer)
    print("All tests completed!")
