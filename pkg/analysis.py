"""
Analysis pipeline shared by the command-line tool and the HTTP service.

RollingAnalyzer chains the engine's stages for one manifold and turns
their output into report sections. Each public method returns a finished
report document (see report.py); status is "tolerance_failure" when a
verification residual exceeded its tolerance, or when bracket closure had
to enlarge a holonomy span.
"""
import logging
from typing import Dict, Optional, Sequence, Union

import numpy as np

from config import Settings, load_settings
from connections import cone_spec, verify_cone_isomorphism
from curves import CurvePath
from errors import SpecError
from geometry import ManifoldSpec, constant_curvature_defect, einstein_defect, ricci
from holonomy import (GroupVerdict, HolonomyAlgebra, classify, classify_dimensions, commutant_skew,
                      controllability, estimate_algebra, generate_loops)
from report import finalize, new_report
from rolling import develop, holonomy_crosscheck, rolling_residuals
from structures import (extend_parallel, extract_3sasaki, extract_sasaki, invariant_complex_structure,
                        sphere_seed_triple, verify_sasaki)

logger = logging.getLogger(__name__)

CONE_TOLERANCE = 1e-5
CONE_HEIGHTS = (0.5, 1.0, 3.0)
ROLLING_TOLERANCE = 1e-5
CROSSCHECK_TOLERANCE = 1e-4
STRUCTURE_RADIUS = 0.3
DEFAULT_LATTICE = 8
STRUCTURE_CHOICES = ("auto", "hopf")


class RollingAnalyzer:
    """
    Runs holonomy, structure, cone and rolling analyses with shared settings.

    Args:
        settings: Runtime settings; default read from the environment
    """

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or load_settings()

    # holonomy

    def estimate(self, spec: ManifoldSpec, loops: int = 0, seed: int = 0, steps: Optional[int] = None,
                 rank_tolerance: Optional[float] = None, base: Optional[Sequence[float]] = None) -> HolonomyAlgebra:
        steps = steps or self.settings.steps
        base = spec.require_inside(spec.base_point if base is None else base)
        family = generate_loops(spec, base, loops, seed, steps)
        return estimate_algebra(spec, 1, base, family,
                                rank_tolerance=rank_tolerance or self.settings.rank_tolerance,
                                threads=self.settings.threads)

    @staticmethod
    def holonomy_section(algebra: HolonomyAlgebra, verdict: GroupVerdict) -> Dict:
        controllable, explanation = controllability(verdict)
        gap = algebra.singular_gap() if algebra is not None else None
        section = verdict.to_dict()
        section.update({
            'controllable': controllable,
            'explanation': explanation,
            'singular_values': algebra.singular_values if algebra is not None else [],
            'singular_gap': gap if gap is not None and np.isfinite(gap) else None,
        })
        if algebra is not None:
            section.update({
                'rank_tolerance': algebra.rank_tolerance,
                'svd_rank': algebra.svd_rank,
                'closure_added': algebra.closure_added,
                'closure_residual': algebra.closure_residual,
                'half_loop_rank': algebra.half_loop_rank,
                'sample_metric_defect': algebra.sample_metric_defect(),
                'sample_count': algebra.sample_count,
                'base': algebra.base.tolist(),
            })
        return section

    def holonomy(self, spec: ManifoldSpec, loops: int = 0, seed: int = 0, steps: Optional[int] = None,
                 rank_tolerance: Optional[float] = None, base: Optional[Sequence[float]] = None,
                 command: str = 'holonomy') -> Dict:
        """Estimate and classify the rolling holonomy of spec."""
        steps = steps or self.settings.steps
        algebra = self.estimate(spec, loops, seed, steps, rank_tolerance, base)
        verdict = classify(algebra, spec.dim)
        logger.info("%s: holonomy %s (algebra dimension %d, commutant dimension %d)",
                    spec.name, verdict.label, verdict.algebra_dim, verdict.commutant_skew_dim)
        report = new_report(command, spec, seed, steps)
        report['holonomy'] = self.holonomy_section(algebra, verdict)
        report['holonomy']['loops'] = loops
        if algebra.closure_added:
            report['status'] = 'tolerance_failure'
        return finalize(report)

    def classify(self, source: Union[ManifoldSpec, Dict], **options) -> Dict:
        """
        Classify a manifold, or re-classify the holonomy section of an earlier report
        from its stored dimensions.
        """
        if isinstance(source, ManifoldSpec):
            return self.holonomy(source, command='classify', **options)
        section = source.get('holonomy')
        if not section or 'commutant_skew_dim' not in section or 'n' not in section:
            raise SpecError("report has no holonomy section to classify")
        verdict = classify_dimensions(section['algebra_dim'], section['commutant_skew_dim'], section['n'],
                                      section.get('trace_defect'))
        verdict.orbit_dim = section.get('orbit_dim')
        report = {key: source[key] for key in ('tool_version', 'spec_digest', 'spec', 'seed', 'steps')
                  if key in source}
        report.update({'command': 'classify', 'status': source.get('status', 'ok')})
        report['holonomy'] = self.holonomy_section(None, verdict)
        report['holonomy']['singular_values'] = section.get('singular_values', [])
        report['holonomy']['singular_gap'] = section.get('singular_gap')
        return finalize(report)

    # Sasakian structures

    def _structure_samples(self, spec: ManifoldSpec, lattice: int, seed: int, steps: int,
                           structure: str):
        algebra = self.estimate(spec, 0, seed, steps)
        if structure == 'hopf':
            J0 = invariant_complex_structure(algebra, seed=sphere_seed_triple(spec.dim))
        else:
            J0 = invariant_complex_structure(algebra, commutant=commutant_skew(algebra))
        base = algebra.base
        targets = np.vstack([base[None], spec.random_points(lattice - 1, seed, STRUCTURE_RADIUS, base)])
        return extend_parallel(spec, 1, J0, base, targets)

    def sasaki(self, spec: ManifoldSpec, mode: str = 'verify', lattice: int = DEFAULT_LATTICE, seed: int = 0,
               steps: Optional[int] = None, structure: str = 'auto') -> Dict:
        """
        Extract the Sasakian (or 3-Sasakian) data from the invariant J^R and,
        in verify mode, check the structure identities on the sample lattice.
        """
        if mode not in ('extract', 'verify'):
            raise SpecError(f"unknown sasaki mode {mode!r}")
        if lattice < 1:
            raise SpecError("lattice needs at least one point")
        steps = steps or self.settings.steps
        samples = self._structure_samples(spec, lattice, seed, steps, structure)
        report = new_report(f"sasaki {mode}", spec, seed, steps)
        if samples.count == 3:
            triple = extract_3sasaki(spec, samples)
            structures = triple.structures
            residuals = dict(triple.residuals)
        else:
            structures = [extract_sasaki(spec, samples)]
            residuals = {'path_residual': samples.path_residual}
        for index, found in enumerate(structures):
            prefix = '' if len(structures) == 1 else f"{index + 1}_"
            residuals.update({f"{prefix}{key}": value for key, value in found.algebraic.items()})
        section = {
            'structures': len(structures),
            'lattice': lattice,
            'sign': structures[0].sign,
            'reeb_at_base': structures[0].Z[0].tolist(),
            'J_at_base': structures[0].J[0].tolist(),
        }
        passed = True
        if mode == 'verify':
            checks = [verify_sasaki(spec, found) for found in structures]
            for index, check in enumerate(checks):
                prefix = '' if len(structures) == 1 else f"{index + 1}_"
                residuals.update({f"{prefix}{key}": value for key, value in check['residuals'].items()})
                residuals[f"{prefix}einstein_defect"] = check['einstein_defect']
            section['omega_min_singular_value'] = min(c['omega_min_singular_value'] for c in checks)
            passed = all(c['passed'] for c in checks)
        section.update({'residuals': residuals, 'passed': passed})
        if not passed:
            report['status'] = 'tolerance_failure'
        report['sasaki'] = section
        return finalize(report)

    # cone

    def cone(self, spec: ManifoldSpec, heights: Sequence[float] = CONE_HEIGHTS, loops: int = 8, seed: int = 0,
             steps: Optional[int] = None) -> Dict:
        """Compare cone Levi-Civita holonomy with rolling holonomy at several cone heights."""
        steps = steps or self.settings.steps
        cone = cone_spec(spec)
        residuals = {}
        defect = 0.0
        for s0 in heights:
            base = np.append(spec.base_point, float(s0))
            worst = 0.0
            for loop in generate_loops(cone, base, loops, seed, steps):
                result = verify_cone_isomorphism(spec, loop, s0, steps, cone)
                worst = max(worst, result['residual'])
                defect = max(defect, result['rolling_defect'])
            residuals[f"s0={float(s0):g}"] = worst
            logger.info("cone of %s at s0=%g: worst residual %.2e", spec.name, s0, worst)
        passed = all(value < CONE_TOLERANCE for value in residuals.values())
        report = new_report('cone verify', spec, seed, steps)
        report['cone'] = {'residuals': residuals, 'rolling_defect': defect, 'loops': loops,
                          'tolerance': CONE_TOLERANCE, 'passed': passed}
        if not passed:
            report['status'] = 'tolerance_failure'
        return finalize(report)

    # rolling

    def develop(self, spec: ManifoldSpec, curve: CurvePath, steps: Optional[int] = None,
                include_trajectory: bool = False) -> Dict:
        trajectory = develop(spec, curve, steps=steps)
        ns, nt = rolling_residuals(trajectory)
        passed = ns < ROLLING_TOLERANCE and nt < ROLLING_TOLERANCE
        report = new_report('roll develop', spec, None, trajectory.steps)
        report['rolling'] = {
            'residuals': {'no_slip': ns, 'no_twist': nt},
            'reorthonormalizations': trajectory.reorthonormalizations,
            'initial': trajectory.states[0].to_dict(),
            'final': trajectory.final.to_dict(),
            'tolerance': ROLLING_TOLERANCE,
            'passed': passed,
        }
        if include_trajectory:
            report['rolling']['trajectory'] = trajectory.to_document()
        if not passed:
            report['status'] = 'tolerance_failure'
        return finalize(report)

    def crosscheck(self, spec: ManifoldSpec, loop: CurvePath, steps: Optional[int] = None) -> Dict:
        result = holonomy_crosscheck(spec, loop, steps=steps)
        passed = result['residual'] < CROSSCHECK_TOLERANCE
        report = new_report('roll crosscheck', spec, None, result['steps'])
        report['rolling'] = {
            'residuals': {'holonomy': result['residual'], 'no_slip': result['ns_residual'],
                          'no_twist': result['nt_residual']},
            'kinematic': result['kinematic'],
            'transport': result['transport'],
            'reorthonormalizations': result['reorthonormalizations'],
            'tolerance': CROSSCHECK_TOLERANCE,
            'passed': passed,
        }
        if not passed:
            report['status'] = 'tolerance_failure'
        return finalize(report)

    # description

    def describe(self, spec: ManifoldSpec) -> Dict:
        """Spec summary plus curvature data at the base point."""
        section = spec.describe()
        Ric = ricci(spec, spec.base_point)
        section['ricci_at_base'] = Ric.tolist()
        section['scalar_curvature_at_base'] = float(np.trace(Ric))
        if spec.dim % 2 == 1 and spec.dim > 1:
            section['einstein_defect_at_base'] = einstein_defect(spec, spec.base_point, spec.dim - 1)
        if spec.dim > 1:
            section['unit_curvature_defect_at_base'] = constant_curvature_defect(spec, spec.base_point, 1.0)
        report = new_report('describe', spec)
        report['describe'] = section
        return finalize(report)
