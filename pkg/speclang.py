"""
Manifold-definition language: built-in manifold tags, JSON manifold and
curve files, and the digest that ties a report to its input.

A manifold argument is either a built-in tag such as ``euclidean:3``,
``sphere:3:radius=1``, ``hyperbolic:2``, ``heisenberg:m=1`` or
``cone:heisenberg:m=1``, or the path of a JSON document

    {"name": ..., "dim": n, "metric": [[expr, ...], ...],
     "frame"?: [[expr, ...], ...], "domain"?: [[lo, hi], ...]}

or ``{"builtin": tag}``. Expressions are strings in the scalar grammar of
``expressions.parse_expr``.
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

from jsonschema import Draft202012Validator as validator
from jsonschema.exceptions import best_match

from connections import cone_spec
from curves import CurvePath
from errors import SpecError
from expressions import parse_expr
from geometry import ManifoldSpec, euclidean, heisenberg, hyperbolic, sphere

logger = logging.getLogger(__name__)

SCHEMA_DIR = Path(__file__).parent / "schema"
MANIFOLD_SCHEMA = SCHEMA_DIR / "manifold-schema.json"
CURVE_SCHEMA = SCHEMA_DIR / "curve-schema.json"

__all__ = ['parse_expr', 'load_manifold', 'resolve_manifold', 'builtin_manifold', 'load_curve',
           'read_json', 'spec_digest', 'run_cli']

_validators: Dict[Path, validator] = {}


def schema_validator(path: Path) -> validator:
    if path not in _validators:
        with open(path) as fp:
            _validators[path] = validator(schema=json.load(fp), format_checker=validator.FORMAT_CHECKER)
    return _validators[path]


def _check_schema(document, path: Path, what: str):
    first = best_match(schema_validator(path).iter_errors(document))
    if first is not None:
        location = '/'.join(str(p) for p in first.absolute_path) or '<root>'
        raise SpecError(f"{what} violates its schema at {location}: {first.message}")


def read_json(path: Union[str, Path]):
    try:
        with open(path) as fp:
            return json.load(fp)
    except OSError as e:
        raise SpecError(f"cannot read {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise SpecError(f"{path} is not valid JSON: {e.msg} at line {e.lineno}") from e


# built-ins

def _split_arguments(parts: List[str]) -> Tuple[List[str], Dict[str, str]]:
    positional, named = [], {}
    for part in parts:
        if '=' in part:
            key, value = part.split('=', 1)
            named[key.strip()] = value.strip()
        elif part:
            positional.append(part.strip())
    return positional, named


def _integer(value: str, what: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise SpecError(f"{what} must be an integer, got {value!r}") from None
    if number < 1:
        raise SpecError(f"{what} must be positive, got {number}")
    return number


def _real(value: str, what: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise SpecError(f"{what} must be a number, got {value!r}") from None


def _dimension(positional: List[str], named: Dict[str, str], tag: str) -> int:
    if 'n' in named:
        return _integer(named['n'], f"{tag}: n")
    if not positional:
        raise SpecError(f"{tag} needs a dimension, e.g. {tag}:3")
    return _integer(positional[0], f"{tag}: dimension")


def _euclidean(positional, named, tag):
    return euclidean(_dimension(positional, named, tag))


def _sphere(positional, named, tag):
    radius = _real(named.get('radius', '1'), f"{tag}: radius")
    if radius <= 0.0:
        raise SpecError(f"{tag}: radius must be positive")
    return sphere(_dimension(positional, named, tag), radius)


def _hyperbolic(positional, named, tag):
    return hyperbolic(_dimension(positional, named, tag))


def _heisenberg(positional, named, tag):
    if 'm' in named:
        return heisenberg(_integer(named['m'], f"{tag}: m"))
    return heisenberg(_integer(positional[0], f"{tag}: m") if positional else 1)


BUILTINS: Dict[str, Callable[[List[str], Dict[str, str], str], ManifoldSpec]] = {
    'euclidean': _euclidean,
    'sphere': _sphere,
    'hyperbolic': _hyperbolic,
    'heisenberg': _heisenberg,
}


def builtin_manifold(tag: str) -> ManifoldSpec:
    """
    Expand a built-in tag.

    ``cone:<tag>`` wraps any other tag in the metric cone s^2 g + ds^2.

    Raises:
        SpecError: unknown name or malformed arguments
    """
    tag = tag.strip()
    name, _, rest = tag.partition(':')
    if name == 'cone':
        if not rest:
            raise SpecError("cone needs a base manifold, e.g. cone:heisenberg:m=1")
        return cone_spec(builtin_manifold(rest))
    if name not in BUILTINS:
        raise SpecError(f"unknown built-in manifold {name!r}; known: {', '.join(sorted(BUILTINS))}, cone")
    positional, named = _split_arguments(rest.split(':') if rest else [])
    return BUILTINS[name](positional, named, name)


# manifold files

def manifold_from_document(document: Dict, source: str = '<document>') -> ManifoldSpec:
    """Validate a manifold document against the schema and build the spec."""
    _check_schema(document, MANIFOLD_SCHEMA, f"manifold {source}")
    if 'builtin' in document:
        spec = builtin_manifold(document['builtin'])
        if 'dim' in document and document['dim'] != spec.dim:
            raise SpecError(f"{source}: dim {document['dim']} does not match {document['builtin']} "
                            f"(dimension {spec.dim})")
        if 'name' in document:
            spec.name = document['name']
        if 'base_point' in document:
            spec.base_point = spec.require_inside(document['base_point'])
        return spec

    n = document['dim']
    metric = document['metric']
    if len(metric) != n or any(len(row) != n for row in metric):
        raise SpecError(f"{source}: metric must be a {n}x{n} matrix for dim {n}")
    domain = None
    if 'domain' in document:
        if len(document['domain']) != n:
            raise SpecError(f"{source}: domain lists {len(document['domain'])} intervals for dim {n}")
        domain = [(float('-inf') if lo is None else lo, float('inf') if hi is None else hi)
                  for lo, hi in document['domain']]
    return ManifoldSpec(
        name=document.get('name', Path(source).stem),
        dim=n,
        metric=[[str(entry) for entry in row] for row in metric],
        coordinates=document.get('coordinates'),
        frame=document.get('frame') and [[str(entry) for entry in field] for field in document['frame']],
        chart_domain=domain,
        base_point=document.get('base_point'),
    )


def load_manifold(path: Union[str, Path]) -> ManifoldSpec:
    """
    Load and validate a manifold file.

    Args:
        path: JSON manifold document

    Returns:
        Validated ManifoldSpec, built-ins expanded

    Raises:
        SpecError: unreadable file, schema violation, dimension mismatch,
            asymmetric or indefinite metric, bad expression
    """
    document = read_json(path)
    spec = manifold_from_document(document, str(path))
    logger.info("loaded manifold %s (dimension %d) from %s", spec.name, spec.dim, path)
    return spec


def resolve_manifold(argument: str) -> ManifoldSpec:
    """A built-in tag or a manifold file, whichever the argument names."""
    if Path(argument).is_file():
        return load_manifold(argument)
    name = argument.split(':', 1)[0]
    if name in BUILTINS or name == 'cone':
        return builtin_manifold(argument)
    raise SpecError(f"{argument!r} is neither a manifold file nor a built-in tag")


def load_curve(source: Union[str, Path, Dict], steps: Optional[int] = None) -> CurvePath:
    """Curve from a JSON file or an already-parsed curve document."""
    document = read_json(source) if isinstance(source, (str, Path)) else source
    _check_schema(document, CURVE_SCHEMA, f"curve {source if not isinstance(source, dict) else ''}".strip())
    return CurvePath.from_document(document, steps)


def spec_digest(spec: ManifoldSpec) -> str:
    """sha256 of the canonical JSON form of a spec."""
    canonical = json.dumps(spec.describe(), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def run_cli(argv: Optional[List[str]] = None) -> int:
    from cli import main
    return main(argv)
