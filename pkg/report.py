"""
Report documents: assembly, finiteness check, schema validation and output.
"""
import json
import logging
import math
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from jsonschema.exceptions import best_match

from errors import SpecError, ToleranceError
from geometry import ManifoldSpec
from speclang import read_json, schema_validator, spec_digest

logger = logging.getLogger(__name__)

TOOL_VERSION = "1.0.0"
REPORT_SCHEMA = Path(__file__).parent / "schema" / "report-schema.json"


def new_report(command: str, spec: ManifoldSpec, seed: Optional[int] = None,
               steps: Optional[int] = None) -> Dict:
    return {
        'tool_version': TOOL_VERSION,
        'command': command,
        'spec_digest': spec_digest(spec),
        'spec': {'name': spec.name, 'dim': spec.dim},
        'seed': seed,
        'steps': steps,
        'status': 'ok',
    }


def plain(value):
    """Convert numpy scalars and arrays inside a document to JSON types."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def check_finite(document, path: str = '') -> None:
    """
    Raises:
        ToleranceError: naming the first NaN or infinite number
    """
    if isinstance(document, dict):
        for key, value in document.items():
            check_finite(value, f"{path}/{key}")
    elif isinstance(document, list):
        for index, value in enumerate(document):
            check_finite(value, f"{path}/{index}")
    elif isinstance(document, float) and not math.isfinite(document):
        raise ToleranceError(f"report field {path or '/'} is not finite ({document})")


def validate_report(document: Dict) -> None:
    first = best_match(schema_validator(REPORT_SCHEMA).iter_errors(document))
    if first is not None:
        location = '/'.join(str(p) for p in first.absolute_path) or '<root>'
        raise SpecError(f"report violates its schema at {location}: {first.message}")


def finalize(document: Dict) -> Dict:
    """Stamp the timestamp, convert to JSON types, then check and validate."""
    document = plain(document)
    document['timestamp'] = datetime.now(timezone.utc).isoformat(timespec='seconds')
    check_finite(document)
    validate_report(document)
    return document


def dumps(document: Dict) -> str:
    return json.dumps(document, indent=2, sort_keys=True) + '\n'


def write_report(document: Dict, out: Union[str, Path, None]) -> None:
    """Write to a file, or to standard output for None and '-'."""
    text = dumps(document)
    if out is None or str(out) == '-':
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(out, 'w') as fp:
        fp.write(text)
    logger.info("wrote report to %s", out)


def is_report(document) -> bool:
    return isinstance(document, dict) and 'tool_version' in document and 'spec_digest' in document


def load_report(path: Union[str, Path]) -> Dict:
    document = read_json(path)
    if not is_report(document):
        raise SpecError(f"{path} is not a report")
    validate_report(document)
    return document
