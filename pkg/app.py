import logging

from flask import Flask, jsonify, render_template, request
from werkzeug.exceptions import HTTPException

from analysis import CONE_HEIGHTS, DEFAULT_LATTICE, RollingAnalyzer
from config import load_settings
from errors import RollHolError, SpecError
from report import is_report, validate_report
from speclang import builtin_manifold, load_curve, manifold_from_document

settings = load_settings()
logging.basicConfig(level=getattr(logging, settings.log_level, logging.INFO))
logger = logging.getLogger(__name__)

app = Flask(__name__)
analyzer = RollingAnalyzer(settings)


def _payload() -> dict:
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise SpecError("request body must be a JSON object")
    return data


def _manifold(data: dict):
    """Built-in tag or inline manifold document from the 'spec' field."""
    if 'spec' not in data:
        raise SpecError("missing spec in request body")
    spec = data['spec']
    if isinstance(spec, str):
        return builtin_manifold(spec)
    if isinstance(spec, dict):
        return manifold_from_document(spec, '<request>')
    raise SpecError("spec must be a built-in tag or a manifold document")


def _optional_int(data: dict, key: str, default=None):
    value = data.get(key, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecError(f"{key} must be an integer")
    return value


@app.errorhandler(RollHolError)
def handle_engine_error(e: RollHolError):
    status = 400 if e.exit_code == 1 else 422
    return jsonify({'error': str(e), 'type': type(e).__name__}), status


@app.errorhandler(Exception)
def handle_unexpected(e: Exception):
    if isinstance(e, HTTPException):
        return jsonify({'error': e.description}), e.code
    logger.exception("request failed")
    return jsonify({'error': f'An error occurred: {str(e)}'}), 500


@app.route('/')
def index():
    """Serve the main UI page."""
    return render_template('index.html', cone_heights=CONE_HEIGHTS)


@app.route('/describe', methods=['POST'])
def describe():
    """
    Summarize a manifold.

    Expected JSON payload:
    {
        "spec": "heisenberg:m=1" or {"name": ..., "dim": ..., "metric": [[...]]}
    }
    """
    return jsonify(analyzer.describe(_manifold(_payload())))


@app.route('/holonomy', methods=['POST'])
def holonomy():
    """
    Estimate and classify the rolling holonomy.

    Expected JSON payload:
    {
        "spec": "...", "loops": 0, "seed": 0, "steps": 512,
        "rank_tol": 1e-6, "base": [x1, ..., xn]
    }

    Returns the report; its "holonomy" section carries algebra_dim, label,
    controllable and notes.
    """
    data = _payload()
    spec = _manifold(data)
    return jsonify(analyzer.holonomy(spec, _optional_int(data, 'loops', 0), _optional_int(data, 'seed', 0),
                                     _optional_int(data, 'steps'), data.get('rank_tol'), data.get('base')))


@app.route('/classify', methods=['POST'])
def classify():
    """Classify a manifold ("spec") or re-classify an earlier report ("report")."""
    data = _payload()
    if 'report' in data:
        if not is_report(data["report"]):
            raise SpecError("report field does not hold a report")
        validate_report(data["report"])
        return jsonify(analyzer.classify(data['report']))
    return jsonify(analyzer.classify(_manifold(data), loops=_optional_int(data, 'loops', 0),
                                     seed=_optional_int(data, 'seed', 0), steps=_optional_int(data, 'steps')))


@app.route('/sasaki/<mode>', methods=['POST'])
def sasaki(mode: str):
    """Extract or verify the Sasakian structure; mode is "extract" or "verify"."""
    data = _payload()
    spec = _manifold(data)
    return jsonify(analyzer.sasaki(spec, mode, _optional_int(data, 'lattice', DEFAULT_LATTICE),
                                   _optional_int(data, 'seed', 0), _optional_int(data, 'steps'),
                                   data.get('structure', 'auto')))


@app.route('/cone/verify', methods=['POST'])
def cone_verify():
    data = _payload()
    spec = _manifold(data)
    heights = data.get('s0', CONE_HEIGHTS)
    if not isinstance(heights, list) and not isinstance(heights, tuple):
        heights = [heights]
    return jsonify(analyzer.cone(spec, [float(h) for h in heights], _optional_int(data, 'loops', 8),
                                 _optional_int(data, 'seed', 0), _optional_int(data, 'steps')))


@app.route('/roll/<mode>', methods=['POST'])
def roll(mode: str):
    """
    Roll along a curve document ("develop") or cross-check a loop ("crosscheck").

    Expected JSON payload:
    {
        "spec": "...", "curve": {"segments": [...], "steps": 256, "loop": true}
    }
    """
    data = _payload()
    spec = _manifold(data)
    if 'curve' not in data or not isinstance(data['curve'], dict):
        raise SpecError("missing curve document in request body")
    curve = load_curve(data['curve'])
    steps = _optional_int(data, 'steps')
    if mode == 'develop':
        return jsonify(analyzer.develop(spec, curve, steps, bool(data.get('trajectory', False))))
    if mode == 'crosscheck':
        return jsonify(analyzer.crosscheck(spec, curve, steps))
    raise SpecError(f"unknown rolling mode {mode!r}")


@app.route('/health')
def health_check():
    """Health check endpoint."""
    return jsonify({
        'status': 'healthy',
        'service': 'RollHol API'
    })


if __name__ == '__main__':
    app.run(host='0.0.0.0', port=settings.port, debug=False)
