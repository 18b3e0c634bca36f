"""
Test script for the RollHol API
"""
import pytest

from app import app


@pytest.fixture()
def client():
    app.config['TESTING'] = True
    with app.test_client() as client:
        yield client


def test_api_health(client):
    """Test the health endpoint"""
    response = client.get('/health')
    assert response.status_code == 200
    assert response.get_json() == {'status': 'healthy', 'service': 'RollHol API'}


def test_index_page(client):
    response = client.get('/')
    assert response.status_code == 200
    assert b'RollHol' in response.data


def test_describe_inline_document(client):
    payload = {"spec": {"name": "plane", "dim": 2, "metric": [["1", "0"], ["0", "1"]]}}
    response = client.post('/describe', json=payload)
    assert response.status_code == 200
    result = response.get_json()
    assert result['describe']['name'] == "plane"
    assert result['status'] == 'ok'


def test_holonomy_of_plane(client):
    response = client.post('/holonomy', json={"spec": "euclidean:2", "steps": 64})
    assert response.status_code == 200
    section = response.get_json()['holonomy']
    assert section['label'] == "SO(3)"
    assert section['controllable'] is True


def test_classify_report_round_trip(client):
    first = client.post('/classify', json={"spec": "sphere:2", "steps": 64}).get_json()
    assert first['holonomy']['family'] == 'TRIVIAL'
    again = client.post('/classify', json={"report": first})
    assert again.status_code == 200
    assert again.get_json()['holonomy']['label'] == "TRIVIAL"
    corrupt = dict(first, status='unknown')
    assert client.post('/classify', json={"report": corrupt}).status_code == 400


def test_roll_crosscheck(client):
    curve = {"segments": [{"type": "polyline", "points": [[0, 0], [0.3, 0], [0.3, 0.3], [0, 0.3], [0, 0]]}],
             "steps": 128, "loop": True}
    response = client.post('/roll/crosscheck', json={"spec": "euclidean:2", "curve": curve})
    assert response.status_code == 200
    assert response.get_json()['rolling']['passed'] is True


@pytest.mark.parametrize("path, payload", [
    ('/holonomy', {"spec": "torus:2"}),
    ('/holonomy', {"loops": 2}),
    ('/holonomy', {"spec": "euclidean:2", "steps": "many"}),
    ('/describe', {"spec": {"name": "bad", "dim": 2, "metric": [["1", "x1"], ["0", "1"]]}}),
    ('/roll/develop', {"spec": "euclidean:2"}),
    ('/classify', {"report": {"holonomy": {}}}),
])
def test_input_errors(client, path, payload):
    response = client.post(path, json=payload)
    assert response.status_code == 400
    assert 'error' in response.get_json()


def test_non_json_body(client):
    response = client.post('/holonomy', data="spec=euclidean:2")
    assert response.status_code == 400


def test_structure_failure_is_unprocessable(client):
    response = client.post('/sasaki/extract', json={"spec": "euclidean:2", "steps": 32, "lattice": 2})
    assert response.status_code == 422
    assert response.get_json()['type'] == 'StructureError'


def test_unknown_route(client):
    assert client.get('/nowhere').status_code == 404
    assert client.get('/holonomy').status_code == 405


if __name__ == "__main__":
    print("Testing RollHol API...\n")
    with app.test_client() as test_client:
        test_api_health(test_client)
        test_holonomy_of_plane(test_client)
    print("All tests completed!")
