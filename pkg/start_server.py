"""
Script to start the RollHol web server
"""
from config import load_settings


def start_server():
    """Start the Flask server"""
    settings = load_settings()
    print("Starting RollHol Server...")
    print(f"Access the web interface at: http://localhost:{settings.port}")
    print(f"Worker threads per holonomy estimate: {settings.threads}")
    print("Press Ctrl+C to stop the server\n")

    # Import and run the Flask app directly
    from app import app
    app.run(host='0.0.0.0', port=settings.port, debug=False)


if __name__ == "__main__":
    start_server()
