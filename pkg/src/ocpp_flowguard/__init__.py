"""Flow-based intrusion detection for OCPP 1.6 charging infrastructure."""

__version__ = "0.1.0"
