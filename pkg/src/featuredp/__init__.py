"""Feature-level differential privacy: accounting, training and auditing."""

__version__ = "0.1.0"
