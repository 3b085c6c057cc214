"""Recurrence-plot analysis and classification of multi-channel ECG records."""

__version__ = "0.1.0"
