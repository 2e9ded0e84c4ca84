"""Data models for problems and adaptive runs."""
