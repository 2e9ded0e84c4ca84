"""CLI interface for the adaptive finite element toolkit."""
