"""Gridless single-snapshot DOA estimation library."""
