"""Versioned prompt template artifacts (JSON)."""
