"""CLI package for cfma."""
