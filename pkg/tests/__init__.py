"""Test package for cfma-mimo."""
