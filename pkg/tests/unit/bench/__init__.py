"""Unit tests for synthbench."""
