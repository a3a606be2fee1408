"""Unit tests for vision kernels."""
