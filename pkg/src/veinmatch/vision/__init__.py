"""Pure pixel, geometry, feature and matching kernels."""
