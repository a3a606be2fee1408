# Unit tests for veinmatch.models live in this package.
