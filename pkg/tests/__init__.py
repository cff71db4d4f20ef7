"""fairaudit test suite."""
