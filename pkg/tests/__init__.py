"""Test package for the gtalab transfer-learning lab."""
