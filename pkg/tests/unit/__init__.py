"""Unit tests for gradflow-lab."""
