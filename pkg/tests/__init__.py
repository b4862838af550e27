"""Test suite for gradflow-lab."""
