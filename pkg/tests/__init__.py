"""Test suite for camix."""
