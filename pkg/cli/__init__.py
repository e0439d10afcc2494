"""Command line interface for camix."""
