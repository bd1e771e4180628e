"""Command-line interface with rich console output."""
