"""Builtin scenario files, resolvable by name from the CLI."""
