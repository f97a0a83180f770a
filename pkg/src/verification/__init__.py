"""Injection-object generation and chain verification."""
