"""Hybrid run-time / post-mortem monitoring of MTL programs."""
