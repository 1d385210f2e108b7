"""Discretized pricing operators, identification checks and pricing outputs."""
