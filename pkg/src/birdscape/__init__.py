"""Citizen-science bird monitoring: ingest, classify, map, and sonify bird calls."""

__version__ = "0.1.0"
