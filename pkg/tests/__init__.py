"""
Tests for superstat.
"""
