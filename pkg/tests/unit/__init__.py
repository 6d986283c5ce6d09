"""
Unit tests for the superstat modules, one suite per module.
"""
