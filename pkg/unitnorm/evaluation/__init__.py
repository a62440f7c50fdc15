"""
Unit-level metrics and decoding speed measurements.
"""
