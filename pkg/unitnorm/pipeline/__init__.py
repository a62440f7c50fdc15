"""
Experiment pipeline: stage functions, the cached recipe and reports.
"""
