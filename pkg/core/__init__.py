"""
Core: settings, error types and random streams
"""
