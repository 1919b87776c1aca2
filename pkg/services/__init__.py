"""
Service layer: ingest, statistics, variance formulas, resampling, enumeration,
simulation and verification
"""
