"""
Problem definitions and synthetic data generation.
"""
