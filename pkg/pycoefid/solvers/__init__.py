"""
Linear algebra, the direct-problem solver and the coefficient identification loop.
"""
