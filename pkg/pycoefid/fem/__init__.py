"""
Finite-element building blocks: meshes and P1 operator assembly.
"""
