"""Utility modules for the pycoefid package.

Import from the submodules directly (``pycoefid.utils.logger``, ``pycoefid.utils.field_io``,
``pycoefid.utils.validation``).
"""

__all__ = [
    'field_io',
    'logger',
    'validation',
]
