"""
Validation utilities for nodal fields and scalar parameters.
"""
import logging
from typing import Any, Tuple

import numpy as np

from pycoefid.exceptions import DimensionMismatchError

logger = logging.getLogger(__name__)


def validate_node_field(name: str, values: Any, node_count: int) -> Tuple[bool, str]:
    """Validate that ``values`` is a finite real vector with one entry per mesh node."""
    try:
        array = np.asarray(values, dtype=float)
    except (TypeError, ValueError) as e:
        return False, f"Invalid type for {name}: {str(e)}"

    if array.ndim != 1:
        return False, f"Invalid shape for {name}: expected a vector, got shape {array.shape}"
    if array.shape[0] != node_count:
        return False, f"Invalid length for {name}: expected {node_count} nodal values, got {array.shape[0]}"
    if not np.all(np.isfinite(array)):
        bad = int(np.flatnonzero(~np.isfinite(array))[0])
        return False, f"Non-finite value in {name} at node {bad}"
    return True, ""


def as_node_field(name: str, values: Any, node_count: int) -> np.ndarray:
    """
    Convert ``values`` to a float vector of length ``node_count``.

    Args:
        name: Field name used in error messages
        values: Anything numpy can turn into a vector
        node_count: Number of mesh nodes

    Returns:
        The values as a 1-D float64 array

    Raises:
        DimensionMismatchError: If the field does not have one finite value per node
    """
    ok, message = validate_node_field(name, values, node_count)
    if not ok:
        raise DimensionMismatchError(message)
    return np.asarray(values, dtype=float)

