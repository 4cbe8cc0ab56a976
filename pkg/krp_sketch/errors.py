"""
Exceptions and warnings raised by krp_sketch.
"""

import numpy


class KrpError(Exception):
    """Base class for all krp_sketch errors."""


class ShapeError(KrpError, ValueError):
    """Operand shapes, modes or dimensions are inconsistent."""


class ParameterError(KrpError, ValueError):
    """A scalar parameter is outside its valid range."""


class MemoryCapError(KrpError, MemoryError):
    """An explicit materialization would exceed the configured memory cap."""


class InfeasibleError(KrpError):
    """A requested sample size or factorization cannot be achieved."""


class SingularSensorError(KrpError, numpy.linalg.LinAlgError):
    """The sensor selection P^T Q is numerically singular."""


class TensorFileError(KrpError, OSError):
    """A tensor, block or Tucker file is malformed."""


class RankDeficiencyWarning(RuntimeWarning):
    """A sketch or projected sketch lost rank; a fallback was used."""


class OrderWarning(RuntimeWarning):
    """The requested realization order exceeds the numerical rank."""


def check_memory(count: int, cap: int, what: str) -> None:
    """
    Raises MemoryCapError when materializing `count` scalars would exceed `cap`.

    :param int count: number of float64 scalars to allocate
    :param int cap: configured limit
    :param str what: description used in the error message
    :rtype: None
    """
    if count > cap:
        raise MemoryCapError(
            f"materializing {what} needs {count} scalars, above the cap of {cap}"
        )
