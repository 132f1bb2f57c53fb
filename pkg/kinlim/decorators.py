"""
Decorators shared by the numerical services.
"""

import logging
import time
from functools import wraps

import numpy as np

from kinlim.exceptions import NumericalError

logger = logging.getLogger(__name__)


def numerical_guard(f):
    """
    Decorator translating low-level numerical failures into NumericalError.

    Args:
        f: Function to decorate

    Returns:
        Decorated function
    """
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"{f.__name__}: singular linear system ({e})") from e
        except FloatingPointError as e:
            raise NumericalError(f"{f.__name__}: floating point failure ({e})") from e
    return decorated_function


def log_duration(f):
    """
    Decorator logging the wall-clock duration of a call at INFO level.

    Args:
        f: Function to decorate

    Returns:
        Decorated function
    """
    @wraps(f)
    def decorated_function(*args, **kwargs):
        start = time.perf_counter()
        result = f(*args, **kwargs)
        logger.info("%s finished in %.3f s", f.__qualname__, time.perf_counter() - start)
        return result
    return decorated_function
