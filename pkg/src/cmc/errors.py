from typing import Optional, Callable, TypeVar, ParamSpec
from functools import wraps

import numpy as np


class CMCError(Exception):
    """Generic compressed Monte Carlo error."""

    pass


class ConfigError(CMCError):
    """Invalid experiment or run configuration."""

    ...


class PartitionError(CMCError):
    """Partition request that cannot be honoured."""

    ...


class NumericalError(CMCError):
    """Numerical failure during estimation, compression or filtering."""

    ...


class DegenerateWeightsError(NumericalError):
    """Weights that cannot be normalized."""

    def __init__(self, detail: Optional[str] = None) -> None:
        self.detail = detail
        super().__init__("degenerate weights" + (f": {detail}" if detail else ""))


class NonFiniteIntegrandError(NumericalError):
    """Integrand returned NaN or infinity on at least one sample."""

    def __init__(self, count: int) -> None:
        self.count = count
        super().__init__(f"non-finite integrand on {count} sample(s)")


class MissingWeightsError(NumericalError):
    """Unnormalized weights are required but absent."""

    ...


class EmptyRegionError(NumericalError):
    """Region carries no mass."""

    def __init__(self, region: int) -> None:
        self.region = region
        super().__init__(f"empty region {region}")


class IntegrationError(NumericalError):
    """Quadrature oracle produced inconsistent values."""

    ...


class EnumerationTooLargeError(NumericalError):
    """Product mixture would exceed the configured component cap."""

    def __init__(self, components: int, cap: int) -> None:
        self.components = components
        self.cap = cap
        super().__init__(f"enumeration too large: {components} components (cap {cap})")


P = ParamSpec("P")
T = TypeVar("T")


def handle_numerical_errors(
    extra_handler: Optional[Callable[[Exception], Exception]] = None,
) -> Callable[[Callable[P, T]], Callable[P, T]]:
    """Decorator translating numpy/scipy failures into NumericalError."""

    def _decorator(func: Callable[P, T]) -> Callable[P, T]:
        @wraps(func)
        def wrapper(*args: P.args, **kwargs: P.kwargs) -> T:
            try:
                return func(*args, **kwargs)
            except CMCError as exc:
                new_exc: Exception = exc
            except np.linalg.LinAlgError as exc:
                new_exc = NumericalError(f"{func.__name__}: linear algebra failure ({exc})")
            except FloatingPointError as exc:
                new_exc = NumericalError(f"{func.__name__}: floating point failure ({exc})")
            except ValueError as exc:
                new_exc = NumericalError(f"{func.__name__}: invalid numerical input ({exc})")

            if extra_handler:
                raise extra_handler(new_exc)
            raise new_exc

        return wrapper

    return _decorator
