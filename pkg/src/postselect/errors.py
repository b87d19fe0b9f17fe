'''
Exception hierarchy shared by every postselect module
'''

from typing import Optional


class PostselectError(Exception):
    '''Base class for all library errors'''


class DimensionError(PostselectError, ValueError):
    '''Subsystem dimensions inconsistent with array shapes'''


class DomainError(PostselectError, ValueError):
    '''Argument outside the domain of the operation'''


class DegenerateEncodingError(PostselectError):
    '''Post-selected state undefined because the target overlap vanishes'''


class ResourceError(PostselectError):
    '''Requested Hilbert space exceeds the dense-simulation envelope'''


class CapacityError(PostselectError):
    '''Polynomial degree cap reached before certification'''


class SolverError(PostselectError):
    '''Phase solver did not reach the requested tolerance'''

    def __init__(self, message: str, best_residual: Optional[float] = None):
        super().__init__(message)
        self.best_residual = best_residual


class DegenerateFlagError(PostselectError):
    '''Flag success probability is numerically zero'''


class DegenerateOutcomeError(PostselectError):
    '''Measurement outcome probability is numerically zero'''


class NonInjectiveError(PostselectError):
    '''Encoded map has no invertible branch'''


class ConfigurationError(PostselectError):
    '''Invalid experiment or estimator configuration'''


class ConsistencyError(PostselectError):
    '''Two evaluation paths of the same quantity disagree'''
