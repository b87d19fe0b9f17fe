'''
Target singular-value transformations and their odd polynomial approximations
'''

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.optimize import linprog
from scipy.special import erf, erfcinv

from .errors import CapacityError, DomainError, SolverError

logger = logging.getLogger(__name__)

GRID_POINTS = 4096
DEGREE_CAP = 2001
BOUNDEDNESS_GRID = 10001
EDGE_MARGIN = 1e-6  # headroom kept below |P| = 1 after rescaling

IDEAL_KINDS = ('sign_approx', 'linear_amp', 'trunc_inverse', 'linear_cut', 'inverse_cut')
POLY_KINDS = ('chebyshev', 'custom_odd_poly')


def chebyshev_grid(a: float, b: float, n: int = GRID_POINTS) -> np.ndarray:
    '''n Chebyshev nodes mapped into [a, b], ascending'''
    if a == b:
        return np.array([float(a)])
    k = np.arange(n)
    nodes = np.cos((2 * k + 1) * np.pi / (2 * n))[::-1]
    return a + (b - a) * (nodes + 1) / 2


def extrema_grid(n: int) -> np.ndarray:
    '''Chebyshev extreme points on [0, 1], endpoints included'''
    return np.cos(np.pi * np.arange(n) / (2 * (n - 1)))[::-1]


def _odd_at_least(value: float) -> int:
    degree = max(1, int(math.ceil(value)))
    return degree if degree % 2 else degree + 1


@dataclass(frozen=True, eq=False)
class OddPolynomial:
    '''Odd polynomial in the Chebyshev basis; coefficients[k] multiplies T_k'''
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float).reshape(-1)
        if c.size == 0:
            c = np.zeros(2)
        if c.size % 2:
            if abs(c[-1]) > 1e-12:
                raise DomainError("Highest coefficient has even order; polynomial is not odd")
            c = c[:-1] if c.size > 1 else np.zeros(2)
        if np.max(np.abs(c[0::2])) > 1e-12:
            raise DomainError("Even-order Chebyshev coefficients must vanish")
        c[0::2] = 0.0
        c.flags.writeable = False
        object.__setattr__(self, 'coefficients', c)

    @classmethod
    def from_odd_coefficients(cls, odd: Sequence[float]) -> 'OddPolynomial':
        odd = np.asarray(odd, dtype=float)
        full = np.zeros(2 * odd.size)
        full[1::2] = odd
        return cls(full)

    @classmethod
    def from_monomial(cls, coefficients: Sequence[float]) -> 'OddPolynomial':
        return cls(cheb.poly2cheb(np.asarray(coefficients, dtype=float)))

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    @property
    def odd_coefficients(self) -> np.ndarray:
        return self.coefficients[1::2]

    def to_monomial(self) -> np.ndarray:
        return cheb.cheb2poly(self.coefficients)

    def __call__(self, x):
        return cheb.chebval(x, self.coefficients)

    def max_abs(self, n: int = BOUNDEDNESS_GRID) -> float:
        return float(np.max(np.abs(self(extrema_grid(n)))))

    def to_text(self) -> str:
        lines = ["# odd polynomial, Chebyshev basis: degree then odd-order coefficients",
                 f"{self.degree}"]
        lines += [f"{c:.17g}" for c in self.odd_coefficients]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> 'OddPolynomial':
        values = [line.strip() for line in text.splitlines()
                  if line.strip() and not line.strip().startswith('#')]
        degree = int(values[0])
        odd = [float(v) for v in values[1:]]
        if len(odd) != (degree + 1) // 2:
            raise DomainError(f"Degree {degree} needs {(degree + 1) // 2} coefficients, got {len(odd)}")
        return cls.from_odd_coefficients(odd)


def write_polynomial(poly: OddPolynomial, path: Union[str, Path]):
    Path(path).write_text(poly.to_text(), encoding='utf-8')


def read_polynomial(path: Union[str, Path]) -> OddPolynomial:
    return OddPolynomial.from_text(Path(path).read_text(encoding='utf-8'))


@dataclass(frozen=True, eq=False)
class SVTFunction:
    kind: str
    p_star: float = 1.0
    delta: float = 0.0
    coefficients: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in IDEAL_KINDS + POLY_KINDS:
            raise DomainError(f"Unknown SVT function kind '{self.kind}'")
        if not 0 < self.p_star <= 1:
            raise DomainError(f"p_star must lie in (0, 1], got {self.p_star}")
        if not 0 <= self.delta < 1:
            raise DomainError(f"delta must lie in [0, 1), got {self.delta}")
        if self.kind in POLY_KINDS:
            if self.coefficients is None:
                raise DomainError(f"Kind '{self.kind}' needs Chebyshev coefficients")
            poly = OddPolynomial(self.coefficients)
            object.__setattr__(self, 'coefficients', poly.coefficients)
            peak = poly.max_abs()
            if peak > 1 + 1e-9:
                raise DomainError(f"|f| reaches {peak:.6f} > 1 on [-1, 1]")

    @classmethod
    def from_polynomial(cls, poly: OddPolynomial, kind: str = 'custom_odd_poly',
                        p_star: float = 1.0, delta: float = 0.0) -> 'SVTFunction':
        return cls(kind, p_star, delta, poly.coefficients)

    @property
    def polynomial(self) -> Optional[OddPolynomial]:
        return None if self.coefficients is None else OddPolynomial(self.coefficients)

    def __call__(self, x):
        return evaluate(self, x)


def ideal_sign() -> SVTFunction:
    return SVTFunction('sign_approx')


def evaluate(f: SVTFunction, x):
    '''Exact piecewise value for ideal kinds, Chebyshev evaluation for polynomial kinds'''
    values = np.asarray(x, dtype=float)
    if np.any(np.abs(values) > 1 + 1e-12):
        raise DomainError("SVT functions are defined on [-1, 1]")
    scalar = values.ndim == 0
    values = np.atleast_1d(values)
    s = math.sqrt(f.p_star)
    magnitude = np.abs(values)

    if f.kind == 'sign_approx':
        out = np.sign(values)
    elif f.kind == 'linear_amp':
        out = np.clip(values / s, -1.0, 1.0)
    elif f.kind == 'trunc_inverse':
        out = values / s
        outer = magnitude > s
        out[outer] = s / values[outer]
    elif f.kind == 'linear_cut':
        out = np.where(magnitude <= s, values / s, 0.0)
    elif f.kind == 'inverse_cut':
        out = np.zeros_like(values)
        outer = magnitude >= s
        out[outer] = s / values[outer]
    else:
        out = cheb.chebval(values, f.coefficients)
    return float(out[0]) if scalar else out


def as_callable(f: Union[SVTFunction, OddPolynomial, Callable]) -> Callable:
    if isinstance(f, SVTFunction):
        return lambda x: evaluate(f, x)
    return f


def _rescale_to_unit(coefficients: np.ndarray) -> np.ndarray:
    degree = coefficients.size - 1
    peak = float(np.max(np.abs(cheb.chebval(extrema_grid(max(20000, 64 * degree)), coefficients))))
    if peak > 1 - EDGE_MARGIN:
        coefficients = coefficients * (1 - EDGE_MARGIN) / peak
    return coefficients


def fpaa_polynomial(p_star: float, delta: float) -> OddPolynomial:
    '''Odd P with |P| <= 1 on [-1, 1] and 1 - P(x) <= delta on [sqrt(p*), 1].

    Chebyshev interpolant of erf(k x), with k chosen so that erf(k sqrt(p*)) = 1 - delta/2,
    raised in degree until both conditions hold on the verification grid.
    '''
    if not 0 < p_star < 1 or not 0 < delta < 1:
        raise DomainError(f"fpaa_polynomial needs p_star, delta in (0, 1), got {p_star}, {delta}")
    kappa = math.sqrt(p_star)
    k = float(erfcinv(delta / 2)) / kappa
    check = chebyshev_grid(kappa, 1.0)
    degree = _odd_at_least(math.log(2 / delta) / kappa)

    while degree <= DEGREE_CAP:
        coefficients = cheb.chebinterpolate(lambda x: erf(k * x), degree)
        coefficients[0::2] = 0.0
        poly = OddPolynomial(_rescale_to_unit(coefficients))
        gap = float(np.max(1 - poly(check)))
        if gap <= delta:
            logger.debug(f"FPAA polynomial p*={p_star} delta={delta}: degree {degree}, gap {gap:.2e}")
            return poly
        degree = _odd_at_least(max(degree + 2, 1.25 * degree))
    raise CapacityError(f"FPAA polynomial for p*={p_star}, delta={delta} exceeds degree cap {DEGREE_CAP}")


def _minimax_odd_fit(x_fit: np.ndarray, y_fit: np.ndarray, x_bound: np.ndarray,
                     degree: int) -> Tuple[np.ndarray, float]:
    '''Minimize max |P/y - 1| on x_fit subject to |P| <= 1 on x_bound, as a linear program'''
    orders = np.arange(1, degree + 1, 2)
    fit_rows = cheb.chebvander(x_fit, degree)[:, orders] / y_fit[:, None]
    bound_rows = cheb.chebvander(x_bound, degree)[:, orders]
    n_fit, n_bound = len(x_fit), len(x_bound)

    a_ub = np.block([
        [fit_rows, -np.ones((n_fit, 1))],
        [-fit_rows, -np.ones((n_fit, 1))],
        [bound_rows, np.zeros((n_bound, 1))],
        [-bound_rows, np.zeros((n_bound, 1))],
    ])
    b_ub = np.concatenate([np.ones(n_fit), -np.ones(n_fit), np.ones(2 * n_bound)])
    cost = np.zeros(orders.size + 1)
    cost[-1] = 1.0
    bounds = [(None, None)] * orders.size + [(0, None)]
    result = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method='highs')
    if result.status != 0:
        raise SolverError(f"Minimax fit at degree {degree} failed: {result.message}")
    coefficients = np.zeros(degree + 1)
    coefficients[orders] = result.x[:-1]
    return coefficients, float(result.x[-1])


def _certified_fit(target: SVTFunction, interval: Tuple[float, float], start_degree: int,
                   delta_mult: float, label: str) -> OddPolynomial:
    a, b = interval
    degree = _odd_at_least(max(3, start_degree))
    while degree <= DEGREE_CAP:
        n_coeff = (degree + 1) // 2
        x_fit = np.unique(chebyshev_grid(a, b, min(GRID_POINTS, max(512, 4 * n_coeff))))
        x_bound = np.union1d(chebyshev_grid(0.0, 1.0, min(GRID_POINTS, max(1024, 8 * n_coeff))), x_fit)
        coefficients, level = _minimax_odd_fit(x_fit, evaluate(target, x_fit), x_bound, degree)
        poly = OddPolynomial(_rescale_to_unit(coefficients))
        error = multiplicative_error(poly, target, interval)
        logger.debug(f"{label}: degree {degree}, fit level {level:.2e}, certified error {error:.2e}")
        if error <= delta_mult:
            return poly
        degree = _odd_at_least(2 * degree)
    raise CapacityError(f"{label} not certified below degree cap {DEGREE_CAP}")


def laa_polynomial(p_star: float, delta_mult: float) -> OddPolynomial:
    '''Odd P with |P| <= 1 and P(x) = (x / sqrt(p*))(1 + delta(x)), |delta| <= delta_mult on [0, sqrt(p*)]'''
    if not 0 < p_star < 1 or not 0 < delta_mult < 1:
        raise DomainError(f"laa_polynomial needs p_star, delta_mult in (0, 1), got {p_star}, {delta_mult}")
    s = math.sqrt(p_star)
    start = math.log(1 / (s * delta_mult)) / s
    return _certified_fit(SVTFunction('linear_amp', p_star), (1e-6, s), int(math.ceil(start)),
                          delta_mult, f"LAA polynomial p*={p_star}")


def inverse_polynomial(p_star: float, p_max: float, delta_mult: float) -> OddPolynomial:
    '''Odd P with |P| <= 1 and P(x) = (sqrt(p*) / x)(1 + delta(x)) on [sqrt(p*), sqrt(p_max)]'''
    if not 0 < p_star <= p_max <= 1:
        raise DomainError(f"inverse_polynomial needs 0 < p_star <= p_max <= 1, got {p_star}, {p_max}")
    if not 0 < delta_mult < 1:
        raise DomainError(f"delta_mult must lie in (0, 1), got {delta_mult}")
    s = math.sqrt(p_star)
    start = math.log(math.sqrt(p_max / p_star) / delta_mult) / s
    return _certified_fit(SVTFunction('trunc_inverse', p_star), (s, math.sqrt(p_max)),
                          int(math.ceil(start)), delta_mult, f"Inverse polynomial p*={p_star}")


def multiplicative_error(poly: Union[OddPolynomial, SVTFunction, Callable], target: SVTFunction,
                         interval: Tuple[float, float]) -> float:
    '''max over the verification grid of |poly(x) / target(x) - 1|'''
    a, b = interval
    if not 0 < a <= b <= 1:
        raise DomainError(f"Interval {interval} must lie inside (0, 1]")
    x = chebyshev_grid(a, b)
    reference = evaluate(target, x)
    if np.any(np.abs(reference) < 1e-300):
        raise DomainError(f"Target vanishes inside {interval}")
    return float(np.max(np.abs(as_callable(poly)(x) / reference - 1)))
