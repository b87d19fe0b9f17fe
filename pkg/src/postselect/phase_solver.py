'''
Phase sequences for the alternating phase-modulation circuit.

The single-variable model: for a singular value x the encoding acts on the
pair (|v>, |v_perp>) as the reflection R(x) = [[x, s], [s, -x]], s = sqrt(1 - x^2),
and a projector phase gate acts as exp(i phi Z). A sequence phi_1..phi_d realizes

    P~(x) = <0| e^{i phi_1 Z} R e^{i phi_2 Z} R ... e^{i phi_d Z} R |0>

and the circuit targets Re P~ = f. Interior phases are kept palindromic and
shifted by pi/2, so all-zero reduced phases give Re P~ = 0.
'''

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.optimize import least_squares, minimize

from .errors import DomainError, SolverError
from .svtfun import DEGREE_CAP, OddPolynomial, chebyshev_grid

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9
MAX_ITERATIONS = 10_000


def _response(phases: np.ndarray, x: np.ndarray, with_jacobian: bool = False
              ) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    '''P~(x) at every x and, optionally, dP~/dphi_k as an (n, d) matrix'''
    d = phases.size
    s = np.sqrt(np.clip(1 - x * x, 0.0, None))
    up = np.exp(1j * phases)
    down = up.conj()

    prefixes = np.empty((d, x.size, 2), dtype=complex) if with_jacobian else None
    row = np.zeros((x.size, 2), dtype=complex)
    row[:, 0] = 1.0
    for k in range(d):
        if with_jacobian:
            prefixes[k] = row
        a = row[:, 0] * up[k]
        b = row[:, 1] * down[k]
        row = np.stack((a * x + b * s, a * s - b * x), axis=1)
    value = row[:, 0]
    if not with_jacobian:
        return value, None

    jacobian = np.empty((x.size, d), dtype=complex)
    col = np.zeros((x.size, 2), dtype=complex)
    col[:, 0] = 1.0
    for k in reversed(range(d)):
        r0 = x * col[:, 0] + s * col[:, 1]
        r1 = s * col[:, 0] - x * col[:, 1]
        col = np.stack((up[k] * r0, down[k] * r1), axis=1)
        left = prefixes[k]
        jacobian[:, k] = 1j * (left[:, 0] * col[:, 0] - left[:, 1] * col[:, 1])
    return value, jacobian


def realized_response(phases, x) -> np.ndarray:
    '''Complex P~(x) of the 2x2 signal-processing model'''
    phases = np.asarray(phases, dtype=float).reshape(-1)
    values = np.asarray(x, dtype=float)
    if np.any(np.abs(values) > 1 + 1e-12):
        raise DomainError("Signal values must lie in [-1, 1]")
    out, _ = _response(phases, np.clip(np.atleast_1d(values), -1.0, 1.0).reshape(-1))
    return out.reshape(values.shape) if values.ndim else complex(out[0])


def realized_polynomial(phases) -> OddPolynomial:
    '''Re P~ in the Chebyshev basis'''
    phases = np.asarray(phases, dtype=float).reshape(-1)
    coefficients = cheb.chebinterpolate(lambda x: _response(phases, np.asarray(x))[0].real, phases.size)
    coefficients[0::2] = 0.0
    return OddPolynomial(coefficients)


@dataclass(frozen=True, eq=False)
class PhaseSequence:
    phases: np.ndarray
    realized_polynomial: OddPolynomial
    residual: float = 0.0

    def __post_init__(self):
        phases = np.array(self.phases, dtype=float).reshape(-1)
        if phases.size % 2 == 0:
            raise DomainError(f"Phase sequences have odd length, got {phases.size}")
        if self.realized_polynomial.degree != phases.size:
            raise DomainError(
                f"Realized degree {self.realized_polynomial.degree} differs from {phases.size} phases")
        phases.flags.writeable = False
        object.__setattr__(self, 'phases', phases)

    @classmethod
    def from_phases(cls, phases) -> 'PhaseSequence':
        return cls(np.asarray(phases, dtype=float), realized_polynomial(phases), 0.0)

    @property
    def degree(self) -> int:
        return self.phases.size

    def conjugate(self) -> 'PhaseSequence':
        '''Negated phases; realizes the complex conjugate P~*'''
        return PhaseSequence(-self.phases, self.realized_polynomial, self.residual)

    def to_text(self) -> str:
        lines = ["# phase sequence: degree, residual, then one phase per line (radians)",
                 f"{self.degree}", f"{self.residual:.17g}"]
        lines += [f"{phi:.17g}" for phi in self.phases]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> 'PhaseSequence':
        values = [line.strip() for line in text.splitlines()
                  if line.strip() and not line.strip().startswith('#')]
        degree, residual = int(values[0]), float(values[1])
        phases = np.array([float(v) for v in values[2:]])
        if phases.size != degree:
            raise DomainError(f"Phase table declares degree {degree} but lists {phases.size} phases")
        return cls(phases, realized_polynomial(phases), residual)


def write_phases(sequence: PhaseSequence, path: Union[str, Path]):
    Path(path).write_text(sequence.to_text(), encoding='utf-8')


def read_phases(path: Union[str, Path]) -> PhaseSequence:
    return PhaseSequence.from_text(Path(path).read_text(encoding='utf-8'))


def grover_phases(d: int) -> PhaseSequence:
    '''phi_1 = 0 and pi/2 elsewhere; P~ = (-1)^((d-1)/2) T_d, real'''
    if d < 1 or d % 2 == 0:
        raise DomainError(f"Grover sequences need odd degree, got {d}")
    phases = np.full(d, np.pi / 2)
    phases[0] = 0.0
    return PhaseSequence.from_phases(phases)


def solver_nodes(d: int) -> np.ndarray:
    '''Positive Chebyshev nodes, one per free parameter'''
    n = (d + 1) // 2
    j = np.arange(1, n + 1)
    return np.cos((2 * j - 1) * np.pi / (4 * n))


def _expand(params: np.ndarray, d: int) -> np.ndarray:
    phases = np.empty(d)
    phases[0] = d * np.pi / 2 + params[0]
    if d > 1:
        idx = np.arange(d - 1)
        phases[1:] = np.pi / 2 + params[1:][np.minimum(idx, d - 2 - idx)]
    return phases


def _fold(jacobian: np.ndarray, d: int) -> np.ndarray:
    m = (d - 1) // 2
    folded = np.empty((jacobian.shape[0], m + 1))
    folded[:, 0] = jacobian[:, 0].real
    interior = jacobian[:, 1:].real
    folded[:, 1:] = interior[:, :m] + interior[:, ::-1][:, :m]
    return folded


def _certify(phases: np.ndarray, target: OddPolynomial) -> float:
    grid = chebyshev_grid(0.0, 1.0)
    return float(np.max(np.abs(_response(phases, grid)[0].real - target(grid))))


def solve_phases(target: OddPolynomial, tol: float = DEFAULT_TOLERANCE,
                 max_iter: int = MAX_ITERATIONS) -> PhaseSequence:
    '''Symmetric phases with Re P~ = target, certified on the verification grid.

    Quasi-Newton descent on the squared node residual from zero reduced phases,
    then a Gauss-Newton polish of the square node system.
    '''
    d = target.degree
    if d > DEGREE_CAP:
        raise DomainError(f"Target degree {d} exceeds cap {DEGREE_CAP}")
    peak = target.max_abs()
    if peak > 1 + 1e-9:
        raise DomainError(f"Target reaches |P| = {peak:.6f} > 1")

    if d == 1:
        phases = np.array([math.acos(min(max(target.coefficients[1], -1.0), 1.0))])
        residual = _certify(phases, target)
        if residual > tol:
            raise SolverError(f"Degree-1 target not realized (residual {residual:.2e})", residual)
        return PhaseSequence(phases, realized_polynomial(phases), residual)

    nodes = solver_nodes(d)
    goal = target(nodes)

    def residuals(params):
        return _response(_expand(params, d), nodes)[0].real - goal

    def jacobian(params):
        return _fold(_response(_expand(params, d), nodes, with_jacobian=True)[1], d)

    def loss(params):
        value, jac = _response(_expand(params, d), nodes, with_jacobian=True)
        r = value.real - goal
        return 0.5 * float(r @ r), _fold(jac, d).T @ r

    start = np.zeros((d + 1) // 2)
    result = minimize(loss, start, jac=True, method='L-BFGS-B',
                      options={'maxiter': max_iter, 'ftol': 1e-30, 'gtol': 1e-15})
    logger.debug(f"L-BFGS-B degree {d}: {result.nit} iterations, loss {result.fun:.3e}")

    polished = least_squares(residuals, result.x, jac=jacobian, method='lm',
                             xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200 * start.size)
    candidates = [result.x, polished.x]
    scored = [(_certify(_expand(p, d), target), i) for i, p in enumerate(candidates)]
    residual, best = min(scored)
    phases = _expand(candidates[best], d)

    if residual > tol:
        logger.error(f"Phase solver stalled at degree {d}: residual {residual:.2e} > {tol:.1e}")
        raise SolverError(f"Phase solver did not reach {tol:.1e} at degree {d}", residual)
    logger.info(f"Solved {d} phases, certified residual {residual:.2e}")
    return PhaseSequence(phases, realized_polynomial(phases), residual)
