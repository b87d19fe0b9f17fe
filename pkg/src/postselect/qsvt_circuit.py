'''
Quantum singular value transformation by alternating phase modulation,
next to the exact SVD-based transformation it is checked against
'''

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Tuple, Union

import numpy as np

from .blockenc import BlockEncoding
from .errors import ConfigurationError, DegenerateFlagError, DomainError
from .linalg_core import DEFAULT_POLICY, Operator, Projector, StateVector, svd
from .phase_solver import PhaseSequence
from .svtfun import OddPolynomial, SVTFunction, as_callable

logger = logging.getLogger(__name__)

PLUS = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2)
FLAG_NAMES = ('system', 'ancilla')


def pi_phi(projector: Projector, phi: float) -> Operator:
    '''e^{i phi} Pi + e^{-i phi} (I - Pi)'''
    eye = np.eye(projector.dim, dtype=complex)
    matrix = np.exp(-1j * phi) * eye + 2j * math.sin(phi) * projector.operator.entries
    return Operator.square(matrix, projector.dims)


def _apply_pi_phi(projector: Projector, phi: float, vectors: np.ndarray) -> np.ndarray:
    return np.exp(-1j * phi) * vectors + 2j * math.sin(phi) * projector.apply(vectors)


def c_pi_not(projector: Projector) -> np.ndarray:
    '''Pi (x) X + (I - Pi) (x) I, ancilla last'''
    pi = projector.operator.entries
    eye = np.eye(projector.dim)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    return np.kron(pi, x) + np.kron(eye - pi, np.eye(2))


def pi_phi_gadget(projector: Projector, phi: float) -> Operator:
    '''Two C_Pi NOT gates around an ancilla Z rotation; ancilla |0> sector carries Pi_phi, |1> carries Pi_-phi'''
    flip = c_pi_not(projector)
    rotation = np.kron(np.eye(projector.dim), np.diag([np.exp(-1j * phi), np.exp(1j * phi)]))
    return Operator.square(flip @ rotation @ flip, projector.dims + (2,))


def apply_sequence(block: BlockEncoding, phases: Union[PhaseSequence, np.ndarray], vectors: np.ndarray,
                   final_phase: bool = True) -> np.ndarray:
    '''Pi~_{phi_1} U Pi_{phi_2} U^dag Pi~_{phi_3} U ... Pi~_{phi_d} U applied to each column.

    With final_phase=False the leftmost Pi~_{phi_1} is left out.
    '''
    phi = phases.phases if isinstance(phases, PhaseSequence) else np.asarray(phases, dtype=float)
    if phi.size % 2 == 0:
        raise DomainError(f"Phase sequences have odd length, got {phi.size}")
    u = block.unitary.entries
    u_dag = u.conj().T
    out = np.asarray(vectors, dtype=complex)
    d = phi.size
    for step in range(d):
        k = d - 1 - step
        if step % 2 == 0:
            out = u @ out
            if k > 0 or final_phase:
                out = _apply_pi_phi(block.left_projector, phi[k], out)
        else:
            out = u_dag @ out
            out = _apply_pi_phi(block.right_projector, phi[k], out)
    return out


def alternating_sequence(block: BlockEncoding, phases: PhaseSequence) -> Operator:
    '''Full unitary U_phi'''
    matrix = apply_sequence(block, phases, np.eye(block.unitary.shape[0], dtype=complex))
    return Operator.square(matrix, block.dims)


def sequence_block(block: BlockEncoding, phases: PhaseSequence, real_part: bool = False) -> np.ndarray:
    '''(Pi~, Pi) block of U_phi, or of (U_phi + U_-phi)/2 when real_part is set'''
    right = block.right_projector.basis
    columns = apply_sequence(block, phases, right)
    if real_part:
        columns = (columns + apply_sequence(block, -np.asarray(phases.phases), right)) / 2
    return block.left_projector.basis.conj().T @ columns


def apply_exact(block: BlockEncoding, f: Union[SVTFunction, OddPolynomial, Callable]) -> Operator:
    '''Sum_i f(s_i) |u_i><v_i| over the singular triples of the encoded block'''
    decomposition = svd(block.block())
    values = decomposition.singular_values
    if values.size and values.max() > 1 + DEFAULT_POLICY.structural_tol:
        raise DomainError(f"Encoded matrix has singular value {values.max():.6f} > 1")
    transformed = np.asarray(as_callable(f)(np.clip(values, 0.0, 1.0)), dtype=complex)
    inner = (decomposition.left_vectors * transformed) @ decomposition.right_vectors.conj().T
    full = block.left_projector.basis @ inner @ block.right_projector.basis.conj().T
    return Operator.square(full, block.dims)


@dataclass(frozen=True, eq=False)
class QsvtRun:
    block: BlockEncoding
    phases: PhaseSequence
    use_real_part_gadget: bool = True
    flag_projectors: List[Tuple[str, Projector]] = field(default_factory=list)

    def __post_init__(self):
        flags = list(self.flag_projectors)
        if not flags:
            flags.append(('system', self.block.left_projector))
            if self.use_real_part_gadget:
                flags.append(('ancilla', Projector(PLUS, (2,))))
        names = [name for name, _ in flags]
        if 'system' not in names:
            raise DomainError("Flag projectors must include the left projector of the encoding")
        if self.use_real_part_gadget and 'ancilla' not in names:
            raise DomainError("Real-part gadget needs the ancilla |+> flag")
        unknown = [name for name in names if name not in FLAG_NAMES]
        if unknown:
            raise ConfigurationError(f"Unknown flag projectors {unknown}; choose from {FLAG_NAMES}")
        if not self.use_real_part_gadget and 'ancilla' in names:
            raise ConfigurationError("The ancilla flag only exists with the real-part gadget")
        object.__setattr__(self, 'flag_projectors', flags)


def run_with_flags(run: QsvtRun, state: Union[StateVector, np.ndarray]) -> Tuple[StateVector, float]:
    '''Post-flag state and the exact flag-success probability'''
    block = run.block
    psi = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    outside = psi - block.right_projector.apply(psi)
    if np.linalg.norm(outside) > DEFAULT_POLICY.statistical_tol:
        raise DomainError(f"Input leaves the right projector by {np.linalg.norm(outside):.2e}")

    if run.use_real_part_gadget:
        phi_1 = run.phases.phases[0]
        forward = apply_sequence(block, run.phases, psi, final_phase=False)
        backward = apply_sequence(block, run.phases.conjugate(), psi, final_phase=False)
        # the omitted Pi~_{phi_1} becomes an ancilla phase once Pi~ is flagged
        out = (np.exp(1j * phi_1) * forward + np.exp(-1j * phi_1) * backward) / 2
    else:
        out = apply_sequence(block, run.phases, psi)
    # the ancilla flag is the +/- phi average above
    for name, projector in run.flag_projectors:
        if name == 'system':
            out = projector.apply(out)

    probability = float(np.vdot(out, out).real)
    if probability < DEFAULT_POLICY.zero_probability:
        raise DegenerateFlagError(f"Flag success probability {probability:.3e} vanishes")
    logger.debug(f"QSVT run of degree {run.phases.degree}: flag probability {probability:.6f}")
    return StateVector(out / math.sqrt(probability), block.dims), probability
