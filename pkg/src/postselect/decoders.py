'''
Teleportation decoders for measurement-induced teleportation: the pseudoinverse
decoder by QSVT, and the Yoshida-Kitaev-like and Petz-like decoders in the
teleportation and decoherence settings
'''

import logging
import math
from dataclasses import asdict, dataclass
from functools import cached_property
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from .blockenc import BlockEncoding
from .errors import ConsistencyError, DimensionError, DomainError, NonInjectiveError
from .linalg_core import (
    DEFAULT_POLICY,
    Operator,
    Projector,
    SeedLike,
    StateVector,
    as_rng,
    check_envelope,
    epr_state,
    haar_random_unitary,
    partial_trace,
    psd_sqrt,
    state_preparation_unitary,
    svd,
)
from .phase_solver import PhaseSequence, solve_phases
from .protocols import BranchSpectrum, MixedInstance, branch_spectrum, uhlmann_from_spectrum
from .qsvt_circuit import apply_sequence
from .svtfun import OddPolynomial, SVTFunction, as_callable, fpaa_polynomial, inverse_polynomial

logger = logging.getLogger(__name__)

DECODER_COLUMNS = ['decoder', 'p_star', 'f_decoding', 'p_succ', 'f_overall', 'f_uhlmann', 'effective_rank']


@dataclass(frozen=True, eq=False)
class TeleportInstance:
    '''U maps A (x) B to E (x) D; A is the input paired with R, E is measured with outcome m'''
    unitary: Operator
    input_partition: Tuple[int, int]
    output_partition: Tuple[int, int]
    outcome: int

    def __post_init__(self):
        d_a, d_b = self.input_partition
        d_e, d_d = self.output_partition
        total = self.unitary.shape[0]
        if d_a * d_b != total or d_e * d_d != total:
            raise DimensionError(f"Partitions {self.input_partition}/{self.output_partition} do not factor {total}")
        if not 0 <= self.outcome < d_e:
            raise DomainError(f"Outcome {self.outcome} outside the {d_e}-dimensional measured register")

    @property
    def d_r(self) -> int:
        return self.input_partition[0]

    @property
    def d_d(self) -> int:
        return self.output_partition[1]

    @property
    def d_e(self) -> int:
        return self.output_partition[0]

    @cached_property
    def branch_matrix(self) -> np.ndarray:
        '''M[d, a] = <m, d| U |a, 0>'''
        d_a, d_b = self.input_partition
        columns = self.unitary.entries[:, np.arange(d_a) * d_b]
        return columns.reshape(self.d_e, self.d_d, d_a)[self.outcome]

    @cached_property
    def mixed_instance(self) -> MixedInstance:
        total = self.unitary.shape[0]
        target = Projector.from_indices(np.arange(self.outcome * self.d_d, (self.outcome + 1) * self.d_d), (total,))
        return MixedInstance(Operator.square(self.unitary.entries, (total,)), self.input_partition, target)

    @cached_property
    def spectrum(self) -> BranchSpectrum:
        return branch_spectrum(self.mixed_instance)

    @property
    def p_m(self) -> float:
        return self.spectrum.p_m


def random_teleport_instance(n_total: int, n_input: int, n_measured: int, seed: SeedLike = None,
                             outcome: Optional[int] = None) -> TeleportInstance:
    '''Haar U on n_total qubits; leading n_input qubits are A, leading n_measured qubits are E'''
    check_envelope(2 ** n_total)
    rng = as_rng(seed)
    unitary = haar_random_unitary(2 ** n_total, rng)
    d_a, d_b = 2 ** n_input, 2 ** (n_total - n_input)
    d_e, d_d = 2 ** n_measured, 2 ** (n_total - n_measured)
    if outcome is None:
        weights = np.abs(unitary[:, np.arange(d_a) * d_b]) ** 2
        per_outcome = weights.reshape(d_e, -1).sum(axis=1)
        outcome = int(rng.choice(d_e, p=per_outcome / per_outcome.sum()))
    return TeleportInstance(Operator.square(unitary, (2 ** n_total,)), (d_a, d_b), (d_e, d_d), outcome)


@dataclass(frozen=True)
class DecoderReport:
    decoder: str
    f_decoding: float
    p_succ: float
    f_overall: float
    f_uhlmann: float
    p_star: Optional[float] = None
    effective_rank: Optional[int] = None

    def as_row(self) -> Dict[str, object]:
        row = asdict(self)
        return {column: row[column] for column in DECODER_COLUMNS}


def teleported_state(instance: TeleportInstance) -> np.ndarray:
    '''omega_RD|m as a d_R x d_D amplitude matrix'''
    p_m = instance.p_m
    if p_m < DEFAULT_POLICY.zero_probability:
        raise DomainError(f"Outcome probability {p_m:.3e} vanishes")
    return instance.branch_matrix.T / math.sqrt(instance.d_r * p_m)


def injective_part(spectrum: BranchSpectrum) -> BranchSpectrum:
    '''Spectrum restricted to the branches with nonzero probability'''
    support = spectrum.p_am > DEFAULT_POLICY.zero_probability
    if not support.any():
        raise NonInjectiveError("Every branch probability vanishes; no direction can be inverted")
    return BranchSpectrum.from_values(spectrum.p_am[support])


def pseudoinverse_report(spectrum: BranchSpectrum, f: Union[SVTFunction, OddPolynomial, Callable],
                         p_star: Optional[float] = None, decoder: str = 'pseudoinverse') -> DecoderReport:
    '''Decoding fidelity and success probability of f(M^dag) on the injective sub-block of the spectrum'''
    support = spectrum.p_am > DEFAULT_POLICY.zero_probability
    rank = int(support.sum())
    if rank == 0:
        raise NonInjectiveError("Every branch probability vanishes; no direction can be inverted")
    if rank < spectrum.d_r:
        logger.warning(f"Encoded map has rank {rank} < d_R={spectrum.d_r}; decoding the injective sub-block")
    p = spectrum.p_am[support]
    roots = np.sqrt(p)
    values = np.asarray(as_callable(f)(roots), dtype=float)
    total = float(p.sum())
    p_succ = float(np.sum(p * values ** 2) / total)
    if p_succ < DEFAULT_POLICY.zero_probability:
        f_decoding = 0.0
    else:
        f_decoding = min(float(np.sum(roots * values) ** 2 / (rank * total * p_succ)), 1.0)
    f_uhlmann = min(float(np.sum(roots) ** 2 / (rank * total)), 1.0)
    if p_star is None and isinstance(f, SVTFunction):
        p_star = f.p_star
    return DecoderReport(decoder, f_decoding, p_succ, p_succ * f_decoding, f_uhlmann, p_star, rank)


def truncated_inverse_infidelity_bound(spectrum: BranchSpectrum, p_star: float) -> float:
    '''
    Upper bound on 1 - f_decoding for the ideal truncated inverse at threshold p*.

    Branches at or above p* decode with unit weight and a branch below it with
    weight p_am / p*, so 1 - F = Var(w) / E[w^2] <= sum_below (1 - p_am/p*)^2 / #above.
    '''
    if p_star <= 0:
        raise DomainError(f"p_star must be positive, got {p_star}")
    p = spectrum.p_am[spectrum.p_am > DEFAULT_POLICY.zero_probability]
    above = int(np.sum(p >= p_star))
    if above == 0:
        return 1.0
    below = p[p < p_star]
    return min(float(np.sum((1 - below / p_star) ** 2) / above), 1.0)


def pseudoinverse_decode(instance: TeleportInstance, p_star: float,
                         f: Optional[Union[SVTFunction, OddPolynomial]] = None) -> DecoderReport:
    '''Truncated-inverse decoder evaluated from the branch spectrum'''
    f = f if f is not None else SVTFunction('trunc_inverse', p_star)
    return pseudoinverse_report(instance.spectrum, f, p_star)


def petz_block_encoding(instance: TeleportInstance) -> BlockEncoding:
    '''U^dag between |m, d> and |a, 0>; its block is M^dag'''
    total = instance.unitary.shape[0]
    d_a, d_b = instance.input_partition
    dims = (total,)
    right = Projector.from_indices(np.arange(instance.outcome * instance.d_d, (instance.outcome + 1) * instance.d_d),
                                   dims)
    left = Projector.from_indices(np.arange(d_a) * d_b, dims)
    return BlockEncoding(Operator.square(instance.unitary.entries.conj().T, dims), right, left,
                         {'kind': 'petz_decoder'})


def yk_block_encoding(instance: TeleportInstance) -> BlockEncoding:
    '''I_D (x) (U*_{A'B'} EPR_{R'A'}) on D (x) R' (x) A'B', certified to encode M^dag / sqrt(d_D d_R)'''
    d_a, d_b = instance.input_partition
    d_d, d_r = instance.d_d, instance.d_r
    total = instance.unitary.shape[0]
    check_envelope(d_d * d_r * total)
    dims = (d_d, d_r, total)

    epr_prep = np.kron(state_preparation_unitary(epr_state(d_r)), np.eye(d_b))
    inner = np.kron(np.eye(d_r), instance.unitary.entries.conj()) @ epr_prep
    unitary = np.kron(np.eye(d_d), inner)

    right = Projector.computational(dims, {1: 0, 2: 0})
    left_basis = np.zeros((d_d, d_r, total, d_r), dtype=complex)
    for r in range(d_r):
        for x in range(d_d):
            left_basis[x, r, instance.outcome * d_d + x, r] = 1 / math.sqrt(d_d)
    left = Projector(left_basis.reshape(-1, d_r), dims)

    encoding = BlockEncoding(Operator.square(unitary, dims), right, left, {'kind': 'yk_decoder'})
    expected = instance.branch_matrix.conj().T / math.sqrt(d_d * d_r)
    deviation = float(np.max(np.abs(encoding.block() - expected)))
    if deviation > DEFAULT_POLICY.structural_tol:
        raise ConsistencyError(f"YK encoding deviates from M^dag / sqrt(d_D d_R) by {deviation:.2e}")
    return encoding


def _circuit_decode(instance: TeleportInstance, phases: PhaseSequence, decoder: str,
                    p_star: Optional[float]) -> DecoderReport:
    '''Run the real-part QSVT circuit on the Petz encoding with D fed by omega_RD|m'''
    encoding = petz_block_encoding(instance)
    omega = teleported_state(instance)
    inputs = encoding.right_projector.basis @ omega.T
    phi_1 = phases.phases[0]
    forward = apply_sequence(encoding, phases, inputs, final_phase=False)
    backward = apply_sequence(encoding, phases.conjugate(), inputs, final_phase=False)
    flagged = (np.exp(1j * phi_1) * forward + np.exp(-1j * phi_1) * backward) / 2
    decoded = (encoding.left_projector.basis.conj().T @ flagged).T

    spectrum = instance.spectrum
    rank = int(np.sum(spectrum.p_am > DEFAULT_POLICY.zero_probability))
    p_succ = float(np.sum(np.abs(decoded) ** 2))
    f_decoding = abs(np.trace(decoded)) ** 2 / (rank * p_succ) if p_succ > DEFAULT_POLICY.zero_probability else 0.0
    f_uhlmann = pseudoinverse_report(spectrum, lambda x: np.ones_like(x)).f_uhlmann
    return DecoderReport(decoder, min(f_decoding, 1.0), p_succ, p_succ * min(f_decoding, 1.0), f_uhlmann,
                         p_star, rank)


def pseudoinverse_circuit_decode(instance: TeleportInstance, p_star: float, delta_mult: float = 1e-3,
                                 phases: Optional[PhaseSequence] = None) -> Tuple[DecoderReport, PhaseSequence]:
    '''Circuit-tier pseudoinverse decoder; returns the report and the phases it used'''
    if phases is None:
        p_max = max(instance.spectrum.p_max, p_star)
        phases = solve_phases(inverse_polynomial(p_star, min(p_max, 1.0), delta_mult))
    return _circuit_decode(instance, phases, 'pseudoinverse_circuit', p_star), phases


def fpaa_decode(instance: TeleportInstance, p_star: float, delta: float, circuit: bool = False) -> DecoderReport:
    '''FPAA in place of the decoder post-selection: a sign polynomial on the decoder encoding'''
    poly = fpaa_polynomial(p_star, delta)
    if circuit:
        return _circuit_decode(instance, solve_phases(poly), 'fpaa_circuit', p_star)
    return pseudoinverse_report(instance.spectrum, poly, p_star, decoder='fpaa')


def yk_contraction_check(instance: TeleportInstance) -> Tuple[float, float]:
    '''(F, p_succ) of the YK decoder by explicit contraction with the conjugate copy U*'''
    omega = teleported_state(instance)
    conj_branch = instance.branch_matrix.conj()
    decoded = omega @ conj_branch / math.sqrt(instance.d_r * instance.d_d)
    p_succ = float(np.sum(np.abs(decoded) ** 2))
    return abs(np.trace(decoded)) ** 2 / (instance.d_r * p_succ), p_succ


def petz_contraction_check(instance: TeleportInstance) -> Tuple[float, float]:
    '''(F, p_succ) of the Petz decoder: U^dag applied to |m> (x) D, then <0|_B'''
    omega = teleported_state(instance)
    recovery = instance.branch_matrix.conj().T
    decoded = omega @ recovery.T
    p_succ = float(np.sum(np.abs(decoded) ** 2))
    return abs(np.trace(decoded)) ** 2 / (instance.d_r * p_succ), p_succ


def _purity(matrix: np.ndarray) -> float:
    return float(np.sum(np.abs(matrix) ** 2))


def _check_pair(name: str, formula: Tuple[float, float], contracted: Tuple[float, float]):
    if max(abs(a - b) for a, b in zip(formula, contracted)) > DEFAULT_POLICY.statistical_tol:
        raise ConsistencyError(f"{name} decoder: entropy formula {formula} disagrees with contraction {contracted}")


def yk_teleport_decode(instance: TeleportInstance) -> DecoderReport:
    '''F = exp(S2(omega_D|m)) / d_R, p_succ = p_m exp(-S2(omega_D|m)) / d_D'''
    omega = teleported_state(instance)
    purity = _purity(omega.conj().T @ omega)
    f_decoding = 1 / (instance.d_r * purity)
    p_succ = instance.p_m * purity / instance.d_d
    _check_pair('YK', (f_decoding, p_succ), yk_contraction_check(instance))
    return DecoderReport('yk', f_decoding, p_succ, f_decoding * p_succ, uhlmann_from_spectrum(instance.spectrum),
                         None, int(np.sum(instance.spectrum.p_am > DEFAULT_POLICY.zero_probability)))


def petz_teleport_decode(instance: TeleportInstance) -> DecoderReport:
    '''F as for YK, p_succ = d_R p_m exp(-S2(omega_R|m))'''
    omega = teleported_state(instance)
    purity = _purity(omega @ omega.conj().T)
    f_decoding = 1 / (instance.d_r * purity)
    p_succ = instance.d_r * instance.p_m * purity
    _check_pair('Petz', (f_decoding, p_succ), petz_contraction_check(instance))
    return DecoderReport('petz', f_decoding, p_succ, f_decoding * p_succ, uhlmann_from_spectrum(instance.spectrum),
                         None, int(np.sum(instance.spectrum.p_am > DEFAULT_POLICY.zero_probability)))


def decoherence_state(unitary: Union[Operator, np.ndarray], input_partition: Tuple[int, int],
                      output_partition: Tuple[int, int]) -> StateVector:
    '''omega_RED = (I_R (x) U)(EPR_RA (x) |0>_B) with U's output split as E (x) D'''
    matrix = unitary.entries if isinstance(unitary, Operator) else np.asarray(unitary, dtype=complex)
    d_a, d_b = input_partition
    d_e, d_d = output_partition
    if d_a * d_b != matrix.shape[0] or d_e * d_d != matrix.shape[0]:
        raise DimensionError(f"Partitions {input_partition}/{output_partition} do not factor {matrix.shape[0]}")
    amplitudes = matrix[:, np.arange(d_a) * d_b].T / math.sqrt(d_a)
    return StateVector(amplitudes.reshape(-1), (d_a, d_e, d_d))


def decoupling_fidelity(omega_re: Operator, d_r: int, d_e: int, max_iter: int = 500, tol: float = 1e-13) -> float:
    '''max over tau of F(omega_RE, I_R / d_R (x) tau), by alternating polar maximization'''
    rho = omega_re.entries
    if rho.shape != (d_r * d_e, d_r * d_e):
        raise DimensionError(f"omega_RE of shape {rho.shape} does not match {d_r} x {d_e}")
    root = psd_sqrt(rho)
    reduced = np.einsum('aiaj->ij', rho.reshape(d_r, d_e, d_r, d_e))
    s = psd_sqrt(reduced)
    s = s / np.linalg.norm(s)
    value = 0.0
    for iteration in range(max_iter):
        product = root @ np.kron(np.eye(d_r), s)
        decomposition = svd(product)
        polar = decomposition.right_vectors @ decomposition.left_vectors.conj().T
        y = np.einsum('aiaj->ij', (polar @ root).reshape(d_r, d_e, d_r, d_e))
        y = (y + y.conj().T) / 2
        eigenvalues, eigenvectors = np.linalg.eigh(y)
        positive = np.clip(eigenvalues, 0.0, None)
        norm = float(np.linalg.norm(positive))
        if norm < DEFAULT_POLICY.zero_probability:
            break
        s = (eigenvectors * (positive / norm)) @ eigenvectors.conj().T
        if norm - value < tol:
            value = max(value, norm)
            break
        value = norm
    logger.debug(f"Decoupling fidelity converged after {iteration + 1} iterations")
    return min(value ** 2 / d_r, 1.0)


def decoherence_decoders(omega: StateVector) -> Tuple[DecoderReport, DecoderReport]:
    '''YK and Petz decoders of a pure omega_RED with dims (d_R, d_E, d_D)'''
    if len(omega.dims) != 3:
        raise DimensionError(f"Expected a tripartite state R, E, D, got dims {omega.dims}")
    d_r, d_e, d_d = omega.dims
    check_envelope(omega.dim, "vector")
    purity_d = _purity(partial_trace(omega, [2]).entries)
    purity_rd = _purity(partial_trace(omega, [0, 2]).entries)
    f_decoding = purity_rd / (d_r * purity_d)
    f_uhlmann = decoupling_fidelity(partial_trace(omega, [0, 1]), d_r, d_e)

    p_yk = purity_d / d_d
    p_petz = d_r * purity_d / d_e
    yk = DecoderReport('yk_decoherence', f_decoding, p_yk, f_decoding * p_yk, f_uhlmann)
    petz = DecoderReport('petz_decoherence', f_decoding, p_petz, f_decoding * p_petz, f_uhlmann)
    return yk, petz


@dataclass(frozen=True)
class AqecResult:
    satisfied: bool
    p_qsvt_bound: float
    measured_epsilon_prime: float
    alpha: float
    p_qsvt_measured: float


def aqec_check(spectrum: BranchSpectrum, epsilon: float, epsilon_prime: float) -> AqecResult:
    '''AQEC 1-norm condition and the success-probability bound (1 - eps'/eps)(1 - eps)'''
    if not 0 <= epsilon_prime < epsilon < 1:
        raise DomainError(f"Need 0 <= eps' < eps < 1, got eps'={epsilon_prime}, eps={epsilon}")
    if spectrum.p_m < DEFAULT_POLICY.zero_probability:
        raise DomainError("Outcome probability vanishes")
    measured = float(np.sum(np.abs(spectrum.p_am / spectrum.p_m - 1)) / (2 * spectrum.d_r))
    alpha = 1 - epsilon_prime / epsilon
    bound = alpha * (1 - epsilon)
    p_star = alpha * spectrum.p_m
    if p_star > 0:
        achieved = pseudoinverse_report(spectrum, SVTFunction('inverse_cut', min(p_star, 1.0)), p_star).p_succ
    else:
        achieved = 0.0
    return AqecResult(measured <= epsilon_prime + 1e-12, bound, measured, alpha, achieved)
