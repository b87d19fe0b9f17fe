'''
Post-selection-free state preparation protocols: FPAA of a post-selected pure
state, LAA of a post-selected mixed state, and the metrics that score them
'''

import itertools
import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .blockenc import BlockEncoding, mixed_postselect_encoding, postselect_encoding
from .errors import DegenerateOutcomeError, DimensionError, DomainError
from .linalg_core import (
    DEFAULT_POLICY,
    Operator,
    Projector,
    SeedLike,
    StateVector,
    as_rng,
    check_envelope,
    haar_random_isometry,
    haar_random_unitary,
    partial_trace,
    qubit_dims,
    state_preparation_unitary,
    svd,
)
from .phase_solver import PhaseSequence, solve_phases
from .qsvt_circuit import QsvtRun, apply_sequence, run_with_flags
from .svtfun import OddPolynomial, SVTFunction, as_callable, fpaa_polynomial, laa_polynomial

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EnsembleEntry:
    outcome: Tuple[int, ...]
    probability: float
    projector: Projector
    state: StateVector


@dataclass(frozen=True, eq=False)
class ProjectedEnsemble:
    entries: List[EnsembleEntry]
    measured_qubits: Tuple[int, ...]

    def __post_init__(self):
        total = sum(e.probability for e in self.entries)
        if abs(total - 1.0) > DEFAULT_POLICY.statistical_tol:
            raise DomainError(f"Ensemble probabilities sum to {total}")
        for entry in self.entries:
            leak = np.linalg.norm(entry.state.amplitudes - entry.projector.apply(entry.state.amplitudes))
            if leak > DEFAULT_POLICY.statistical_tol:
                raise DomainError(f"Post-state of outcome {entry.outcome} leaves its projector")

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([e.probability for e in self.entries])

    def __len__(self) -> int:
        return len(self.entries)


def project_ensemble(state: StateVector, measured_qubits: Sequence[int]) -> ProjectedEnsemble:
    '''Born-rule ensemble of post-measurement states for a computational-basis measurement'''
    measured = tuple(int(q) for q in measured_qubits)
    if len(set(measured)) != len(measured) or any(q < 0 or q >= len(state.dims) for q in measured):
        raise DimensionError(f"Invalid measured subsystems {measured} for dims {state.dims}")
    entries = []
    for outcome in itertools.product(*(range(state.dims[q]) for q in measured)):
        projector = Projector.computational(state.dims, dict(zip(measured, outcome)))
        branch = projector.apply(state.amplitudes)
        probability = float(np.vdot(branch, branch).real)
        if probability <= DEFAULT_POLICY.zero_probability:
            continue
        entries.append(EnsembleEntry(outcome, probability, projector,
                                     StateVector(branch / math.sqrt(probability), state.dims)))
    logger.debug(f"Projected ensemble over {measured}: {len(entries)} outcomes")
    return ProjectedEnsemble(entries, measured)


def fpaa_phases(p_star: float, delta: float) -> PhaseSequence:
    return solve_phases(fpaa_polynomial(p_star, delta))


def fpaa_prepare(encoding: BlockEncoding, p_star: float, delta: float,
                 phases: Optional[PhaseSequence] = None) -> Tuple[StateVector, float]:
    '''Run the FPAA circuit on |0> of a post-selection encoding; returns the flagged state'''
    phases = phases or fpaa_phases(p_star, delta)
    run = QsvtRun(encoding, phases, use_real_part_gadget=True)
    start = encoding.right_projector.basis[:, 0]
    state, flag_probability = run_with_flags(run, start)
    p_m = encoding.metadata.get('p_m')
    if p_m is not None and p_m < p_star:
        logger.info(f"FPAA below threshold: p_m={p_m:.4f} < p*={p_star}; no fidelity guarantee")
    return state, flag_probability


def fpaa_from_state(psi: StateVector, target: Projector, p_star: float, delta: float,
                    phases: Optional[PhaseSequence] = None) -> Tuple[StateVector, float]:
    return fpaa_prepare(postselect_encoding(state_preparation_unitary(psi), target), p_star, delta, phases)


@dataclass(frozen=True, eq=False)
class MixedInstance:
    '''U acting on A (x) B with A maximally mixed and B in |0>, followed by the outcome projector'''
    prep_unitary: Operator
    partition: Tuple[int, int]
    target: Projector

    def __post_init__(self):
        d_a, d_b = self.partition
        if d_a * d_b != self.target.dim or self.prep_unitary.shape[0] != self.target.dim:
            raise DimensionError(f"Partition {self.partition} inconsistent with system dimension {self.target.dim}")

    @property
    def d_r(self) -> int:
        return self.partition[0]

    @property
    def dims(self) -> Tuple[int, ...]:
        return self.target.dims

    def encoding(self) -> BlockEncoding:
        return mixed_postselect_encoding(self.prep_unitary, self.partition, self.target)

    def branch_matrix(self) -> np.ndarray:
        '''M = Pi_m U (I_A (x) |0>_B) as an N x d_A matrix'''
        columns = self.prep_unitary.entries[:, np.arange(self.partition[0]) * self.partition[1]]
        return self.target.apply(columns)


def outcome_projector(dims: Sequence[int], measured: int, outcome: int) -> Projector:
    '''Fix the first `measured` subsystems to the digits of outcome'''
    digits = np.unravel_index(outcome, tuple(dims[:measured])) if measured else ()
    return Projector.computational(dims, {q: int(v) for q, v in enumerate(digits)})


def _sample_outcome(columns: np.ndarray, n_measured: int, rng: np.random.Generator) -> int:
    '''Outcome on the leading qubits drawn from the averaged branch distribution'''
    weights = np.abs(columns) ** 2
    per_outcome = weights.reshape(2 ** n_measured, -1, weights.shape[1]).sum(axis=(1, 2))
    per_outcome = per_outcome / per_outcome.sum()
    return int(rng.choice(per_outcome.size, p=per_outcome))


def random_mixed_instance(n_total: int, n_mixed: int, n_measured: int, seed: SeedLike = None,
                          outcome: Optional[int] = None) -> MixedInstance:
    '''Haar unitary on n_total qubits, the first n_mixed maximally mixed, the first n_measured measured'''
    if not 0 <= n_mixed <= n_total or not 0 <= n_measured <= n_total:
        raise DomainError(f"Qubit counts {n_total}/{n_mixed}/{n_measured} are inconsistent")
    check_envelope(2 ** n_total)
    rng = as_rng(seed)
    unitary = haar_random_unitary(2 ** n_total, rng)
    d_a = 2 ** n_mixed
    if outcome is None:
        outcome = _sample_outcome(unitary[:, np.arange(d_a) * 2 ** (n_total - n_mixed)], n_measured, rng)
    dims = qubit_dims(n_total)
    return MixedInstance(Operator.square(unitary, dims), (d_a, 2 ** (n_total - n_mixed)),
                         outcome_projector(dims, n_measured, outcome))


@dataclass(frozen=True, eq=False)
class BranchSpectrum:
    p_am: np.ndarray
    p_m: float
    d_r: int

    def __post_init__(self):
        values = np.array(self.p_am, dtype=float).reshape(-1)
        if values.size != self.d_r:
            raise DimensionError(f"Spectrum has {values.size} values for d_R={self.d_r}")
        if values.size and (values.min() < 0 or values.max() > 1 + DEFAULT_POLICY.statistical_tol):
            raise DomainError("Branch probabilities must lie in [0, 1]")
        if abs(self.p_m - values.mean()) > DEFAULT_POLICY.statistical_tol:
            raise DomainError(f"p_m={self.p_m} differs from the mean branch probability {values.mean()}")
        values.flags.writeable = False
        object.__setattr__(self, 'p_am', values)

    @classmethod
    def from_values(cls, values: Sequence[float]) -> 'BranchSpectrum':
        values = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
        return cls(values, float(values.mean()), values.size)

    @property
    def p_max(self) -> float:
        return float(self.p_am.max())

    @property
    def p_min(self) -> float:
        return float(self.p_am.min())


def _spectrum_from_gram(gram: np.ndarray) -> BranchSpectrum:
    values = np.linalg.eigvalsh((gram + gram.conj().T) / 2)
    if values.min(initial=0.0) < -DEFAULT_POLICY.psd_tol:
        raise DomainError(f"Branch matrix has eigenvalue {values.min():.3e} < 0")
    values = np.sort(np.clip(values, 0.0, None))[::-1]
    return BranchSpectrum(values, float(values.mean()), values.size)


def branch_spectrum(instance: MixedInstance) -> BranchSpectrum:
    '''Eigenvalues of p_ab = <psi_a| Pi_m |psi_b>'''
    branches = instance.branch_matrix()
    return _spectrum_from_gram(branches.conj().T @ branches)


def branch_spectrum_from_isometry(isometry: Union[Operator, np.ndarray], target_rows: Sequence[int]) -> BranchSpectrum:
    '''Spectrum tier: only the d_A columns U|a, 0> and the rows kept by Pi_m are touched'''
    columns = isometry.entries if isinstance(isometry, Operator) else np.asarray(isometry, dtype=complex)
    kept = columns[np.asarray(target_rows, dtype=int)]
    return _spectrum_from_gram(kept.conj().T @ kept)


def haar_isometry_spectrum(n_total: int, n_mixed: int, n_measured: int, seed: SeedLike = None,
                           outcome: Optional[int] = None) -> BranchSpectrum:
    rng = as_rng(seed)
    columns = haar_random_isometry(2 ** n_total, 2 ** n_mixed, rng).entries
    if outcome is None:
        outcome = _sample_outcome(columns, n_measured, rng)
    block = 2 ** (n_total - n_measured)
    return branch_spectrum_from_isometry(columns, np.arange(outcome * block, (outcome + 1) * block))


@dataclass(frozen=True)
class MetricsReport:
    f_qsvt: float
    p_qsvt: float
    f_overall: float
    f_uhlmann: float
    p_star: Optional[float] = None

    def as_row(self) -> Dict[str, float]:
        row = asdict(self)
        return {'p_star': row.pop('p_star'), **row}


def uhlmann_from_spectrum(spectrum: BranchSpectrum) -> float:
    '''F(I_R / d_R, Psi_R|m) in closed form'''
    if spectrum.p_m < DEFAULT_POLICY.zero_probability:
        raise DegenerateOutcomeError(f"Outcome probability {spectrum.p_m:.3e} vanishes")
    return float(np.sum(np.sqrt(spectrum.p_am)) ** 2 / (spectrum.d_r ** 2 * spectrum.p_m))


def metrics(spectrum: BranchSpectrum, f: Union[SVTFunction, OddPolynomial, Callable],
            p_star: Optional[float] = None) -> MetricsReport:
    '''F_QSVT, p_QSVT, F_overall and F_Uhlmann from the branch spectrum'''
    f_uhlmann = uhlmann_from_spectrum(spectrum)
    roots = np.sqrt(spectrum.p_am)
    values = np.asarray(as_callable(f)(roots), dtype=float)
    p_qsvt = float(np.mean(values ** 2))
    if p_qsvt < DEFAULT_POLICY.zero_probability:
        f_qsvt = 0.0
    else:
        f_qsvt = float(np.sum(roots * values) ** 2 / (spectrum.d_r ** 2 * spectrum.p_m * p_qsvt))
        f_qsvt = min(f_qsvt, 1.0)
    if p_star is None and isinstance(f, SVTFunction):
        p_star = f.p_star
    return MetricsReport(f_qsvt, p_qsvt, p_qsvt * f_qsvt, min(f_uhlmann, 1.0), p_star)


def postselected_joint_state(instance: MixedInstance) -> StateVector:
    '''Psi_m on R (x) S: sum_a |a> (x) Pi_m U |a, 0>, normalized'''
    joint = instance.branch_matrix().T
    state, _ = StateVector.from_unnormalized(joint.reshape(-1), (instance.d_r,) + instance.dims)
    return state


def qsvt_joint_state(instance: MixedInstance, f: Union[SVTFunction, OddPolynomial, Callable]
                     ) -> Tuple[StateVector, float]:
    '''Spectral construction sum_i f(s_i) |conj v_i> (x) |u_i>, normalized, with its flag probability'''
    decomposition = svd(instance.branch_matrix())
    values = np.asarray(as_callable(f)(np.clip(decomposition.singular_values, 0.0, 1.0)), dtype=complex)
    joint = (decomposition.right_vectors.conj() * values) @ decomposition.left_vectors.T
    state, norm_sq = StateVector.from_unnormalized(joint.reshape(-1), (instance.d_r,) + instance.dims)
    return state, norm_sq / instance.d_r


def laa_phases(p_star: float, delta_mult: float = 1e-3) -> PhaseSequence:
    if p_star >= 1:
        return solve_phases(OddPolynomial([0.0, 1.0]))
    return solve_phases(laa_polynomial(p_star, delta_mult))


def laa_simulate(instance: MixedInstance, p_star: float, delta_mult: float = 1e-3,
                 phases: Optional[PhaseSequence] = None) -> Tuple[StateVector, float]:
    '''LAA circuit on the purified input sum_a |a>_R |a, 0>_S / sqrt(d_R), conditioned on the flags'''
    phases = phases or laa_phases(p_star, delta_mult)
    encoding = instance.encoding()
    check_envelope(encoding.unitary.shape[0])
    inputs = encoding.right_projector.basis
    phi_1 = phases.phases[0]
    forward = apply_sequence(encoding, phases, inputs, final_phase=False)
    backward = apply_sequence(encoding, phases.conjugate(), inputs, final_phase=False)
    flagged = encoding.left_projector.apply((np.exp(1j * phi_1) * forward + np.exp(-1j * phi_1) * backward) / 2)

    joint = flagged.T / math.sqrt(instance.d_r)
    state, flag_probability = StateVector.from_unnormalized(joint.reshape(-1), (instance.d_r,) + instance.dims)
    logger.debug(f"LAA degree {phases.degree} at p*={p_star}: flag probability {flag_probability:.6f}")
    return state, flag_probability


def purification_unitary(instance: MixedInstance) -> Operator:
    '''Unitary on R (x) S whose first column is the purification of the mixed input after U'''
    joint = instance.prep_unitary.entries[:, np.arange(instance.d_r) * instance.partition[1]].T
    psi = joint.reshape(-1) / math.sqrt(instance.d_r)
    return Operator.square(state_preparation_unitary(psi), (instance.d_r,) + instance.dims)


def purified_fpaa(instance: MixedInstance, p_star: float, delta: float,
                  phases: Optional[PhaseSequence] = None) -> Tuple[Operator, float]:
    '''FPAA with |Psi><Psi|_RS and I_R (x) Pi_m phase gates; returns the reduced state on S'''
    unitary = purification_unitary(instance)
    check_envelope(unitary.shape[0])
    dims = unitary.dims
    left = Projector(np.kron(np.eye(instance.d_r), instance.target.basis), dims, validate=False)
    right = Projector.from_indices([0], dims)
    p_m = float(np.linalg.norm(left.apply(unitary.entries[:, 0])) ** 2)
    if p_m < DEFAULT_POLICY.zero_probability:
        raise DegenerateOutcomeError(f"Outcome probability {p_m:.3e} vanishes")
    encoding = BlockEncoding(unitary, right, left, {'kind': 'purified_postselect', 'p_m': p_m})
    joint, flag_probability = fpaa_prepare(encoding, p_star, delta, phases)
    reduced = partial_trace(joint, range(1, len(dims)))
    return reduced, flag_probability


def postselected_density(instance: MixedInstance) -> Operator:
    '''rho_m = Pi_m rho Pi_m / p_m for rho = U (I_A / d_A (x) |0><0|_B) U^dag'''
    branches = instance.branch_matrix()
    rho = branches @ branches.conj().T
    trace = np.trace(rho).real
    if trace < DEFAULT_POLICY.zero_probability:
        raise DegenerateOutcomeError("Outcome probability vanishes")
    return Operator.square(rho / trace, instance.dims)
