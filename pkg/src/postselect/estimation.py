'''
Post-selection-free estimation of non-linear observables of projected ensembles.

One trial samples an outcome m by measurement, then prepares the remaining
k - 1 copies of |psi_m> with FPAA; a failed flag discards the trial and a
fresh m is sampled.
'''

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Type

import numpy as np
from tqdm import tqdm

from .errors import ConfigurationError, DegenerateFlagError, DimensionError
from .linalg_core import Operator, SeedLike, StateVector, partial_trace, spawn_rngs
from .phase_solver import PhaseSequence
from .protocols import ProjectedEnsemble, fpaa_from_state, fpaa_phases, project_ensemble

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EstimationConfig:
    k: int = 2
    p_star: float = 0.25
    delta: float = 0.01
    n_samples: int = 1000
    seed: Optional[int] = None
    progress: bool = False

    def __post_init__(self):
        if self.k < 2:
            raise ConfigurationError(f"Moment order k must be at least 2, got {self.k}")
        if self.n_samples < 1:
            raise ConfigurationError(f"Sample budget must be positive, got {self.n_samples}")
        if not 0 < self.p_star < 1 or not 0 <= self.delta < 1:
            raise ConfigurationError(f"Need p_star in (0, 1) and delta in [0, 1), got {self.p_star}, {self.delta}")


@dataclass(frozen=True)
class EstimationResult:
    estimate: float
    stderr: float
    flag_fail_rate: float
    bias_bound: float
    n_samples: int
    n_attempts: int


def swap_test_acceptance(first: Operator, second: Operator) -> float:
    '''Pr(accept) = (1 + tr rho_1 rho_2) / 2'''
    if first.shape != second.shape:
        raise DimensionError(f"SWAP test needs equal dimensions, got {first.shape} and {second.shape}")
    overlap = float(np.sum(first.entries.T * second.entries).real)
    return min(max((1 + overlap) / 2, 0.0), 1.0)


def swap_test_purity(first: StateVector, second: StateVector, subsystem: Sequence[int],
                     rng: np.random.Generator) -> int:
    '''Single SWAP-test shot on the subsystem of two copies: +1 on accept, -1 otherwise'''
    if first.dims != second.dims:
        raise DimensionError(f"Copies live on different partitions {first.dims} and {second.dims}")
    accept = swap_test_acceptance(partial_trace(first, subsystem), partial_trace(second, subsystem))
    return 1 if rng.random() < accept else -1


class SwapTestPurity:
    '''Two-copy estimator of tr rho_A^2'''
    k = 2

    def __init__(self, subsystem: Sequence[int]):
        self.subsystem = tuple(subsystem)

    def sample(self, copies: List[StateVector], rng: np.random.Generator) -> float:
        return float(swap_test_purity(copies[0], copies[1], self.subsystem, rng))

    def exact(self, state: StateVector) -> float:
        reduced = partial_trace(state, self.subsystem).entries
        return float(np.sum(np.abs(reduced) ** 2))


ESTIMATORS: Dict[int, Type] = {2: SwapTestPurity}


def ensemble_average(ensemble: ProjectedEnsemble, estimator) -> float:
    '''sum_m p_m <O>_m by enumeration of the ensemble'''
    return float(sum(e.probability * estimator.exact(e.state) for e in ensemble.entries))


def bias_bound(probabilities: np.ndarray, p_star: float, delta: float) -> float:
    '''2 delta Pr(p_m >= p*) + Pr(p_m < p*)'''
    probabilities = np.asarray(probabilities)
    above = float(np.sum(probabilities[probabilities >= p_star]))
    return 2 * delta * above + (1 - above)


def estimate_nonlinear(state: StateVector, measured_qubits: Sequence[int], estimator,
                       cfg: EstimationConfig) -> EstimationResult:
    '''Monte Carlo estimate of sum_m p_m <O>_m without post-selection'''
    if estimator.k != cfg.k:
        raise ConfigurationError(f"Estimator uses {estimator.k} copies but k={cfg.k} was configured")
    ensemble = project_ensemble(state, measured_qubits)
    probabilities = ensemble.probabilities
    phases: Optional[PhaseSequence] = fpaa_phases(cfg.p_star, cfg.delta) if cfg.delta > 0 else None
    prepared: Dict[int, tuple] = {}

    def prepare(index: int):
        if index not in prepared:
            entry = ensemble.entries[index]
            if phases is None:
                prepared[index] = (entry.state, 1.0)
            else:
                try:
                    prepared[index] = fpaa_from_state(state, entry.projector, cfg.p_star, cfg.delta, phases)
                except DegenerateFlagError:
                    # a vanishing flag probability always fails the flag
                    logger.debug(f"Outcome {entry.outcome} never passes the FPAA flag; counted as failure")
                    prepared[index] = (None, 0.0)
        return prepared[index]

    samples = np.empty(cfg.n_samples)
    attempts = failures = fpaa_calls = 0
    trials = spawn_rngs(cfg.seed, cfg.n_samples)
    for n, rng in enumerate(tqdm(trials, desc="estimation", disable=not cfg.progress)):
        while True:
            attempts += 1
            index = int(rng.choice(len(ensemble), p=probabilities))
            copies = [ensemble.entries[index].state]
            for _ in range(cfg.k - 1):
                fpaa_calls += 1
                prepared_state, flag_probability = prepare(index)
                if rng.random() >= flag_probability:
                    failures += 1
                    break
                copies.append(prepared_state)
            if len(copies) == cfg.k:
                break
        samples[n] = estimator.sample(copies, rng)

    estimate = float(samples.mean())
    stderr = float(samples.std(ddof=1) / math.sqrt(cfg.n_samples)) if cfg.n_samples > 1 else math.inf
    result = EstimationResult(estimate, stderr, failures / fpaa_calls,
                              bias_bound(probabilities, cfg.p_star, cfg.delta), cfg.n_samples, attempts)
    logger.info(f"Estimated {estimate:.5f} +/- {stderr:.5f} over {cfg.n_samples} samples, "
                f"flag failure rate {result.flag_fail_rate:.4f}")
    return result
