'''
Numerical checks of the amplification lower bound, the multiplicative-error
fidelity bounds, the Uhlmann ceiling and the success-probability tail bounds
'''

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from .decoders import aqec_check, injective_part, pseudoinverse_report
from .errors import ConsistencyError, DimensionError, DomainError
from .linalg_core import (
    Operator,
    SeedLike,
    StateVector,
    as_rng,
    fidelity,
    haar_random_unitary,
    partial_trace,
    random_state,
    state_preparation_unitary,
)
from .protocols import (
    BranchSpectrum,
    MixedInstance,
    branch_spectrum,
    haar_isometry_spectrum,
    metrics,
    postselected_joint_state,
    random_mixed_instance,
    uhlmann_from_spectrum,
)
from .svtfun import SVTFunction

logger = logging.getLogger(__name__)

SLACK = 1e-9


@dataclass(frozen=True)
class BoundCheckResult:
    name: str
    bound_value: float
    measured_value: float
    satisfied: bool
    margin: float
    relation: str = '>='
    details: Dict[str, float] = field(default_factory=dict)


def check(name: str, bound: float, measured: float, relation: str = '>=', **details) -> BoundCheckResult:
    '''measured >= bound (lower bounds) or measured <= bound (upper bounds), with slack'''
    if relation == '>=':
        margin = measured - bound
    elif relation == '<=':
        margin = bound - measured
    else:
        raise DomainError(f"Unknown relation '{relation}'")
    return BoundCheckResult(name, float(bound), float(measured), bool(margin >= -SLACK), float(margin),
                            relation, dict(details))


def bound_table(results: Sequence[BoundCheckResult]) -> pd.DataFrame:
    return pd.DataFrame([{'name': r.name, 'relation': r.relation, 'bound': r.bound_value,
                          'measured': r.measured_value, 'margin': r.margin, 'satisfied': r.satisfied}
                         for r in results])


def average_projector(psi: StateVector, p_m: float, d_m: int, dim: int) -> Operator:
    '''((d_m - p_m) I + (D p_m - d_m) |psi><psi|) / (D - 1)'''
    if dim <= 1:
        raise DomainError("The average projector needs D > 1")
    if not 0 < p_m <= 1 or not 1 <= d_m < dim:
        raise DomainError(f"Need 0 < p_m <= 1 and 1 <= d_m < D, got p_m={p_m}, d_m={d_m}, D={dim}")
    if psi.dim != dim:
        raise DimensionError(f"State of dimension {psi.dim} does not match D={dim}")
    matrix = ((d_m - p_m) * np.eye(dim) + (dim * p_m - d_m) * psi.density().entries) / (dim - 1)
    return Operator.square(matrix, psi.dims)


def _base_projector(p_m: float, d_m: int, dim: int) -> np.ndarray:
    '''Rank-d_m projector with <0|Pi|0> = p_m, in the computational basis'''
    if d_m + (1 if p_m < 1 else 0) > dim:
        raise DomainError(f"No rank-{d_m} projector in dimension {dim} has overlap {p_m}")
    basis = np.zeros((dim, d_m), dtype=complex)
    basis[0, 0] = math.sqrt(p_m)
    basis[1, 0] = math.sqrt(1 - p_m)
    for j in range(1, d_m):
        basis[j + 1, j] = 1.0
    return basis @ basis.conj().T


def haar_conjugated_projector_average(psi: StateVector, p_m: float, d_m: int, samples: int,
                                      seed: SeedLike = None) -> Operator:
    '''Monte Carlo mean of W Pi W^dag over W = |psi><psi| + V H V^dag, H Haar on the complement'''
    rng = as_rng(seed)
    dim = psi.dim
    frame = state_preparation_unitary(psi)
    projector = frame @ _base_projector(p_m, d_m, dim) @ frame.conj().T
    complement = frame[:, 1:]
    fixed = np.outer(psi.amplitudes, psi.amplitudes.conj())
    total = np.zeros((dim, dim), dtype=complex)
    for _ in range(samples):
        w = fixed + complement @ haar_random_unitary(dim - 1, rng) @ complement.conj().T
        total += w @ projector @ w.conj().T
    return Operator.square(total / samples, psi.dims)


def grover_iterations(p_m: float, epsilon: float) -> Tuple[int, float]:
    '''Fewest Grover iterations reaching fidelity 1 - epsilon, simulated on the (good, bad) plane'''
    theta = math.asin(math.sqrt(p_m))
    state = np.array([math.sin(theta), math.cos(theta)])
    reflect_good = np.diag([-1.0, 1.0])
    reflect_start = 2 * np.outer(state, state) - np.eye(2)
    step = reflect_start @ reflect_good
    limit = int(math.ceil(math.pi / (4 * theta))) + 2
    current = state.copy()
    best = (0, state[0] ** 2)
    for k in range(limit + 1):
        value = float(current[0] ** 2)
        if value >= 1 - epsilon:
            return k, value
        if value > best[1]:
            best = (k, value)
        current = step @ current
    return best


def grover_scaling_experiment(p_grid: Sequence[float], epsilon: float = 0.01) -> pd.DataFrame:
    rows = []
    for p_m in p_grid:
        k, value = grover_iterations(p_m, epsilon)
        predicted = math.pi / (4 * math.sqrt(p_m))
        rows.append({'p_m': p_m, 'iterations': k, 'fidelity': value, 'predicted': predicted,
                     'relative_deviation': abs(k - predicted) / predicted})
    return pd.DataFrame(rows)


def loglog_slope(table: pd.DataFrame) -> float:
    slope, _ = np.polyfit(np.log(table['p_m']), np.log(table['iterations']), 1)
    return float(slope)


def perturbed_fidelity(weights: np.ndarray, deltas: np.ndarray) -> float:
    '''(1 + D1)^2 / (1 + 2 D1 + D2) with D1 = sum w delta, D2 = sum w delta^2'''
    d1 = float(np.sum(weights * deltas))
    d2 = float(np.sum(weights * deltas ** 2))
    return (1 + d1) ** 2 / (1 + 2 * d1 + d2)


def worst_case_perturbation(weights: np.ndarray, delta_max: float) -> np.ndarray:
    '''Perturbation with D1 = -D2: delta_max on light branches, a balancing constant elsewhere'''
    order = np.argsort(weights)
    cumulative = np.cumsum(weights[order])
    chosen = order[cumulative <= (1 - delta_max) / 2]
    deltas = np.zeros_like(weights)
    if chosen.size == 0 or delta_max == 0:
        return deltas
    mass = float(weights[chosen].sum())
    c = mass * delta_max * (1 + delta_max) / (1 - mass)
    deltas[:] = (-1 + math.sqrt(1 - 4 * c)) / 2
    deltas[chosen] = delta_max
    return deltas


def multiplicative_error_fidelity_check(spectrum: BranchSpectrum, delta_max: float, trials: int,
                                        which: str = 'mixed', seed: SeedLike = None) -> BoundCheckResult:
    '''min F_QSVT over perturbed transformations f(1 + delta(x)), |delta| <= delta_max, against 1 - delta_max^2'''
    if not 0 <= delta_max < 1:
        raise DomainError(f"delta_max must lie in [0, 1), got {delta_max}")
    rng = as_rng(seed)
    spectrum = injective_part(spectrum)
    p = spectrum.p_am
    if which == 'mixed':
        weights = p / p.sum()
        p_star = spectrum.p_max

        def score(deltas):
            return metrics(spectrum, lambda x: x / math.sqrt(p_star) * (1 + deltas)).f_qsvt
    elif which == 'teleport':
        weights = np.full(p.size, 1 / p.size)
        p_star = spectrum.p_min

        def score(deltas):
            return pseudoinverse_report(spectrum, lambda x: math.sqrt(p_star) / x * (1 + deltas)).f_decoding
    else:
        raise DomainError(f"Unknown setting '{which}'")

    worst = worst_case_perturbation(weights, delta_max)
    candidates = [worst]
    for t in range(trials):
        if t % 2:
            candidates.append(delta_max * rng.choice([-1.0, 1.0], size=p.size))
        else:
            candidates.append(rng.uniform(-delta_max, delta_max, size=p.size))
    observed = [score(deltas) for deltas in candidates]
    d2 = float(np.sum(weights * worst ** 2))
    return check(f"multiplicative_error_{which}", 1 - delta_max ** 2, min(observed), '>=',
                 worst_case_fidelity=observed[0], worst_case_prediction=1 - d2,
                 closed_form_fidelity=perturbed_fidelity(weights, worst))


def tail_bound_check(spectrum: BranchSpectrum, epsilon: float, which: str = 'mixed') -> BoundCheckResult:
    '''Largest admissible alpha from the sorted spectrum, then p_QSVT >= (1 - epsilon) alpha'''
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    p = spectrum.p_am
    p_m = spectrum.p_m
    if which == 'mixed':
        descending = np.sort(p)[::-1]
        budget = epsilon * spectrum.d_r * p_m
        k = int(np.sum(np.cumsum(descending) <= budget + 1e-15))
        threshold = descending[k] if k < descending.size else 0.0
        if threshold <= p_m:
            alpha, p_star = 1.0, p_m
        else:
            alpha, p_star = p_m / threshold, float(threshold)
        measured = metrics(spectrum, SVTFunction('linear_cut', min(p_star, 1.0))).p_qsvt
    elif which == 'teleport':
        ascending = np.sort(p)
        allowed = int(math.floor(epsilon * spectrum.d_r + 1e-12))
        p_star = float(ascending[allowed])
        alpha = p_star / p_m
        if p_star <= 0:
            return check(f"tail_bound_{which}", 0.0, 0.0, '>=', alpha=0.0, p_star=0.0)
        measured = pseudoinverse_report(injective_part(spectrum), SVTFunction('inverse_cut', min(p_star, 1.0))).p_succ
    else:
        raise DomainError(f"Unknown setting '{which}'")
    return check(f"tail_bound_{which}", (1 - epsilon) * alpha, measured, '>=', alpha=alpha, p_star=p_star)


def tail_condition_holds(spectrum: BranchSpectrum, epsilon: float, alpha: float, which: str = 'mixed') -> bool:
    '''The hypothesis of the tail bound at a given alpha'''
    p = spectrum.p_am
    if which == 'mixed':
        return float(np.sum(p[p > spectrum.p_m / alpha]) / (spectrum.d_r * spectrum.p_m)) <= epsilon
    return float(np.mean(p < alpha * spectrum.p_m)) <= epsilon


def aqec_bound_check(spectrum: BranchSpectrum, epsilon: float, epsilon_prime: float) -> BoundCheckResult:
    '''(1 - eps'/eps)(1 - eps) <= p_QSVT whenever the AQEC condition holds'''
    result = aqec_check(spectrum, epsilon, epsilon_prime)
    measured = result.p_qsvt_measured if result.satisfied else result.p_qsvt_bound
    return check("aqec_success_bound", result.p_qsvt_bound, measured, '>=', alpha=result.alpha,
                 measured_epsilon_prime=result.measured_epsilon_prime, aqec_condition=float(result.satisfied))


def uhlmann_oracle(instance: MixedInstance) -> float:
    '''F(I_R / d_R, Psi_R|m) from reduced density matrices, cross-checked against the spectrum formula'''
    joint = postselected_joint_state(instance)
    reduced = partial_trace(joint, [0])
    d_r = instance.d_r
    direct = fidelity(Operator.square(np.eye(d_r) / d_r, (d_r,)), reduced)
    closed_form = uhlmann_from_spectrum(branch_spectrum(instance))
    if abs(direct - closed_form) > SLACK:
        raise ConsistencyError(f"Uhlmann fidelity {direct} disagrees with spectrum formula {closed_form}")
    return direct


def random_spectrum(rng: np.random.Generator, aqec_noise: float = 0.0) -> BranchSpectrum:
    '''Haar branch spectrum of a small random instance, or a near-uniform one when aqec_noise > 0'''
    if aqec_noise > 0:
        d_r = int(rng.integers(3, 17))
        values = np.clip(0.2 * (1 + aqec_noise * rng.uniform(-1, 1, size=d_r)), 1e-6, 1.0)
        return BranchSpectrum.from_values(values)
    n_mixed = int(rng.integers(1, 4))
    n_measured = int(rng.integers(1, 3))
    return haar_isometry_spectrum(n_mixed + 4, n_mixed, n_measured, rng)


def _worst(results: List[BoundCheckResult], name: str) -> BoundCheckResult:
    worst = min(results, key=lambda r: r.margin)
    return BoundCheckResult(f"{name} (worst of {len(results)})", worst.bound_value, worst.measured_value,
                            all(r.satisfied for r in results), worst.margin, worst.relation, worst.details)


def run_bound_suite(seed: SeedLike = 0, n_spectra: int = 100, trials: int = 1000,
                    mc_samples: int = 10_000) -> List[BoundCheckResult]:
    '''Default randomized suite; every result must be satisfied'''
    rng = as_rng(seed)
    results: List[BoundCheckResult] = []

    psi = random_state((8,), rng)
    exact = average_projector(psi, 0.3, 2, 8)
    sampled = haar_conjugated_projector_average(psi, 0.3, 2, mc_samples, rng)
    results.append(check("average_projector_monte_carlo", 5 / math.sqrt(mc_samples),
                         np.max(np.abs(exact.entries - sampled.entries)), '<='))
    results.append(check("average_projector_trace", 0.0, abs(exact.trace().real - 2), '<='))

    table = grover_scaling_experiment(np.logspace(-4, -2, 9))
    results.append(check("grover_loglog_slope", 0.05, abs(loglog_slope(table) + 0.5), '<=',
                         slope=loglog_slope(table)))
    results.append(check("grover_small_angle_fit", 0.2, float(table['relative_deviation'].max()), '<='))

    for which in ('mixed', 'teleport'):
        runs = [multiplicative_error_fidelity_check(random_spectrum(rng), 0.1, trials // 10, which, rng)
                for _ in range(10)]
        results.append(_worst(runs, f"multiplicative_error_{which}"))
        equality = [abs(r.details['worst_case_fidelity'] - r.details['worst_case_prediction']) for r in runs]
        results.append(check(f"worst_case_equality_{which}", 1e-12, max(equality), '<='))

    for which in ('mixed', 'teleport'):
        runs = [tail_bound_check(random_spectrum(rng), float(rng.uniform(0.05, 0.9)), which)
                for _ in range(n_spectra)]
        results.append(_worst(runs, f"tail_bound_{which}"))

    aqec_runs = []
    for _ in range(n_spectra):
        spectrum = random_spectrum(rng, aqec_noise=float(rng.uniform(0.01, 0.5)))
        measured = float(np.sum(np.abs(spectrum.p_am / spectrum.p_m - 1)) / (2 * spectrum.d_r))
        aqec_runs.append(aqec_bound_check(spectrum, min(0.99, measured * float(rng.uniform(1.5, 5))), measured))
    results.append(_worst(aqec_runs, "aqec_success_bound"))

    instance = random_mixed_instance(5, 2, 2, rng)
    oracle = uhlmann_oracle(instance)
    results.append(check("uhlmann_dual_path", 1.0, oracle, '<='))
    spectrum = branch_spectrum(instance)
    for p_star in (spectrum.p_max, spectrum.p_m, 1.0):
        report = metrics(spectrum, SVTFunction('linear_amp', min(p_star, 1.0)))
        results.append(check(f"uhlmann_dominance_p{p_star:.3g}", oracle, report.f_overall, '<='))

    failed = [r.name for r in results if not r.satisfied]
    if failed:
        logger.warning(f"Bound suite violations: {failed}")
    logger.info(f"Bound suite: {len(results) - len(failed)}/{len(results)} checks satisfied")
    return results
