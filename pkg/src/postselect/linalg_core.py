'''
Dense complex linear algebra and quantum-information primitives
'''

import logging
import math
from dataclasses import dataclass
from functools import cached_property, reduce
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DimensionError, DomainError, ResourceError

logger = logging.getLogger(__name__)

SeedLike = Union[None, int, np.random.SeedSequence, np.random.Generator]


@dataclass(frozen=True)
class NumericPolicy:
    '''Tolerances used across the package'''
    structural_tol: float = 1e-10
    statistical_tol: float = 1e-9
    normalization_tol: float = 1e-12
    eigen_clamp: float = 1e-12
    psd_tol: float = 1e-9
    zero_probability: float = 1e-14
    max_operator_dim: int = 2 ** 12
    max_vector_dim: int = 2 ** 16


DEFAULT_POLICY = NumericPolicy()


def _dims_tuple(dims: Iterable[int]) -> Tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise DimensionError(f"Subsystem dimensions must be positive, got {dims}")
    return dims


def check_envelope(dim: int, kind: str = "operator", policy: NumericPolicy = DEFAULT_POLICY):
    '''Raise ResourceError when a dense object would exceed the simulation envelope'''
    limit = policy.max_operator_dim if kind == "operator" else policy.max_vector_dim
    if dim > limit:
        raise ResourceError(f"Dense {kind} of dimension {dim} exceeds envelope {limit}")


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    dims: Tuple[int, ...]

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        dims = _dims_tuple(self.dims)
        if math.prod(dims) != amps.size:
            raise DimensionError(f"dims {dims} do not match {amps.size} amplitudes")
        norm_sq = float(np.vdot(amps, amps).real)
        if abs(norm_sq - 1.0) > DEFAULT_POLICY.normalization_tol:
            raise DomainError(f"State not normalized: squared norm {norm_sq}")
        amps.flags.writeable = False
        object.__setattr__(self, 'amplitudes', amps)
        object.__setattr__(self, 'dims', dims)

    @classmethod
    def from_unnormalized(cls, vector: np.ndarray, dims: Sequence[int]) -> Tuple['StateVector', float]:
        '''Normalize a raw vector; returns the state and the squared norm it had'''
        vector = np.asarray(vector, dtype=complex).reshape(-1)
        norm_sq = float(np.vdot(vector, vector).real)
        if norm_sq < DEFAULT_POLICY.zero_probability:
            raise DomainError(f"Cannot normalize vector with squared norm {norm_sq:.3e}")
        return cls(vector / math.sqrt(norm_sq), dims), norm_sq

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> 'Operator':
        return Operator(np.outer(self.amplitudes, self.amplitudes.conj()), self.dims, self.dims)

    def overlap(self, other: 'StateVector') -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class Operator:
    entries: np.ndarray
    row_dims: Tuple[int, ...]
    col_dims: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.ndim != 2:
            raise DimensionError(f"Operator entries must be a matrix, got ndim={entries.ndim}")
        row_dims = _dims_tuple(self.row_dims)
        col_dims = row_dims if self.col_dims is None else _dims_tuple(self.col_dims)
        if entries.shape != (math.prod(row_dims), math.prod(col_dims)):
            raise DimensionError(
                f"Shape {entries.shape} inconsistent with dims {row_dims} x {col_dims}")
        entries.flags.writeable = False
        object.__setattr__(self, 'entries', entries)
        object.__setattr__(self, 'row_dims', row_dims)
        object.__setattr__(self, 'col_dims', col_dims)

    @classmethod
    def square(cls, matrix: np.ndarray, dims: Sequence[int]) -> 'Operator':
        return cls(matrix, tuple(dims), tuple(dims))

    @property
    def dims(self) -> Tuple[int, ...]:
        if self.row_dims != self.col_dims:
            raise DimensionError("Operator is not square in its tensor factorization")
        return self.row_dims

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape

    def dag(self) -> 'Operator':
        return Operator(self.entries.conj().T, self.col_dims, self.row_dims)

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def is_unitary(self, tol: float = DEFAULT_POLICY.structural_tol) -> bool:
        if self.shape[0] != self.shape[1]:
            return False
        gram = self.entries.conj().T @ self.entries
        return bool(np.max(np.abs(gram - np.eye(self.shape[0]))) <= tol)


class Projector:
    '''Orthogonal projector stored through an orthonormal basis of its range'''

    def __init__(self, basis: np.ndarray, dims: Sequence[int],
                 indices: Optional[np.ndarray] = None, validate: bool = True):
        basis = np.array(basis, dtype=complex)
        if basis.ndim == 1:
            basis = basis.reshape(-1, 1)
        self.dims = _dims_tuple(dims)
        if basis.shape[0] != math.prod(self.dims):
            raise DimensionError(f"Basis rows {basis.shape[0]} do not match dims {self.dims}")
        if validate and basis.shape[1]:
            gram = basis.conj().T @ basis
            deviation = np.max(np.abs(gram - np.eye(basis.shape[1])))
            if deviation > DEFAULT_POLICY.structural_tol:
                raise DomainError(f"Projector basis not orthonormal (deviation {deviation:.2e})")
        basis.flags.writeable = False
        self.basis = basis
        self.indices = None if indices is None else np.asarray(indices, dtype=int)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, dims: Sequence[int]) -> 'Projector':
        '''Validate a dense projector matrix and extract its range'''
        matrix = np.asarray(matrix, dtype=complex)
        if np.max(np.abs(matrix - matrix.conj().T)) > DEFAULT_POLICY.structural_tol:
            raise DomainError("Projector is not Hermitian")
        if np.max(np.abs(matrix @ matrix - matrix)) > DEFAULT_POLICY.structural_tol:
            raise DomainError("Projector is not idempotent")
        values, vectors = np.linalg.eigh(matrix)
        basis = vectors[:, values > 0.5]
        if abs(np.trace(matrix).real - basis.shape[1]) > DEFAULT_POLICY.statistical_tol:
            raise DomainError("Projector trace differs from its rank")
        return cls(basis, dims)

    @classmethod
    def from_indices(cls, indices: Sequence[int], dims: Sequence[int]) -> 'Projector':
        '''Projector onto a set of computational basis vectors, kept in the given order'''
        dims = _dims_tuple(dims)
        total = math.prod(dims)
        indices = np.asarray(indices, dtype=int)
        if indices.size and (indices.min() < 0 or indices.max() >= total):
            raise DimensionError(f"Basis indices out of range for dims {dims}")
        basis = np.zeros((total, indices.size), dtype=complex)
        basis[indices, np.arange(indices.size)] = 1.0
        return cls(basis, dims, indices=indices, validate=False)

    @classmethod
    def computational(cls, dims: Sequence[int], fixed: Dict[int, int]) -> 'Projector':
        '''Projector fixing selected subsystems to computational basis values'''
        dims = _dims_tuple(dims)
        for sub, value in fixed.items():
            if not 0 <= sub < len(dims) or not 0 <= value < dims[sub]:
                raise DimensionError(f"Invalid fixed value {value} on subsystem {sub} of {dims}")
        total = math.prod(dims)
        digits = np.unravel_index(np.arange(total), dims)
        mask = np.ones(total, dtype=bool)
        for sub, value in fixed.items():
            mask &= digits[sub] == value
        return cls.from_indices(np.nonzero(mask)[0], dims)

    @classmethod
    def identity(cls, dims: Sequence[int]) -> 'Projector':
        return cls.computational(dims, {})

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @cached_property
    def operator(self) -> Operator:
        return Operator.square(self.basis @ self.basis.conj().T, self.dims)

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.asarray(vectors, dtype=complex)
        if self.indices is not None:
            out = np.zeros_like(vectors)
            out[self.indices] = vectors[self.indices]
            return out
        return self.basis @ (self.basis.conj().T @ vectors)


@dataclass(frozen=True, eq=False)
class SVDResult:
    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.conj().T


def svd(matrix: Union[np.ndarray, Operator], policy: NumericPolicy = DEFAULT_POLICY) -> SVDResult:
    '''Thin SVD with descending singular values and a reconstruction check'''
    matrix = matrix.entries if isinstance(matrix, Operator) else np.asarray(matrix, dtype=complex)
    u, s, vh = np.linalg.svd(matrix, full_matrices=False)
    result = SVDResult(s, u, vh.conj().T)
    error = np.max(np.abs(result.reconstruct() - matrix)) if matrix.size else 0.0
    if error > policy.structural_tol * max(1.0, float(np.max(np.abs(matrix), initial=0.0))):
        logger.warning(f"SVD reconstruction error {error:.2e} above tolerance")
    return result


def partial_trace(state: Union[StateVector, Operator], keep: Iterable[int]) -> Operator:
    '''Reduced density operator on the subsystems listed in keep'''
    keep = sorted(set(int(k) for k in keep))
    dims = state.dims
    n = len(dims)
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep={keep} invalid for {n} subsystems")
    traced = [i for i in range(n) if i not in keep]
    kept_dims = tuple(dims[k] for k in keep)
    dk = math.prod(kept_dims)

    if isinstance(state, StateVector):
        psi = state.amplitudes.reshape(dims)
        psi = np.transpose(psi, keep + traced).reshape(dk, -1)
        reduced = psi @ psi.conj().T
    else:
        tensor = state.entries.reshape(dims + dims)
        rows = list(range(n))
        cols = list(range(n, 2 * n))
        for i in traced:
            cols[i] = rows[i]
        out = [rows[k] for k in keep] + [cols[k] for k in keep]
        reduced = np.einsum(tensor, rows + cols, out)
    return Operator(reduced.reshape(dk, dk), kept_dims, kept_dims)


def _density_matrix(rho: Union[StateVector, Operator, np.ndarray], policy: NumericPolicy) -> np.ndarray:
    if isinstance(rho, StateVector):
        return rho.density().entries
    matrix = rho.entries if isinstance(rho, Operator) else np.asarray(rho, dtype=complex)
    if np.max(np.abs(matrix - matrix.conj().T)) > policy.psd_tol:
        raise DomainError("Density operator is not Hermitian")
    if np.linalg.eigvalsh(matrix).min() < -policy.psd_tol:
        raise DomainError("Density operator is not positive semidefinite")
    if abs(np.trace(matrix).real - 1.0) > policy.psd_tol:
        raise DomainError(f"Density operator trace {np.trace(matrix).real} is not 1")
    return matrix


def psd_sqrt(matrix: np.ndarray, policy: NumericPolicy = DEFAULT_POLICY) -> np.ndarray:
    '''Square root of a Hermitian PSD matrix with small eigenvalues clamped to zero'''
    values, vectors = np.linalg.eigh(matrix)
    values = np.where(values > policy.eigen_clamp, values, 0.0)
    return (vectors * np.sqrt(values)) @ vectors.conj().T


def fidelity(rho, sigma, policy: NumericPolicy = DEFAULT_POLICY) -> float:
    '''Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2'''
    if isinstance(rho, StateVector) or isinstance(sigma, StateVector):
        pure, other = (rho, sigma) if isinstance(rho, StateVector) else (sigma, rho)
        other = _density_matrix(other, policy)
        if other.shape[0] != pure.dim:
            raise DimensionError("fidelity arguments have different dimensions")
        value = float(np.vdot(pure.amplitudes, other @ pure.amplitudes).real)
        return min(max(value, 0.0), 1.0)

    a = _density_matrix(rho, policy)
    b = _density_matrix(sigma, policy)
    if a.shape != b.shape:
        raise DimensionError("fidelity arguments have different dimensions")
    root = psd_sqrt(a, policy)
    inner = root @ b @ root
    values = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    values = np.where(values > policy.eigen_clamp, values, 0.0)
    value = float(np.sum(np.sqrt(values)) ** 2)
    return min(max(value, 0.0), 1.0)


def purity_renyi2(rho: Union[StateVector, Operator, np.ndarray]) -> Tuple[float, float]:
    '''(tr rho^2, -log tr rho^2)'''
    matrix = _density_matrix(rho, DEFAULT_POLICY)
    purity = float(np.sum(np.abs(matrix) ** 2))
    return purity, -math.log(purity)


def as_rng(seed: SeedLike = None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_rngs(seed: SeedLike, count: int) -> List[np.random.Generator]:
    '''Independent child generators derived from one seed'''
    if isinstance(seed, np.random.Generator):
        children = seed.integers(0, 2 ** 63 - 1, size=count)
        return [np.random.default_rng(int(c)) for c in children]
    sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in sequence.spawn(count)]


def haar_random_isometry(rows: int, cols: int, seed: SeedLike = None) -> Operator:
    '''First cols columns of a Haar unitary, via QR of a complex Gaussian matrix'''
    if cols > rows:
        raise DimensionError(f"Isometry needs cols <= rows, got {cols} > {rows}")
    check_envelope(rows, "vector")
    rng = as_rng(seed)
    z = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    diagonal = np.diag(r)
    q = q * (diagonal / np.abs(diagonal))
    return Operator(q, (rows,), (cols,))


def haar_random_unitary(dim: int, seed: SeedLike = None) -> np.ndarray:
    return haar_random_isometry(dim, dim, seed).entries


def random_state(dims: Sequence[int], seed: SeedLike = None) -> StateVector:
    '''Haar-random pure state'''
    total = math.prod(dims)
    return StateVector(haar_random_isometry(total, 1, seed).entries[:, 0], dims)


def epr_state(d: int) -> StateVector:
    if d < 1:
        raise DomainError("EPR dimension must be at least 1")
    amplitudes = np.zeros(d * d, dtype=complex)
    amplitudes[np.arange(d) * (d + 1)] = 1 / math.sqrt(d)
    return StateVector(amplitudes, (d, d))


def basis_state(index: int, dim: int) -> np.ndarray:
    vector = np.zeros(dim, dtype=complex)
    vector[index] = 1.0
    return vector


def kron_all(*matrices: np.ndarray) -> np.ndarray:
    return reduce(np.kron, matrices, np.ones((1, 1), dtype=complex))


def apply_local(op: np.ndarray, targets: Sequence[int], dims: Sequence[int],
                vectors: np.ndarray) -> np.ndarray:
    '''Apply op on the target subsystems to every column of vectors'''
    dims = list(dims)
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets) or any(t < 0 or t >= len(dims) for t in targets):
        raise DimensionError(f"Invalid targets {targets} for dims {dims}")
    target_dims = [dims[t] for t in targets]
    local = math.prod(target_dims)
    op = np.asarray(op, dtype=complex)
    if op.shape != (local, local):
        raise DimensionError(f"Gate shape {op.shape} does not act on dims {target_dims}")

    vectors = np.asarray(vectors, dtype=complex)
    single = vectors.ndim == 1
    columns = vectors.reshape(math.prod(dims), -1)
    k = len(targets)
    tensor = columns.reshape(dims + [columns.shape[1]])
    tensor = np.tensordot(op.reshape(target_dims + target_dims), tensor,
                          axes=(list(range(k, 2 * k)), targets))
    remaining = [i for i in range(len(dims)) if i not in targets] + [len(dims)]
    tensor = np.moveaxis(tensor, list(range(len(dims) + 1)), targets + remaining)
    result = tensor.reshape(columns.shape)
    return result[:, 0] if single else result


def embed_operator(op: np.ndarray, targets: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    '''Full matrix of a local gate'''
    total = math.prod(dims)
    check_envelope(total)
    return apply_local(op, targets, dims, np.eye(total, dtype=complex))


def state_preparation_unitary(psi: Union[StateVector, np.ndarray]) -> np.ndarray:
    '''Householder unitary whose first column is psi'''
    psi = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    dim = psi.size
    phase = psi[0] / abs(psi[0]) if abs(psi[0]) > DEFAULT_POLICY.zero_probability else 1.0
    w = phase * basis_state(0, dim) - psi
    norm_sq = float(np.vdot(w, w).real)
    if norm_sq < DEFAULT_POLICY.zero_probability:
        return phase * np.eye(dim, dtype=complex)
    householder = np.eye(dim, dtype=complex) - 2 * np.outer(w, w.conj()) / norm_sq
    return phase * householder


def qubit_dims(n: int) -> Tuple[int, ...]:
    return (2,) * n
