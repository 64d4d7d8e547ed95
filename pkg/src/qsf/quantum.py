"""Quantum-circuit semantics on dense state vectors and density matrices.

Gates act by matrix multiplication, observables are Hermitian matrices in
spectral form, and projective measurement follows the Born rule with
inverse-CDF sampling from the exact outcome distribution (one uniform draw
per shot, so runs are reproducible from a single seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from . import linalg

__all__ = [
    "CNOT",
    "DensityMatrix",
    "HADAMARD",
    "I2",
    "Observable",
    "ParamCircuit",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "StateVector",
    "VqaResult",
    "apply_gate",
    "bloch_coordinates",
    "build_qft",
    "computational_observable",
    "estimate_expectation",
    "expectation",
    "ket",
    "measure_projective",
    "partial_trace",
    "purity",
    "trotter_evolve",
    "vqa_objective",
    "vqa_optimize",
]

I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def ket(bits: str) -> np.ndarray:
    """Computational basis vector for a bit string, e.g. ket("01") -> |01>."""
    if not bits or any(b not in "01" for b in bits):
        raise ValueError(f"not a bit string: {bits!r}")
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


@dataclass(frozen=True)
class StateVector:
    """Pure n-qubit state: a unit vector in C^(2^n)."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        object.__setattr__(self, "amplitudes", amps)
        if amps.size != 2 ** self.n_qubits:
            raise ValueError(
                f"expected {2 ** self.n_qubits} amplitudes, got {amps.size}"
            )
        if abs(np.linalg.norm(amps) - 1.0) > 1e-10:
            raise ValueError("state vector is not normalized")

    @classmethod
    def from_bits(cls, bits: str) -> "StateVector":
        return cls(len(bits), ket(bits))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> "DensityMatrix":
        return DensityMatrix(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed n-qubit state: Hermitian, PSD, trace-one matrix."""

    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        n = 2 ** self.n_qubits
        if m.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix, got {m.shape}")
        if not linalg.is_hermitian(m):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-10:
            raise ValueError("density matrix trace is not one")
        evals = np.linalg.eigvalsh(m)
        if evals[0] < -1e-10:
            raise ValueError(f"density matrix has a negative eigenvalue {evals[0]:.3e}")
        pur = float(np.real(np.trace(m @ m)))
        if not (1.0 / n - 1e-10 <= pur <= 1.0 + 1e-10):
            raise ValueError(f"purity {pur} outside [1/2^n, 1]")

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        n = 2 ** n_qubits
        return cls(n_qubits, np.eye(n, dtype=complex) / n)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Observable:
    """Hermitian observable together with its spectral decomposition.

    ``spectral`` is a tuple of (eigenvalue, projector) pairs; eigenvalues
    closer than the clustering tolerance are merged into one eigenspace.
    """

    matrix: np.ndarray
    spectral: tuple = field(default=())

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if not linalg.is_hermitian(m):
            raise ValueError("observable is not Hermitian")
        if not self.spectral:
            object.__setattr__(self, "spectral", self._decompose(m))
        self._validate()

    @staticmethod
    def _decompose(m: np.ndarray, cluster_tol: float = 1e-8) -> tuple:
        w, v = np.linalg.eigh(m)
        scale = max(float(np.max(np.abs(w))), 1.0)
        pairs = []
        start = 0
        for i in range(1, len(w) + 1):
            if i == len(w) or w[i] - w[i - 1] > cluster_tol * scale:
                block = v[:, start:i]
                proj = block @ block.conj().T
                pairs.append((float(np.mean(w[start:i])), proj))
                start = i
        return tuple(pairs)

    def _validate(self):
        n = self.matrix.shape[0]
        total = sum(p for _, p in self.spectral)
        if linalg.frob(total - np.eye(n)) > 1e-9 * np.sqrt(n):
            raise ValueError("spectral projectors do not resolve the identity")
        recon = sum(lam * p for lam, p in self.spectral)
        scale = max(linalg.frob(self.matrix), 1.0)
        if linalg.frob(recon - self.matrix) > 1e-9 * scale:
            raise ValueError("spectral form does not reconstruct the observable")
        if n <= 64:  # pairwise orthogonality is O(k^2 n^3); skip at scale
            for i, (_, p) in enumerate(self.spectral):
                for j, (_, q) in enumerate(self.spectral):
                    ref = p if i == j else 0.0
                    if linalg.frob(p @ q - ref) > 1e-9 * np.sqrt(n):
                        raise ValueError("spectral projectors are not orthogonal")

    @classmethod
    def from_matrix(cls, m: np.ndarray, cluster_tol: float = 1e-8) -> "Observable":
        m = np.asarray(m, dtype=complex)
        return cls(m, cls._decompose(m, cluster_tol))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def computational_observable(n_qubits: int) -> Observable:
    """Joint computational-basis measurement: 2^n rank-one projectors.

    Eigenvalue k labels basis state |k>, so outcomes map directly onto bit
    strings; measuring every qubit in Z yields the same statistics.
    """
    n = 2 ** n_qubits
    m = np.diag(np.arange(n, dtype=float)).astype(complex)
    spectral = tuple(
        (float(k), np.outer(ket(format(k, f"0{n_qubits}b")), ket(format(k, f"0{n_qubits}b")).conj()))
        for k in range(n)
    )
    return Observable(m, spectral)


# ---------------------------------------------------------------------------
# gates and expectations
# ---------------------------------------------------------------------------

def apply_gate(u: np.ndarray, state: StateVector | DensityMatrix):
    """Apply a unitary: U|psi> for state vectors, U rho U^dag for densities."""
    u = np.asarray(u, dtype=complex)
    if not linalg.is_unitary(u):
        raise ValueError("gate matrix is not unitary")
    if isinstance(state, StateVector):
        if u.shape[0] != state.dim:
            raise ValueError("gate and state dimensions differ")
        return StateVector(state.n_qubits, u @ state.amplitudes)
    if u.shape[0] != state.dim:
        raise ValueError("gate and state dimensions differ")
    return DensityMatrix(state.n_qubits, u @ state.matrix @ u.conj().T)


def expectation(state: StateVector | DensityMatrix, obs: Observable) -> float:
    """<psi|M|psi> for pure states, tr(M rho) for densities."""
    if isinstance(state, StateVector):
        if obs.dim != state.dim:
            raise ValueError("observable and state dimensions differ")
        val = complex(np.vdot(state.amplitudes, obs.matrix @ state.amplitudes))
    else:
        if obs.dim != state.dim:
            raise ValueError("observable and state dimensions differ")
        val = complex(np.trace(obs.matrix @ state.matrix))
    if abs(val.imag) > 1e-10 * max(1.0, abs(val)):
        raise AssertionError(f"expectation has imaginary residue {val.imag:.3e}")
    return float(val.real)


def _outcome_probabilities(state, obs: Observable) -> np.ndarray:
    if isinstance(state, StateVector):
        probs = [
            float(np.real(np.vdot(state.amplitudes, p @ state.amplitudes)))
            for _, p in obs.spectral
        ]
    else:
        probs = [float(np.real(np.trace(p @ state.matrix))) for _, p in obs.spectral]
    probs = np.clip(np.asarray(probs), 0.0, None)
    total = probs.sum()
    if total < 1e-12:
        raise ValueError("all outcome probabilities vanish; invalid state")
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"outcome probabilities sum to {total}, not 1")
    return probs / total


def measure_projective(
    state: StateVector | DensityMatrix, obs: Observable, rng_seed: int
):
    """One projective measurement: (outcome, collapsed state), seeded."""
    probs = _outcome_probabilities(state, obs)
    rng = np.random.default_rng(rng_seed)
    idx = int(np.searchsorted(np.cumsum(probs), rng.uniform()))
    idx = min(idx, len(probs) - 1)
    lam, proj = obs.spectral[idx]
    if isinstance(state, StateVector):
        post = proj @ state.amplitudes
        post = post / np.linalg.norm(post)
        return lam, StateVector(state.n_qubits, post)
    post_m = proj @ state.matrix @ proj
    post_m = post_m / np.real(np.trace(post_m))
    return lam, DensityMatrix(state.n_qubits, post_m)


def estimate_expectation(
    state: StateVector | DensityMatrix, obs: Observable, shots: int, rng_seed: int
) -> tuple[float, float]:
    """Shot-based estimate of <M>: (sum_i lambda_i T_i / T, sample stderr).

    Each shot re-prepares the state (fresh-copies semantics); outcomes are
    drawn by inverse CDF over the exact distribution, one uniform per shot.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = _outcome_probabilities(state, obs)
    lams = np.array([lam for lam, _ in obs.spectral])
    rng = np.random.default_rng(rng_seed)
    draws = rng.uniform(size=shots)
    idx = np.minimum(np.searchsorted(np.cumsum(probs), draws), len(probs) - 1)
    values = lams[idx]
    estimate = float(values.mean())
    stderr = float(values.std(ddof=1) / np.sqrt(shots)) if shots > 1 else 0.0
    return estimate, stderr


def outcome_histogram(
    state, obs: Observable, shots: int, rng_seed: int
) -> dict[float, int]:
    """Seeded shot histogram over the observable's eigenvalues."""
    probs = _outcome_probabilities(state, obs)
    lams = [lam for lam, _ in obs.spectral]
    rng = np.random.default_rng(rng_seed)
    draws = rng.uniform(size=shots)
    idx = np.minimum(np.searchsorted(np.cumsum(probs), draws), len(probs) - 1)
    counts = np.bincount(idx, minlength=len(lams))
    return {lams[i]: int(counts[i]) for i in range(len(lams))}


# ---------------------------------------------------------------------------
# circuits
# ---------------------------------------------------------------------------

def build_qft(n_qubits: int) -> np.ndarray:
    """Dense QFT matrix: |k> -> 2^(-n/2) sum_j exp(2 pi i jk/2^n) |j>."""
    if not 1 <= n_qubits <= 10:
        raise ValueError("n_qubits must be between 1 and 10")
    n = 2 ** n_qubits
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.exp(2j * np.pi * j * k / n) / np.sqrt(n)


def trotter_evolve(
    terms: list[np.ndarray], t: float, steps: int, state: StateVector
) -> StateVector:
    """First-order Lie-Trotter evolution: (prod_k exp(-i H_k t/steps))^steps."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    for h in terms:
        if not linalg.is_hermitian(h):
            raise ValueError("all Trotter terms must be Hermitian")
    step_u = reduce(lambda acc, h: acc @ linalg.matexp(-1j * h * (t / steps)), terms,
                    np.eye(state.dim, dtype=complex))
    amps = state.amplitudes
    for _ in range(steps):
        amps = step_u @ amps
    return StateVector(state.n_qubits, amps / np.linalg.norm(amps))


@dataclass(frozen=True)
class ParamCircuit:
    """Parameterized circuit U(theta) = exp(-i theta_1 H_1) ... exp(-i theta_N H_N)
    applied to a fixed initial state and read out through one observable."""

    generators: tuple
    initial_state: StateVector
    observable: Observable

    def __post_init__(self):
        gens = tuple(np.asarray(g, dtype=complex) for g in self.generators)
        object.__setattr__(self, "generators", gens)
        for g in gens:
            if not linalg.is_hermitian(g):
                raise ValueError("circuit generators must be Hermitian")
            if g.shape[0] != self.initial_state.dim:
                raise ValueError("generator dimension does not match the state")
        if self.observable.dim != self.initial_state.dim:
            raise ValueError("observable dimension does not match the state")

    def unitary(self, theta: np.ndarray) -> np.ndarray:
        u = np.eye(self.initial_state.dim, dtype=complex)
        for th, h in zip(theta, self.generators):
            u = u @ linalg.matexp(-1j * th * h)
        return u


def vqa_objective(circuit: ParamCircuit, theta) -> float:
    """f(theta) = <psi0| U(theta)^dag M U(theta) |psi0>."""
    theta = np.asarray(theta, dtype=float)
    if theta.size != len(circuit.generators):
        raise ValueError(
            f"expected {len(circuit.generators)} parameters, got {theta.size}"
        )
    psi = circuit.unitary(theta) @ circuit.initial_state.amplitudes
    val = complex(np.vdot(psi, circuit.observable.matrix @ psi))
    return float(val.real)


@dataclass
class VqaResult:
    theta: np.ndarray
    trace: list[float]
    step_too_large: bool


def _fd_gradient(f, theta: np.ndarray, h: float) -> np.ndarray:
    g = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


def vqa_optimize(
    circuit: ParamCircuit, theta0, step: float, iters: int, fd_spacing: float = 1e-5
) -> VqaResult:
    """Plain gradient descent on the circuit objective.

    Central finite-difference gradients; the run is flagged step-too-large
    if the objective ever increases after the first iteration.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    theta = np.asarray(theta0, dtype=float).copy()
    f = lambda th: vqa_objective(circuit, th)
    trace = [f(theta)]
    step_too_large = False
    for _ in range(iters):
        theta = theta - step * _fd_gradient(f, theta, fd_spacing)
        val = f(theta)
        if len(trace) > 1 and val > trace[-1] + 1e-12:
            step_too_large = True
        trace.append(val)
    return VqaResult(theta=theta, trace=trace, step_too_large=step_too_large)


# ---------------------------------------------------------------------------
# density-matrix utilities
# ---------------------------------------------------------------------------

def purity(rho: DensityMatrix) -> float:
    """tr(rho^2): 1 for pure states, 1/2^n for the maximally mixed state."""
    return float(np.real(np.trace(rho.matrix @ rho.matrix)))


def bloch_coordinates(rho: DensityMatrix) -> tuple[float, float, float]:
    """Bloch vector (tr(X rho), tr(Y rho), tr(Z rho)) of a single qubit."""
    if rho.n_qubits != 1:
        raise ValueError("Bloch coordinates are defined for single qubits only")
    coords = tuple(
        float(np.real(np.trace(p @ rho.matrix))) for p in (PAULI_X, PAULI_Y, PAULI_Z)
    )
    if np.linalg.norm(coords) > 1.0 + 1e-9:
        raise AssertionError("Bloch vector left the unit ball")
    return coords


def partial_trace(rho: DensityMatrix, keep: list[int]) -> DensityMatrix:
    """Trace out all qubits not in ``keep`` (qubit 0 is the leftmost factor)."""
    n = rho.n_qubits
    keep = sorted(keep)
    if any(q < 0 or q >= n for q in keep):
        raise ValueError("qubit index out of range")
    tensor = rho.matrix.reshape([2] * (2 * n))
    drop = [q for q in range(n) if q not in keep]
    for offset, q in enumerate(drop):
        ax = q - offset
        cur = tensor.ndim // 2
        tensor = np.trace(tensor, axis1=ax, axis2=ax + cur)
    d = 2 ** len(keep)
    return DensityMatrix(len(keep), tensor.reshape(d, d))
