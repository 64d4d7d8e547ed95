"""Lie-algebraic decision procedures for bilinear quantum control systems.

A system is a drift Hamiltonian plus control Hamiltonians.  Its system
algebra is the Lie closure of the (skew-Hermitian) generators; its dimension
against N^2-1 decides controllability, the commutant of the adjoint-lifted
generators measures symmetry, and the growth of an observable under repeated
commutators decides observability.  Everything reduces to dense linear
algebra on vectorized operators.

Dimension conventions: Lie-closure and observability-space dimensions are
real dimensions of real spans; the symmetry dimension is the complex
dimension of a commutant (2 for trivially symmetric = fully controllable
systems).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.sparse

from . import linalg
from .quantum import I2, PAULI_X, PAULI_Y, PAULI_Z

__all__ = [
    "AnalysisReport",
    "BilinearSystem",
    "ConsistencyError",
    "HamiltonianExpr",
    "LieBasis",
    "ObservableVerdict",
    "PauliParseError",
    "PauliTerm",
    "adjoint_superop",
    "analyze_system",
    "controllability",
    "gate_reachable",
    "lie_closure",
    "observability_space",
    "observable_test",
    "parse_pauli",
    "simulable",
    "su_basis",
    "symmetry_dim",
    "tomografiable",
]

PAULI_LETTERS = {"1": I2, "x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}


class PauliParseError(ValueError):
    """Raised on malformed Pauli expressions; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ConsistencyError(RuntimeError):
    """Two independent decision routes disagreed; indicates a tolerance bug."""


@dataclass(frozen=True)
class PauliTerm:
    """One real-weighted Pauli string, e.g. 2.0 * '1xx1'."""

    coefficient: float
    letters: str

    def __post_init__(self):
        if not self.letters or any(c not in PAULI_LETTERS for c in self.letters):
            raise ValueError(f"illegal Pauli string {self.letters!r}")
        if not np.isfinite(self.coefficient):
            raise ValueError("coefficient must be finite")

    def matrix(self) -> np.ndarray:
        m = reduce(np.kron, (PAULI_LETTERS[c] for c in self.letters))
        return self.coefficient * m


@dataclass(frozen=True)
class HamiltonianExpr:
    """Sum of Pauli terms; realizes as a Hermitian matrix."""

    terms: tuple

    @property
    def n_qubits(self) -> int:
        return len(self.terms[0].letters)

    def matrix(self) -> np.ndarray:
        return sum(t.matrix() for t in self.terms)


_TERM_RE = re.compile(r"\s*(?:([+-]?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)\s*\*\s*)?([1xyz]+)\s*")


def parse_pauli(expr: str, n_qubits: int) -> HamiltonianExpr:
    """Parse a Pauli-string sum like ``"xx11+yy11"`` or ``"2*z1 - 1z"``.

    Grammar: term (("+"|"-") term)*, term = [float "*"] letters, letters a
    string over {1,x,y,z} of length ``n_qubits``.  Raises
    :class:`PauliParseError` with the character position on any violation.
    """
    if not expr or not expr.strip():
        raise PauliParseError("empty expression", 0)
    pos = 0
    sign = 1.0
    terms = []
    # optional leading sign
    stripped = expr.lstrip()
    pos = len(expr) - len(stripped)
    if stripped.startswith(("+", "-")):
        sign = -1.0 if stripped[0] == "-" else 1.0
        pos += 1
    while True:
        m = _TERM_RE.match(expr, pos)
        if not m or not m.group(2):
            raise PauliParseError("expected a Pauli term", pos)
        coeff = float(m.group(1)) if m.group(1) else 1.0
        letters = m.group(2)
        if len(letters) != n_qubits:
            nxt = m.end(2)
            if len(letters) < n_qubits and nxt < len(expr) and expr[nxt] not in "+- ":
                raise PauliParseError(f"illegal character {expr[nxt]!r}", nxt)
            raise PauliParseError(
                f"Pauli string {letters!r} has length {len(letters)}, expected {n_qubits}",
                m.start(2),
            )
        terms.append(PauliTerm(sign * coeff, letters))
        pos = m.end()
        if pos >= len(expr) or not expr[pos:].strip():
            break
        nxt = expr[pos]
        if nxt == "+":
            sign = 1.0
        elif nxt == "-":
            sign = -1.0
        else:
            raise PauliParseError(f"unexpected character {nxt!r}", pos)
        pos += 1
    return HamiltonianExpr(tuple(terms))


@dataclass(frozen=True)
class BilinearSystem:
    """Drift + control Hamiltonians of a closed N-level bilinear system."""

    drift: np.ndarray
    controls: tuple

    def __post_init__(self):
        drift = np.asarray(self.drift, dtype=complex)
        controls = tuple(np.asarray(c, dtype=complex) for c in self.controls)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "controls", controls)
        for h in (drift, *controls):
            if h.shape != drift.shape or h.ndim != 2 or h.shape[0] != h.shape[1]:
                raise ValueError("all Hamiltonians must share one square shape")
            if not linalg.is_hermitian(h):
                raise ValueError("system Hamiltonians must be Hermitian")

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    def hamiltonians(self) -> list[np.ndarray]:
        """Drift first, then the controls."""
        return [self.drift, *self.controls]

    @classmethod
    def from_pauli(cls, drift: str, controls: list[str], n_qubits: int) -> "BilinearSystem":
        return cls(
            parse_pauli(drift, n_qubits).matrix(),
            tuple(parse_pauli(c, n_qubits).matrix() for c in controls),
        )


@dataclass
class LieBasis:
    """Orthonormal basis (real span, Re tr(A^dag B)) of a matrix Lie algebra.

    Elements are traceless skew-Hermitian matrices of one fixed size;
    ``generation_depth`` counts the commutator sweeps the closure took.
    """

    elements: list
    generation_depth: int = 0

    @property
    def dim(self) -> int:
        return len(self.elements)

    @property
    def dim_space(self) -> int:
        return self.elements[0].shape[0] if self.elements else 0

    def span(self) -> linalg.RealSpan:
        shape = self.elements[0].shape
        s = linalg.RealSpan(shape, capacity=len(self.elements))
        for e in self.elements:
            s.extend(e)
        return s


@dataclass
class ObservableVerdict:
    name: str
    obs_space_dim: int
    observable: bool
    commutant_dim: int | None = None
    tomografiable: bool | None = None
    notes: str = ""


@dataclass
class AnalysisReport:
    closure_dim: int
    full_dim: int
    controllable: bool
    symmetry_dim: int | None = None
    observables: list = field(default_factory=list)
    notes: str = ""


# ---------------------------------------------------------------------------
# core constructions
# ---------------------------------------------------------------------------

def adjoint_superop(h: np.ndarray) -> np.ndarray:
    """Lift H to the commutator superoperator I (x) H - H^T (x) I.

    Satisfies ``adjoint_superop(H) @ vec(rho) = vec([H, rho])``.
    """
    h = np.asarray(h, dtype=complex)
    if not linalg.is_hermitian(h):
        raise ValueError("adjoint lift expects a Hermitian matrix")
    n = h.shape[0]
    eye = np.eye(n)
    return np.kron(eye, h) - np.kron(h.T, eye)


def lie_closure(generators, tol: float = linalg.DEFAULT_TOL, cap: int | None = None) -> LieBasis:
    """Close a set of skew-Hermitian generators under nested commutators.

    Worklist algorithm: orthonormalize the (traceless parts of the)
    generators, then repeatedly commute every yet-unprocessed basis element
    against every basis element, extending the orthonormal family with each
    numerically independent commutator.  Terminates when a full sweep adds
    nothing or the dimension reaches ``cap`` (default N^2 - 1).
    """
    gens = [np.asarray(g, dtype=complex) for g in generators]
    if not gens:
        raise ValueError("need at least one generator")
    n = gens[0].shape[0]
    for g in gens:
        if not linalg.is_skew_hermitian(g):
            raise ValueError("generators must be skew-Hermitian")
    if cap is None:
        cap = n * n - 1
    span = linalg.RealSpan((n, n), capacity=cap, tol=tol)
    for g in gens:
        if span.dim >= cap:
            break
        span.extend(linalg.traceless(g))
    depth = 0
    head = 0  # elements before head have been commuted against everything
    while head < span.dim and span.dim < cap:
        depth += 1
        tail = span.dim
        for i in range(head, tail):
            a = span.matrix(i)
            for j in range(span.dim):
                b = span.matrix(j)
                span.extend(a @ b - b @ a)
                if span.dim >= cap:
                    break
            if span.dim >= cap:
                break
        head = tail
    if span.dim > cap:
        raise AssertionError("closure exceeded the ambient dimension cap")
    return LieBasis(elements=span.matrices(), generation_depth=depth)


def skew_generators(sys: BilinearSystem) -> list[np.ndarray]:
    """The system's Lie generators i*H_j (drift included)."""
    return [1j * h for h in sys.hamiltonians()]


def controllability(sys: BilinearSystem, tol: float = linalg.DEFAULT_TOL) -> AnalysisReport:
    """Lie-algebra rank condition: controllable iff the closure fills su(N)."""
    basis = lie_closure(skew_generators(sys), tol=tol)
    full = sys.dim ** 2 - 1
    return AnalysisReport(
        closure_dim=basis.dim,
        full_dim=full,
        controllable=basis.dim == full,
    )


# commutant spaces up to this many REAL dimensions use the dense eigensolve
_DENSE_COMMUTANT_REAL_DIMS = 4096


def _sparse_lifts(sys: BilinearSystem) -> list:
    """Adjoint lifts of the system Hamiltonians, as CSR when sparse enough."""
    out = []
    for h in sys.hamiltonians():
        a = adjoint_superop(h)
        nnz = np.count_nonzero(np.abs(a) > 1e-14)
        if nnz < 0.1 * a.size:
            out.append(scipy.sparse.csr_matrix(a))
        else:
            out.append(a)
    return out


def _commutator_maps(mats, n2: int):
    """(apply, apply_normal) matvecs of S -> ([A, S])_A on vec'd Mat(n2)."""
    adjoints = [
        a.conj().T.tocsr() if scipy.sparse.issparse(a) else a.conj().T for a in mats
    ]

    def commutator(a, s):
        return np.asarray(a @ s - (a.T @ s.T).T)  # s @ a without densifying sparse a

    def apply(v: np.ndarray) -> np.ndarray:
        s = v.reshape(n2, n2)
        return np.concatenate([commutator(a, s).ravel() for a in mats])

    def apply_normal(v: np.ndarray) -> np.ndarray:
        s = v.reshape(n2, n2)
        out = np.zeros_like(s)
        for a, ah in zip(mats, adjoints):
            out += commutator(ah, commutator(a, s))
        return out.ravel()

    return apply, apply_normal


def symmetry_dim(
    sys: BilinearSystem,
    tol: float = 1e-8,
    *,
    seed: int = 0,
    maxiter: int = 20000,
) -> int:
    """Dimension of the joint commutant of the adjoint-lifted generators.

    Counts S in Mat(N^2) with [S, adjoint_superop(H_j)] = 0 for every
    generator (drift included).  2 means only trivial symmetries, which is
    equivalent to full controllability.  The kernel is counted densely while
    the ambient space stays small and by a seeded matrix-free Krylov search
    above that (mandatory for N > 8, already used from N > 4 here).
    """
    n2 = sys.dim ** 2
    d = n2 * n2
    apply, apply_normal = _commutator_maps(_sparse_lifts(sys), n2)
    return linalg.nullspace_dim(
        apply, d, tol, apply_normal=apply_normal, seed=seed, maxiter=maxiter,
        dense_threshold=_DENSE_COMMUTANT_REAL_DIMS // 2,
    )


def _symmetry_kernel(
    sys: BilinearSystem,
    tol: float = 1e-8,
    *,
    seed: int = 0,
    maxiter: int = 20000,
) -> np.ndarray:
    """Orthonormal basis (columns) of the joint commutant of the lifts."""
    n2 = sys.dim ** 2
    d = n2 * n2
    apply, apply_normal = _commutator_maps(_sparse_lifts(sys), n2)
    if d <= _DENSE_COMMUTANT_REAL_DIMS // 2:
        return linalg.nullspace_basis_dense(apply, d, tol)
    _, vecs, _ = linalg.smallest_eigs_iterative(
        apply_normal, d, tol, seed=seed, maxiter=maxiter, want_vectors=True
    )
    q, _ = np.linalg.qr(vecs)  # Ritz vectors of a degenerate cluster: re-orthonormalize
    return q


def gate_reachable(basis: LieBasis, l_target: np.ndarray, tol: float = 1e-8) -> bool:
    """Span-membership test: can the system algebra produce this generator?

    True iff the traceless part of the (skew-Hermitian) target log lies in
    the closure span up to a relative residual of ``tol``.
    """
    l_target = np.asarray(l_target, dtype=complex)
    if not basis.elements:
        return False
    if l_target.shape != basis.elements[0].shape:
        raise ValueError("target and basis live in different representations")
    if not linalg.is_skew_hermitian(l_target):
        raise ValueError("target generator must be skew-Hermitian")
    lt = linalg.traceless(l_target)
    scale = linalg.frob(l_target)
    if scale == 0.0:
        return True
    return basis.span().residual_norm(lt) < tol * scale


def simulable(basis_a: LieBasis, basis_b: LieBasis, tol: float = 1e-8) -> bool:
    """Literal subspace inclusion k_b <= k_a (sufficient for simulability;
    the definition is up to isomorphism, which has no algorithmic test here)."""
    if not basis_b.elements:
        return True
    if basis_a.dim_space != basis_b.dim_space:
        raise ValueError("bases live on different representation spaces")
    span_a = basis_a.span()
    return all(span_a.residual_norm(e) < tol for e in basis_b.elements)


def observability_space(
    sys: BilinearSystem, c: np.ndarray, tol: float = linalg.DEFAULT_TOL
) -> tuple[int, list]:
    """Krylov growth of the traceless observable under generator commutators.

    Starting from i*C_traceless, repeatedly applies X -> [iH_j, X] for every
    generator to every new basis element until a sweep stagnates or the
    space saturates at N^2 - 1 real dimensions.  Products of system-algebra
    elements generate the same associative action as products of the
    generators, so generator commutators alone exhaust the space.
    """
    c = np.asarray(c, dtype=complex)
    if not linalg.is_hermitian(c):
        raise ValueError("observable must be Hermitian")
    n = sys.dim
    ct = linalg.traceless(c)
    if linalg.frob(ct) < 1e-12 * max(1.0, linalg.frob(c)):
        return 0, []
    gens = skew_generators(sys)
    cap = n * n - 1
    span = linalg.RealSpan((n, n), capacity=cap, tol=tol)
    span.extend(1j * ct)
    head = 0
    while head < span.dim and span.dim < cap:
        tail = span.dim
        for i in range(head, tail):
            x = span.matrix(i)
            for g in gens:
                span.extend(g @ x - x @ g)
                if span.dim >= cap:
                    break
            if span.dim >= cap:
                break
        head = tail
    return span.dim, span.matrices()


def _traceless_projector_vec(c: np.ndarray) -> np.ndarray:
    """Normalized vec of the traceless part of C (the axis of P_C)."""
    ct = linalg.traceless(np.asarray(c, dtype=complex))
    v = linalg.vec(ct)
    nrm = np.linalg.norm(v)
    if nrm < 1e-14:
        raise ValueError("observable has no traceless part")
    return v / nrm


def _joint_commutant_dim(
    sys: BilinearSystem,
    c: np.ndarray,
    tol: float = 1e-8,
    *,
    seed: int = 0,
    maxiter: int = 20000,
    symmetry_kernel: np.ndarray | None = None,
) -> int:
    """Complex dimension of the joint commutant of the adjoint lifts and P_C.

    Small systems stack all commutation maps into one dense kernel count.
    Large systems intersect instead: the joint commutant is exactly the
    kernel of [P_C, .] restricted to the symmetry commutant, so one big
    Krylov solve (reusable across observables via ``symmetry_kernel``)
    plus a tiny restriction replaces a badly conditioned stacked solve.
    """
    n2 = sys.dim ** 2
    d = n2 * n2
    v = _traceless_projector_vec(c)
    if d <= _DENSE_COMMUTANT_REAL_DIMS // 2 and symmetry_kernel is None:
        p_c = np.outer(v, v.conj())
        mats = _sparse_lifts(sys) + [p_c]
        apply, apply_normal = _commutator_maps(mats, n2)
        return linalg.nullspace_dim(
            apply, d, tol, apply_normal=apply_normal, seed=seed, maxiter=maxiter,
            dense_threshold=_DENSE_COMMUTANT_REAL_DIMS // 2,
        )
    if symmetry_kernel is None:
        symmetry_kernel = _symmetry_kernel(sys, tol, seed=seed, maxiter=maxiter)
    cols = []
    for k in range(symmetry_kernel.shape[1]):
        s = symmetry_kernel[:, k].reshape(n2, n2)
        # [P_C, S] = v (v^dag S) - (S v) v^dag, assembled from rank-one pieces
        comm = np.outer(v, v.conj() @ s) - np.outer(s @ v, v.conj())
        cols.append(comm.ravel())
    b = np.stack(cols, axis=1)
    sv = np.linalg.svd(b, compute_uv=False)
    rank = int(np.count_nonzero(sv > 1e-6 * max(1.0, sv[0] if sv.size else 0.0)))
    return symmetry_kernel.shape[1] - rank


def observable_test(
    sys: BilinearSystem,
    c: np.ndarray,
    tol: float = 1e-8,
    *,
    seed: int = 0,
    maxiter: int = 20000,
    symmetry_kernel: np.ndarray | None = None,
) -> bool:
    """Full-observability decision through two independent routes.

    Route 1: the observability space must exhaust all N^2 - 1 traceless
    Hermitian dimensions.  Route 2: the joint commutant of the adjoint
    lifts and the projector onto vec(C_traceless) must be two-dimensional.
    A disagreement raises :class:`ConsistencyError` instead of being
    silently resolved.
    """
    c = np.asarray(c, dtype=complex)
    full = sys.dim ** 2 - 1
    dim, _ = observability_space(sys, c)
    route1 = dim == full
    ct = linalg.traceless(c)
    if linalg.frob(ct) < 1e-12 * max(1.0, linalg.frob(c)):
        return False  # trivial observable; the commutant route is undefined
    commutant = _joint_commutant_dim(
        sys, c, tol, seed=seed, maxiter=maxiter, symmetry_kernel=symmetry_kernel
    )
    route2 = commutant == 2
    if route1 != route2:
        raise ConsistencyError(
            f"observability routes disagree: obs-space dim {dim}/{full}, "
            f"joint commutant dim {commutant}"
        )
    return route1


def tomografiable(sys: BilinearSystem, c: np.ndarray, report: AnalysisReport | None = None) -> bool:
    """Accessible-and-observable test; in closed systems accessibility
    coincides with controllability."""
    ctrl = report.controllable if report is not None else controllability(sys).controllable
    ct = linalg.traceless(np.asarray(c, dtype=complex))
    if linalg.frob(ct) < 1e-12:
        return False
    return ctrl and observable_test(sys, c)


def su_basis(n: int) -> LieBasis:
    """Orthonormal basis of su(n): i times the generalized Gell-Mann set."""
    elems = []
    for j in range(n):
        for k in range(j + 1, n):
            sym = np.zeros((n, n), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0 / np.sqrt(2)
            asym = np.zeros((n, n), dtype=complex)
            asym[j, k] = -1j / np.sqrt(2)
            asym[k, j] = 1j / np.sqrt(2)
            elems.append(1j * sym)
            elems.append(1j * asym)
    for j in range(1, n):
        diag = np.zeros(n, dtype=complex)
        diag[:j] = 1.0
        diag[j] = -j
        diag = diag / np.linalg.norm(diag)
        elems.append(1j * np.diag(diag))
    return LieBasis(elements=elems, generation_depth=0)


def analyze_system(
    sys: BilinearSystem,
    observables: dict[str, np.ndarray] | None = None,
    tol: float = 1e-8,
    *,
    seed: int = 0,
    maxiter: int = 20000,
) -> AnalysisReport:
    """Full decision report: closure, controllability, symmetry, observability.

    Cross-checks the trivial-symmetry criterion against the rank condition
    and refuses to return an inconsistent report.
    """
    report = controllability(sys)
    d = sys.dim ** 4
    big = d > _DENSE_COMMUTANT_REAL_DIMS // 2
    kernel = None
    if big:
        # one Krylov solve yields both the symmetry count and the kernel basis
        # every observable's commutant route restricts against
        kernel = _symmetry_kernel(sys, tol, seed=seed, maxiter=maxiter)
        report.symmetry_dim = kernel.shape[1]
    else:
        report.symmetry_dim = symmetry_dim(sys, tol, seed=seed, maxiter=maxiter)
    if report.controllable != (report.symmetry_dim == 2):
        raise ConsistencyError(
            f"rank condition (dim {report.closure_dim}/{report.full_dim}) and "
            f"symmetry dimension {report.symmetry_dim} disagree"
        )
    notes = [
        "simulability checks use literal subspace inclusion; the definition "
        "is up to isomorphism, for which no algorithmic test is attempted"
    ]
    for name, c in (observables or {}).items():
        dim, _ = observability_space(sys, c)
        full = report.full_dim
        ct = linalg.traceless(np.asarray(c, dtype=complex))
        if linalg.frob(ct) < 1e-12 * max(1.0, linalg.frob(np.asarray(c))):
            verdict = ObservableVerdict(
                name=name, obs_space_dim=0, observable=False,
                tomografiable=False, notes="trivial observable (no traceless part)",
            )
            report.observables.append(verdict)
            continue
        commutant = _joint_commutant_dim(
            sys, c, tol, seed=seed, maxiter=maxiter, symmetry_kernel=kernel
        )
        obs_ok = dim == full
        if obs_ok != (commutant == 2):
            raise ConsistencyError(
                f"observability routes disagree for {name}: "
                f"obs-space {dim}/{full} vs commutant {commutant}"
            )
        note = ""
        if not obs_ok:
            note = (
                f"observability limited to a symmetry sector: reaches {dim} of "
                f"{full} dimensions, orthocomplement {full - dim}"
            )
        verdict = ObservableVerdict(
            name=name, obs_space_dim=dim, observable=obs_ok,
            commutant_dim=commutant,
            tomografiable=report.controllable and obs_ok,
            notes=note,
        )
        report.observables.append(verdict)
    report.notes = "; ".join(notes)
    return report
