"""Complex linear-algebra foundations.

Kronecker products, column-stacking vectorization, structure-aware matrix
exponentials, Hilbert-Schmidt geometry, and the numerical rank / nullspace
machinery that every higher layer builds on.

Conventions
-----------
* Matrices are dense ``numpy`` arrays of ``complex128``.
* ``vec`` stacks columns (Fortran order), so ``vec(A X B) = (B^T kron A) vec(X)``.
* Real spans of complex matrices are handled by flattening a matrix into the
  real vector ``[Re, Im]`` of twice the complex dimension; the Euclidean inner
  product of these flats equals ``Re tr(A^dag B)``.
* All randomized numerics take an explicit seed so repeated runs are
  bit-identical.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

DEFAULT_TOL = 1e-9

__all__ = [
    "ConvergenceError",
    "DEFAULT_TOL",
    "frob",
    "hs_inner",
    "is_hermitian",
    "is_projector",
    "is_skew_hermitian",
    "is_unitary",
    "kron",
    "matexp",
    "nullspace_dim",
    "orthonormal_extend",
    "RealSpan",
    "smallest_eigs_iterative",
    "spectral_norm",
    "traceless",
    "unvec",
    "vec",
]


class ConvergenceError(RuntimeError):
    """An iterative eigensolver ran out of iterations.

    Carries the residual norms of the best available Ritz pairs so callers
    can report a diagnostic payload instead of a bare failure.
    """

    def __init__(self, message: str, residuals: Sequence[float] | None = None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


# ---------------------------------------------------------------------------
# structure predicates
# ---------------------------------------------------------------------------

def frob(a: np.ndarray) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(a))


def spectral_norm(a: np.ndarray) -> float:
    """Induced two-norm (largest singular value)."""
    return float(np.linalg.norm(a, 2))


def is_hermitian(a: np.ndarray, tol: float = 1e-10) -> bool:
    """True if ``max|a_ij - conj(a_ji)|`` is below ``tol`` times the norm scale."""
    scale = max(np.max(np.abs(a)), 1.0)
    return bool(np.max(np.abs(a - a.conj().T)) < tol * scale)


def is_skew_hermitian(a: np.ndarray, tol: float = 1e-10) -> bool:
    scale = max(np.max(np.abs(a)), 1.0)
    return bool(np.max(np.abs(a + a.conj().T)) < tol * scale)


def is_unitary(a: np.ndarray, tol: float = 1e-8) -> bool:
    """True if ``|U^dag U - I|_F < tol * sqrt(dim)``."""
    n = a.shape[0]
    return frob(a.conj().T @ a - np.eye(n)) < tol * np.sqrt(n)


def is_projector(a: np.ndarray, tol: float = 1e-8) -> bool:
    """Hermitian and idempotent within ``tol`` (Frobenius)."""
    return is_hermitian(a) and frob(a @ a - a) < tol


def traceless(a: np.ndarray) -> np.ndarray:
    """Remove the identity component: ``a - tr(a)/n * I``."""
    n = a.shape[0]
    return a - (np.trace(a) / n) * np.eye(n)


# ---------------------------------------------------------------------------
# tensor / vectorization layer
# ---------------------------------------------------------------------------

def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; entry ((i*dimB+k),(j*dimB+l)) = a[i,j]*b[k,l]."""
    return np.kron(a, b)


def vec(x: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization: stack the columns of ``x`` into one vector."""
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`.  ``dim`` may be omitted for perfect-square lengths."""
    v = np.asarray(v).ravel()
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise ValueError(f"cannot unvec a vector of length {v.size} into a square matrix")
    return v.reshape((dim, dim), order="F")


def matexp(a: np.ndarray) -> np.ndarray:
    """Matrix exponential, exact-unitary for (skew-)Hermitian input.

    Skew-Hermitian ``a`` (i.e. ``a = -iH`` with Hermitian ``H``) is
    exponentiated through the eigendecomposition of ``i a``, so the result is
    unitary to machine precision.  Hermitian input likewise goes through its
    own eigendecomposition.  Anything else falls back to scaling-and-squaring
    (``scipy.linalg.expm``).
    """
    a = np.asarray(a, dtype=complex)
    if is_skew_hermitian(a):
        w, v = np.linalg.eigh(1j * a)  # a = -i (v w v^dag)
        return (v * np.exp(-1j * w)) @ v.conj().T
    if is_hermitian(a):
        w, v = np.linalg.eigh(a)
        return (v * np.exp(w)) @ v.conj().T
    return scipy.linalg.expm(a)


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product ``tr(a^dag b)``."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


# ---------------------------------------------------------------------------
# real-span machinery
# ---------------------------------------------------------------------------

def _real_flat(x: np.ndarray) -> np.ndarray:
    """Flatten a complex matrix into the real vector [Re, Im].

    Euclidean dot of two flats equals Re tr(A^dag B), which is the inner
    product under which real spans are orthonormalized.
    """
    x = np.asarray(x, dtype=complex)
    return np.concatenate([x.real.ravel(), x.imag.ravel()])


def _unflat(v: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    half = v.size // 2
    return (v[:half] + 1j * v[half:]).reshape(shape)


class RealSpan:
    """Growing orthonormal basis of a real subspace of complex matrices.

    Rows of the internal array are the [Re, Im] flats of the basis matrices;
    projections are single matrix-vector products, which keeps worklist
    algorithms (Lie closure, observability growth) cheap for hundreds of
    basis elements.
    """

    def __init__(self, shape: tuple[int, int], capacity: int, tol: float = DEFAULT_TOL):
        self.shape = shape
        self.tol = tol
        self._rows = np.zeros((capacity, 2 * shape[0] * shape[1]))
        self._n = 0

    def __len__(self) -> int:
        return self._n

    @property
    def dim(self) -> int:
        return self._n

    def residual(self, x: np.ndarray) -> np.ndarray:
        """Component of ``x`` orthogonal to the span (twice-repeated Gram-Schmidt)."""
        v = _real_flat(x)
        q = self._rows[: self._n]
        for _ in range(2):
            v = v - q.T @ (q @ v)
        return v

    def residual_norm(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(self.residual(x)))

    def extend(self, x: np.ndarray) -> bool:
        """Orthonormalize ``x`` against the span; append the residual if it is
        numerically independent.  Returns True when the basis grew."""
        v = self.residual(x)
        nrm = float(np.linalg.norm(v))
        if nrm <= self.tol * max(1.0, float(np.linalg.norm(_real_flat(x)))):
            return False
        if self._n == self._rows.shape[0]:
            self._rows = np.vstack([self._rows, np.zeros_like(self._rows)])
        self._rows[self._n] = v / nrm
        self._n += 1
        return True

    def matrix(self, i: int) -> np.ndarray:
        return _unflat(self._rows[i], self.shape)

    def matrices(self) -> list[np.ndarray]:
        return [self.matrix(i) for i in range(self._n)]


def orthonormal_extend(
    basis: Sequence[np.ndarray], x: np.ndarray, tol: float = DEFAULT_TOL
) -> tuple[list[np.ndarray], bool]:
    """Extend an orthonormal (under Re tr(A^dag B)) family by one candidate.

    Projects ``x`` onto the orthocomplement of ``span(basis)`` with
    twice-repeated Gram-Schmidt; if the residual Frobenius norm exceeds
    ``tol * max(1, |x|_F)`` the normalized residual is appended.

    Returns the (possibly extended) basis as a new list and an ``added`` flag.
    """
    shape = np.asarray(x).shape
    span = RealSpan(shape, capacity=max(len(basis), 1) + 1, tol=tol)
    for b in basis:
        span._rows[span._n] = _real_flat(b)
        span._n += 1
    added = span.extend(x)
    out = list(basis)
    if added:
        out.append(span.matrix(span.dim - 1))
    return out, added


# ---------------------------------------------------------------------------
# nullspace dimension
# ---------------------------------------------------------------------------

def _check_linearity(apply: Callable, d: int, rng: np.random.Generator) -> None:
    x = rng.normal(size=d) + 1j * rng.normal(size=d)
    y = rng.normal(size=d) + 1j * rng.normal(size=d)
    alpha = complex(rng.normal(), rng.normal())
    beta = complex(rng.normal(), rng.normal())
    lhs = apply(alpha * x + beta * y)
    rhs = alpha * apply(x) + beta * apply(y)
    scale = max(float(np.linalg.norm(rhs)), 1.0)
    if float(np.linalg.norm(lhs - rhs)) > 1e-8 * scale:
        raise ValueError("supplied map fails the probabilistic linearity check")


def nullspace_dim(
    apply: Callable[[np.ndarray], np.ndarray],
    d: int,
    tol: float = DEFAULT_TOL,
    *,
    apply_normal: Callable[[np.ndarray], np.ndarray] | None = None,
    seed: int = 0,
    dense_threshold: int = 4096,
    maxiter: int = 20000,
    force_iterative: bool = False,
) -> int:
    """Dimension of the kernel of a linear map on a ``d``-dim complex space.

    Counts the eigenvalues of the positive-semidefinite normal operator
    ``apply^dag o apply`` that fall below ``tol`` times its largest
    eigenvalue.  For ``d <= dense_threshold`` the map is materialized column
    by column and solved densely; above that a seeded Krylov search for the
    smallest eigenvalues of the normal operator is used, which requires the
    caller to pass ``apply_normal`` (the normal operator as a matvec).

    Raises :class:`ConvergenceError` when the iterative path runs out of
    iterations, with the attained residuals attached.
    """
    rng = np.random.default_rng(seed)
    _check_linearity(apply, d, rng)

    if d <= dense_threshold and not force_iterative:
        e = np.zeros(d, dtype=complex)
        m = None
        for i in range(d):
            e[i] = 1.0
            col = np.array(apply(e), dtype=complex).ravel()  # copy: apply may alias e
            e[i] = 0.0
            if m is None:
                m = np.empty((col.size, d), dtype=complex)
            m[:, i] = col
        gram = m.conj().T @ m
        w = np.linalg.eigvalsh(gram)
        lam_max = float(w[-1])
        if lam_max <= 0.0:
            return d
        return int(np.count_nonzero(w < tol * lam_max))

    if apply_normal is None:
        raise ValueError(
            f"d={d} exceeds the dense threshold; the iterative path needs apply_normal"
        )
    # cheap seeded consistency check: <x, N x> must equal |apply(x)|^2
    x = rng.normal(size=d) + 1j * rng.normal(size=d)
    lhs = float(np.real(np.vdot(x, apply_normal(x))))
    rhs = float(np.linalg.norm(apply(x)) ** 2)
    if abs(lhs - rhs) > 1e-6 * max(rhs, 1.0):
        raise ValueError("apply_normal is inconsistent with apply")
    count, _, _ = smallest_eigs_iterative(
        apply_normal, d, tol, seed=seed, maxiter=maxiter, want_vectors=False
    )
    return count


def _densify_normal(apply_normal: Callable, d: int) -> np.ndarray:
    e = np.zeros(d, dtype=complex)
    m = np.empty((d, d), dtype=complex)
    for i in range(d):
        e[i] = 1.0
        m[:, i] = np.array(apply_normal(e), dtype=complex).ravel()
        e[i] = 0.0
    return m


def smallest_eigs_iterative(
    apply_normal: Callable[[np.ndarray], np.ndarray],
    d: int,
    tol: float = DEFAULT_TOL,
    *,
    seed: int = 0,
    maxiter: int = 20000,
    want_vectors: bool = False,
) -> tuple[int, np.ndarray | None, float]:
    """Count (and optionally extract) the near-kernel of a PSD matvec.

    Seeded Lanczos on the shifted operator ``lam_max I - N`` turns the
    kernel into the top of the spectrum; because a single-vector Krylov
    space resolves at most one copy of a degenerate eigenvalue reliably,
    kernel vectors found in one pass are deflated away and the search is
    repeated until a pass finds nothing new (block-Krylov-with-restarts).
    Returns ``(count, vectors, lam_max)``; ``vectors`` is an orthonormal
    kernel basis as columns when requested.
    """
    if d < 64:  # too small for ARPACK block sizes; densify the normal operator
        m = _densify_normal(apply_normal, d)
        w, v = np.linalg.eigh((m + m.conj().T) / 2)
        lam_max = float(w[-1])
        if lam_max <= 0.0:
            return d, (np.eye(d, dtype=complex) if want_vectors else None), 0.0
        keep = w < tol * lam_max
        count = int(np.count_nonzero(keep))
        return count, (v[:, keep] if want_vectors else None), lam_max

    rng = np.random.default_rng(seed)
    v0 = rng.normal(size=d) + 1j * rng.normal(size=d)
    op = scipy.sparse.linalg.LinearOperator((d, d), matvec=apply_normal, dtype=complex)
    try:
        lam_max = float(
            scipy.sparse.linalg.eigsh(
                op, k=1, which="LA", v0=v0, maxiter=maxiter,
                return_eigenvectors=False, tol=1e-9,
            )[0]
        )
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        raise ConvergenceError(
            f"largest-eigenvalue search did not converge within {maxiter} iterations",
            residuals=list(np.atleast_1d(getattr(exc, "eigenvalues", []))),
        ) from exc
    if lam_max <= 0.0:
        vecs = np.eye(d, dtype=complex) if want_vectors else None
        return d, vecs, 0.0

    kernel = np.zeros((d, 0), dtype=complex)
    k = 8
    for _ in range(max(d // 2, 8)):  # each pass must enlarge the kernel or stop
        k = min(k, d - 2)
        basis = kernel  # closed over by the deflated matvec below

        def deflated(z: np.ndarray) -> np.ndarray:
            out = lam_max * z - apply_normal(z)
            if basis.shape[1]:
                out = out - lam_max * (basis @ (basis.conj().T @ z))
            return out

        shifted = scipy.sparse.linalg.LinearOperator(
            (d, d), matvec=deflated, dtype=complex
        )
        # a Krylov space holds one direction per degenerate eigenvalue, so
        # every pass starts from a fresh seeded vector: a pass that finds
        # nothing then certifies (probabilistically) that nothing is left
        v0 = rng.normal(size=d) + 1j * rng.normal(size=d)
        try:
            vals, vecs = scipy.sparse.linalg.eigsh(
                shifted, k=k, which="LA", v0=v0, maxiter=maxiter,
                ncv=min(d, max(6 * k, 48)), tol=1e-9,
            )
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise ConvergenceError(
                f"smallest-eigenvalue search did not converge within {maxiter} iterations",
                residuals=list(np.atleast_1d(getattr(exc, "eigenvalues", []))),
            ) from exc
        small = lam_max - vals
        keep = small < tol * lam_max
        found = int(np.count_nonzero(keep))
        if found == 0:
            count = kernel.shape[1]
            return count, (kernel if want_vectors else None), lam_max
        new = vecs[:, keep]
        if kernel.shape[1]:
            new = new - kernel @ (kernel.conj().T @ new)
        q, r = np.linalg.qr(new)
        independent = np.abs(np.diag(r)) > 1e-8
        kernel = np.concatenate([kernel, q[:, independent]], axis=1)
        if found == k:
            k = min(2 * k, 64)  # the whole block was kernel; widen the search
        else:
            # the cluster looked enclosed; the next pass mostly re-certifies,
            # which any block size can do, so shrink it
            k = max(2, found)
    raise ConvergenceError(
        "kernel deflation loop failed to terminate", residuals=[]
    )


def nullspace_basis_dense(
    apply: Callable[[np.ndarray], np.ndarray], d: int, tol: float = DEFAULT_TOL
) -> np.ndarray:
    """Orthonormal kernel basis (columns) of a map on a small complex space.

    Dense-only companion to :func:`nullspace_dim`, used where the kernel
    vectors themselves are needed (e.g. commutant restrictions in tests).
    """
    e = np.zeros(d, dtype=complex)
    cols = []
    for i in range(d):
        e[i] = 1.0
        cols.append(np.array(apply(e), dtype=complex).ravel())
        e[i] = 0.0
    m = np.stack(cols, axis=1)
    u, s, vh = np.linalg.svd(m, full_matrices=True)
    smax = s[0] if s.size else 0.0
    if smax <= 0.0:
        return np.eye(d, dtype=complex)
    rank = int(np.count_nonzero(s >= np.sqrt(tol) * smax))
    return vh[rank:].conj().T
