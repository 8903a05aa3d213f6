"""Imaginarity structure: the Theta channel, realness predicates, REI.

All transposes are taken in the fixed reference (computational) basis. For a
composite system in lexicographic order the full transpose coincides with the
product of the per-factor transposes, so no subsystem bookkeeping is needed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .matcore import (
    as_square,
    eigh_sorted,
    relative_entropy,
    tensor_power,
    trace_norm,
    validate_state,
    von_neumann_entropy,
)

ZERO_MODE_TOL = 1e-10


def transpose_ref(M) -> np.ndarray:
    return as_square(M).T.copy()


def theta(M) -> np.ndarray:
    """Theta(M) = (M + M^T) / 2, the projection onto symmetric matrices."""
    M = as_square(M)
    return (M + M.T) / 2


def re_im_parts(rho) -> tuple[np.ndarray, np.ndarray]:
    """Split a state as rho = Re + i Im with Re symmetric and Im antisymmetric.

    For Hermitian input these coincide with the entrywise real and imaginary
    parts, returned as real arrays.
    """
    rho = validate_state(rho)
    re = ((rho + rho.T) / 2).real
    im = ((rho - rho.T) / 2j).real
    return re, im


def is_real_state(rho, tol: float = 1e-10) -> bool:
    if tol <= 0:
        raise InvalidInputError(f"tol must be positive, got {tol}")
    rho = as_square(rho)
    return trace_norm(rho - rho.T) <= tol


def is_real_operation(kraus, tol: float = 1e-10) -> bool:
    """True iff every Kraus operator is real and sum K^dag K = I, both within tol."""
    ops = [np.asarray(K) for K in kraus]
    if not ops:
        return False
    shape = ops[0].shape
    if any(K.shape != shape for K in ops):
        raise InvalidInputError("Kraus operators must share one shape")
    if any(np.max(np.abs(np.imag(K)), initial=0.0) > tol for K in ops):
        return False
    completeness = sum(K.conj().T @ K for K in ops)
    return bool(np.max(np.abs(completeness - np.eye(shape[1]))) <= tol)


def is_covariant_unitary(U, tol: float = 1e-10) -> bool:
    """Conjugation by U commutes with Theta iff U is (up to tol) real orthogonal."""
    U = as_square(U)
    if np.max(np.abs(np.imag(U)), initial=0.0) > tol:
        return False
    return bool(np.max(np.abs(U @ U.conj().T - np.eye(U.shape[0]))) <= tol)


def rei(rho) -> float:
    """Relative entropy of imaginarity, S(Theta(rho)) - S(rho), in bits."""
    rho = validate_state(rho)
    return von_neumann_entropy(theta(rho)) - von_neumann_entropy(rho)


def rei_min_form(rho) -> float:
    """D(rho || Theta(rho)); equals :func:`rei` since Theta(rho) is the minimiser."""
    rho = validate_state(rho)
    return relative_entropy(rho, theta(rho))


def imag_distance(rho) -> float:
    """||rho - Theta(rho)||_1, the trace norm of i*Im(rho).

    The true distance to the nearest real state lies in
    ``[imag_distance / 2, imag_distance]``.
    """
    rho = as_square(rho)
    return trace_norm(rho - theta(rho))


@dataclass
class ReiSequence:
    rho_label: str
    values: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def ns(self):
        return [v[0] for v in self.values]

    @property
    def rei_values(self):
        return [v[1] for v in self.values]

    @property
    def per_copy(self):
        return [v[2] for v in self.values]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "rei", "rei_per_copy"])
        for n, val, per in self.values:
            w.writerow([n, repr(val), repr(per)])
        return buf.getvalue()


def rei_sequence(rho, n_max: int, label: str = "rho") -> ReiSequence:
    """Exact I_r(rho^{(x)n}) and I_r/n for n = 1..n_max."""
    rho = validate_state(rho)
    if n_max < 1:
        raise InvalidInputError(f"n_max must be positive, got {n_max}")
    tensor_power(np.eye(rho.shape[0]), n_max)  # cap check before any work
    s1 = von_neumann_entropy(rho)
    seq = ReiSequence(label)
    power = rho
    for n in range(1, n_max + 1):
        if n > 1:
            power = np.kron(power, rho)
        # S(rho^{(x)n}) = n S(rho) exactly
        val = von_neumann_entropy(theta(power)) - n * s1
        seq.values.append((n, val, val / n))
    return seq


@dataclass
class SkewCanonicalForm:
    """O A O^T = 0_{d-2r} (+) lambda_k [[0, 1], [-1, 0]]."""

    O: np.ndarray
    lambdas: np.ndarray
    r: int
    d: int

    def block_matrix(self) -> np.ndarray:
        B = np.zeros((self.d, self.d))
        z = self.d - 2 * self.r
        for k, lam in enumerate(self.lambdas):
            i = z + 2 * k
            B[i, i + 1] = lam
            B[i + 1, i] = -lam
        return B

    def residual(self, A) -> float:
        A = np.asarray(A, dtype=float)
        return float(np.max(np.abs(self.O @ A @ self.O.T - self.block_matrix()), initial=0.0))


def skew_canonical_form(A) -> SkewCanonicalForm:
    """Real orthogonal block diagonalisation of a real antisymmetric matrix.

    Works from the Hermitian matrix iA: an eigenvector v = x + iy for the
    eigenvalue lambda > 0 gives the real pair (sqrt2 x, -sqrt2 y) of rows of O
    spanning one 2x2 block. Zero modes fill the leading rows.
    """
    A = as_square(A, "A")
    if np.max(np.abs(np.imag(A)), initial=0.0) > 1e-12:
        raise InvalidInputError("A must be real")
    A = np.real(A).astype(float)
    if np.max(np.abs(A + A.T), initial=0.0) > 1e-10:
        raise InvalidInputError("A must be antisymmetric")
    d = A.shape[0]
    lam, V = eigh_sorted(1j * A)
    pos = [k for k in range(d) if lam[k] > ZERO_MODE_TOL]
    rows = []
    for k in pos:
        v = V[:, k]
        rows.append(np.sqrt(2) * v.real)
        rows.append(-np.sqrt(2) * v.imag)
    r = len(pos)
    if r:
        P = np.array(rows)
        # re-orthonormalise within each block to kill eigensolver drift
        P, _ = _orthonormal_rows(P)
    else:
        P = np.zeros((0, d))
    if 2 * r < d:
        # orthonormal complement of the block rows, i.e. the kernel of A
        if r:
            _, _, Vt = np.linalg.svd(P)
            kernel = _canonical_kernel(Vt[2 * r:])
        else:
            kernel = np.eye(d)
        O = np.vstack([kernel, P])
    else:
        O = P
    return SkewCanonicalForm(O=O, lambdas=lam[pos].copy(), r=r, d=d)


def _orthonormal_rows(P: np.ndarray):
    Q, R = np.linalg.qr(P.T)
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return (Q * s).T, R


def _canonical_kernel(K: np.ndarray) -> np.ndarray:
    out = []
    for row in K:
        k = int(np.argmax(np.abs(row) >= np.abs(row).max() - 1e-10))
        out.append(row if row[k] > 0 else -row)
    return np.array(out)
