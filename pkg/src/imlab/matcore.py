"""Dense complex matrix kernel.

Entropies are in bits. Matrices are plain ``numpy.ndarray`` objects; the
helpers in this module validate them on the way in rather than wrapping them
in container classes.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidStateError, ResourceLimitError, ShapeError

EIG_CLIP = 1e-12
STATE_TOL = 1e-10
DEFAULT_DIM_CAP = 4096

_TIE_TOL = 1e-10


def dim_cap() -> int:
    """Current dimension cap; ``IMLAB_DIM_CAP`` overrides the default."""
    value = os.environ.get("IMLAB_DIM_CAP")
    if value is None:
        return DEFAULT_DIM_CAP
    try:
        cap = int(value)
    except ValueError:
        raise ResourceLimitError(f"IMLAB_DIM_CAP is not an integer: {value!r}")
    if cap < 1:
        raise ResourceLimitError(f"IMLAB_DIM_CAP must be positive, got {cap}")
    return cap


def check_dim(dim: int, what: str = "dimension") -> None:
    cap = dim_cap()
    if dim > cap:
        raise ResourceLimitError(f"{what} {dim} exceeds cap {cap}")


# ---------------------------------------------------------------------------
# seeds


@dataclass(frozen=True)
class Seed:
    """Master seed plus stream id; identical pairs give identical samples."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.stream_id < 0:
            raise ValueError(f"stream_id must be non-negative, got {self.stream_id}")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.master_seed, self.stream_id]))

    def derive(self, *keys: int) -> "Seed":
        """Child seed for an independent task; depends only on (self, keys)."""
        ss = np.random.SeedSequence([self.master_seed, self.stream_id, *keys])
        return Seed(self.master_seed, int(ss.generate_state(1, np.uint64)[0]))


def as_seed(seed) -> Seed:
    if isinstance(seed, Seed):
        return seed
    if isinstance(seed, (int, np.integer)):
        return Seed(int(seed))
    raise TypeError(f"expected Seed or int, got {type(seed).__name__}")


# ---------------------------------------------------------------------------
# validation


def as_square(M, name: str = "matrix") -> np.ndarray:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ShapeError(f"{name} has non-finite entries")
    return M


def hermitian_defect(M: np.ndarray) -> float:
    return float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0


def validate_state(rho, tol: float = STATE_TOL) -> np.ndarray:
    """Return ``rho`` as a complex array, raising if it is not a density matrix."""
    rho = as_square(rho, "state").astype(complex)
    herm = hermitian_defect(rho)
    if herm > tol:
        raise InvalidStateError(f"state is not Hermitian (defect {herm:.3g})")
    tr = np.trace(rho).real
    if abs(tr - 1) > tol:
        raise InvalidStateError(f"state trace is {tr!r}, expected 1")
    lam_min = np.linalg.eigvalsh(rho).min()
    if lam_min < -tol:
        raise InvalidStateError(f"state is not PSD (min eigenvalue {lam_min:.3g})")
    return rho


def is_density_matrix(rho, tol: float = STATE_TOL) -> bool:
    try:
        validate_state(rho, tol)
    except (InvalidStateError, ShapeError):
        return False
    return True


# ---------------------------------------------------------------------------
# spectral kernel


def _fix_phase(v: np.ndarray) -> np.ndarray:
    # first component of (near-)maximal magnitude made real positive
    mag = np.abs(v)
    k = int(np.argmax(mag >= mag.max() - _TIE_TOL))
    ph = v[k] / abs(v[k])
    return v / ph


def eigh_sorted(H) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic Hermitian eigendecomposition.

    Eigenvalues come back in descending order. Each eigenvector's first
    largest-magnitude component is made real positive, and vectors within a
    block of tied eigenvalues are ordered lexicographically by their entries.
    """
    H = as_square(H)
    lam, V = np.linalg.eigh(H)
    lam = lam[::-1]
    V = V[:, ::-1]
    V = np.column_stack([_fix_phase(V[:, k]) for k in range(V.shape[1])]) if V.size else V
    order = list(range(len(lam)))
    start = 0
    while start < len(lam):
        stop = start + 1
        while stop < len(lam) and abs(lam[stop] - lam[start]) <= _TIE_TOL:
            stop += 1
        if stop - start > 1:
            block = order[start:stop]
            key = lambda k: tuple(np.round(np.concatenate([V[:, k].real, V[:, k].imag]), 9))
            order[start:stop] = sorted(block, key=key, reverse=True)
        start = stop
    return lam[order], V[:, order]


def _entropy_of_spectrum(lam: np.ndarray) -> float:
    lam = lam[lam > EIG_CLIP]
    return float(-np.sum(lam * np.log2(lam))) + 0.0


def shannon_entropy(probs) -> float:
    """Shannon entropy in bits with 0 log 0 = 0."""
    return _entropy_of_spectrum(np.asarray(probs, dtype=float))


def von_neumann_entropy(rho) -> float:
    """S(rho) = -tr rho log2 rho, eigenvalues below 1e-12 treated as zero."""
    rho = as_square(rho, "state")
    herm = hermitian_defect(rho)
    if herm > STATE_TOL:
        raise InvalidStateError(f"state is not Hermitian (defect {herm:.3g})")
    return _entropy_of_spectrum(np.linalg.eigvalsh(rho))


def relative_entropy(rho, sigma) -> float:
    """Quantum relative entropy D(rho||sigma) in bits.

    Returns ``math.inf`` when the support of ``rho`` is not contained in the
    support of ``sigma``.
    """
    rho = as_square(rho, "rho")
    sigma = as_square(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise ShapeError(f"shape mismatch {rho.shape} vs {sigma.shape}")
    for name, M in (("rho", rho), ("sigma", sigma)):
        if hermitian_defect(M) > STATE_TOL:
            raise InvalidStateError(f"{name} is not Hermitian")
    lr, Vr = np.linalg.eigh(rho)
    ls, Vs = np.linalg.eigh(sigma)
    keep_r = lr > EIG_CLIP
    keep_s = ls > EIG_CLIP
    # weight of rho outside supp(sigma)
    ker = Vs[:, ~keep_s]
    leak = float(np.real(np.trace(ker.conj().T @ rho @ ker))) if ker.size else 0.0
    if leak > EIG_CLIP:
        return math.inf
    lr_k = lr[keep_r]
    term1 = float(np.sum(lr_k * np.log2(lr_k)))
    # tr rho log sigma = sum_j log s_j <s_j|rho|s_j>
    diag = np.real(np.einsum("ij,jk,ki->i", Vs[:, keep_s].conj().T, rho, Vs[:, keep_s]))
    term2 = float(np.sum(diag * np.log2(ls[keep_s])))
    return term1 - term2


def trace_norm(M) -> float:
    """Sum of singular values."""
    M = as_square(M)
    if hermitian_defect(M) <= 1e-13:
        return float(np.sum(np.abs(np.linalg.eigvalsh(M))))
    return float(np.sum(np.linalg.svd(M, compute_uv=False)))


def sqrtm_psd(X) -> np.ndarray:
    lam, V = np.linalg.eigh(as_square(X))
    return (V * np.sqrt(np.clip(lam, 0, None))) @ V.conj().T


# ---------------------------------------------------------------------------
# tensor algebra


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats)


def tensor_power(rho, n: int) -> np.ndarray:
    """n-fold Kronecker power in the lexicographic composite basis."""
    rho = as_square(rho)
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    check_dim(rho.shape[0] ** n, "tensor power dimension")
    return kron_all([rho] * n)


def partial_trace(state, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Reduced state on the factors listed in ``keep`` (in ascending order)."""
    state = as_square(state, "state")
    dims = [int(x) for x in dims]
    if any(x < 1 for x in dims) or math.prod(dims) != state.shape[0]:
        raise ShapeError(f"dims {dims} do not match state dimension {state.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ShapeError(f"keep indices {keep} out of range for {len(dims)} factors")
    n = len(dims)
    traced = [k for k in range(n) if k not in keep]
    T = state.reshape(dims + dims)
    # contract traced axes pairwise
    for offset, k in enumerate(traced):
        ax = k - offset
        T = np.trace(T, axis1=ax, axis2=ax + T.ndim // 2)
    d_keep = math.prod(dims[k] for k in keep)
    return T.reshape(d_keep, d_keep)


def ket_to_dm(psi) -> np.ndarray:
    psi = np.asarray(psi).reshape(-1)
    return np.outer(psi, psi.conj())


def purify(rho) -> np.ndarray:
    """Purification sum_i sqrt(p_i) |v_i>_A |i>_Z with Z dimension = rank.

    Returns the amplitude vector of length ``d * rank`` in A-major order.
    """
    rho = validate_state(rho)
    lam, V = eigh_sorted(rho)
    r = max(1, int(np.sum(lam > EIG_CLIP)))
    psi = np.zeros((rho.shape[0], r), dtype=complex)
    for i in range(r):
        psi[:, i] = math.sqrt(max(lam[i], 0.0)) * V[:, i]
    psi = psi.reshape(-1)
    return psi / np.linalg.norm(psi)


# ---------------------------------------------------------------------------
# random instances


def random_density(d: int, seed) -> np.ndarray:
    """Hilbert-Schmidt random state G G^H / tr(G G^H)."""
    if d < 1:
        raise ValueError(f"d must be positive, got {d}")
    rng = as_seed(seed).rng()
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = G @ G.conj().T
    rho = (rho + rho.conj().T) / 2
    return rho / np.trace(rho).real


def random_pure(d: int, seed) -> np.ndarray:
    rng = as_seed(seed).rng()
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def haar_orthogonal(d: int, seed) -> np.ndarray:
    """Haar-random real orthogonal matrix (QR with R-diagonal sign fix)."""
    if d < 1:
        raise ValueError(f"d must be positive, got {d}")
    return _haar_orthogonal(d, as_seed(seed).rng())


def _haar_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s


# ---------------------------------------------------------------------------
# matrix file format


def matrix_to_json(M) -> str:
    M = as_square(M)
    d = M.shape[0]
    entries = [[float(z.real), float(z.imag)] for z in M.astype(complex).reshape(-1)]
    return json.dumps({"d": d, "entries": entries})


def matrix_from_json(text: str) -> np.ndarray:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ShapeError(f"matrix file is not valid JSON: {exc}")
    if not isinstance(obj, dict) or "d" not in obj or "entries" not in obj:
        raise ShapeError("matrix file needs fields 'd' and 'entries'")
    d = obj["d"]
    entries = obj["entries"]
    if not isinstance(d, int) or d < 1:
        raise ShapeError(f"field 'd' must be a positive integer, got {d!r}")
    if not isinstance(entries, list) or len(entries) != d * d:
        n = len(entries) if isinstance(entries, list) else "non-list"
        raise ShapeError(f"field 'entries' has length {n}, expected d*d = {d * d}")
    try:
        vals = [complex(float(re), float(im)) for re, im in entries]
    except (TypeError, ValueError):
        raise ShapeError("field 'entries' must hold [re, im] pairs")
    return np.array(vals, dtype=complex).reshape(d, d)


def save_matrix(path, M) -> None:
    with open(path, "w") as fh:
        fh.write(matrix_to_json(M))


def load_matrix(path) -> np.ndarray:
    with open(path) as fh:
        return matrix_from_json(fh.read())
