"""Covariant-free unitary ensembles and deimaginarization protocols."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError, ShapeError
from .imaginarity import imag_distance, is_covariant_unitary, rei, skew_canonical_form
from .matcore import (
    Seed,
    _haar_orthogonal,
    as_seed,
    check_dim,
    kron_all,
    tensor_power,
    validate_state,
)

I2 = np.eye(2)
SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
SXSZ = SX @ SZ
# index g = 2*x_bit + z_bit  ->  sigma_x^x sigma_z^z
REAL_PAULIS = (I2, SZ, SX, SXSZ)

EXPLICIT = "explicit"
REAL_PAULI = "real-pauli"
HAAR_ORTHOGONAL = "haar-orthogonal"


@dataclass
class UnitaryEnsemble:
    """A finite weighted list of real orthogonal matrices, or a named sampler.

    ``real-pauli`` ensembles are uniform over the 4^n tensor products of
    {I, X, Z, XZ}; members are materialised lazily. ``haar-orthogonal`` has no
    finite member list and can only be sampled.
    """

    kind: str
    dim: int
    members: list[tuple[float, np.ndarray]] = field(default_factory=list)
    n_qubits: int = 0
    label: str = ""

    def __post_init__(self):
        if self.kind == EXPLICIT:
            if not self.members:
                raise InvalidInputError("explicit ensemble needs at least one member")
            w = np.array([m[0] for m in self.members])
            if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
                raise InvalidInputError("ensemble weights must be non-negative and sum to 1")
            for _, O in self.members:
                if O.shape != (self.dim, self.dim):
                    raise ShapeError(f"member shape {O.shape} does not match dim {self.dim}")
        elif self.kind == REAL_PAULI:
            if self.dim != 2**self.n_qubits:
                raise ShapeError("real-pauli ensemble dimension must be 2**n_qubits")
        elif self.kind != HAAR_ORTHOGONAL:
            raise InvalidInputError(f"unknown ensemble kind {self.kind!r}")

    @property
    def size(self) -> Optional[int]:
        """Number of members, or None for the continuous Haar sampler."""
        if self.kind == EXPLICIT:
            return len(self.members)
        if self.kind == REAL_PAULI:
            return 4**self.n_qubits
        return None

    def materialize(self) -> list[tuple[float, np.ndarray]]:
        if self.kind == EXPLICIT:
            return list(self.members)
        if self.kind == REAL_PAULI:
            w = 1.0 / self.size
            return [(w, pauli_member(self.n_qubits, idx)) for idx in range(self.size)]
        raise InvalidInputError("haar-orthogonal ensemble has no finite member list")

    def sample_indices(self, N: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == EXPLICIT:
            w = np.array([m[0] for m in self.members])
            return rng.choice(len(self.members), size=N, p=w / w.sum())
        if self.kind == REAL_PAULI:
            # leading base-4 digit is qubit 0, as in pauli_member
            digits = rng.integers(0, 4, size=(N, self.n_qubits))
            return digits @ (4 ** np.arange(self.n_qubits - 1, -1, -1))
        raise InvalidInputError("haar-orthogonal ensemble samples matrices, not indices")

    def sample(self, N: int, seed) -> list[np.ndarray]:
        """N members drawn i.i.d. from the ensemble weights."""
        rng = as_seed(seed).rng()
        if self.kind == HAAR_ORTHOGONAL:
            return [_haar_orthogonal(self.dim, rng) for _ in range(N)]
        idx = self.sample_indices(N, rng)
        if self.kind == EXPLICIT:
            return [self.members[i][1] for i in idx]
        return [pauli_member(self.n_qubits, int(i)) for i in idx]


def _explicit(ops: Sequence[np.ndarray], label: str, weights=None) -> UnitaryEnsemble:
    if weights is None:
        weights = [1.0 / len(ops)] * len(ops)
    return UnitaryEnsemble(EXPLICIT, ops[0].shape[0], list(zip(weights, ops)), label=label)


def qubit_z_twirl() -> UnitaryEnsemble:
    return _explicit([I2, SZ], "z-twirl")


def full_qubit_twirl() -> UnitaryEnsemble:
    return _explicit([I2, SX, SZ, SXSZ], "full-qubit-twirl")


def pauli_member(n_qubits: int, index: int) -> np.ndarray:
    """Member ``index`` of the real Pauli group; qubit 0 is the leading base-4 digit."""
    digits = [(index // 4 ** (n_qubits - 1 - q)) % 4 for q in range(n_qubits)]
    return kron_all([REAL_PAULIS[g] for g in digits])


def real_pauli_group(n_qubits: int) -> UnitaryEnsemble:
    if n_qubits < 1:
        raise InvalidInputError(f"n_qubits must be positive, got {n_qubits}")
    check_dim(2**n_qubits, "real-pauli dimension")
    return UnitaryEnsemble(REAL_PAULI, 2**n_qubits, n_qubits=n_qubits, label="real-pauli")


def haar_orthogonal_ensemble(d: int) -> UnitaryEnsemble:
    check_dim(d, "haar-orthogonal dimension")
    return UnitaryEnsemble(HAAR_ORTHOGONAL, d, label="haar-orthogonal")


def z_pair(n: int) -> UnitaryEnsemble:
    """{I^{(x)n}, Z^{(x)n}} with equal weights; erases the imaginarity of |+i>^{(x)n}."""
    check_dim(2**n, "z-pair dimension")
    return _explicit([np.eye(2**n), kron_all([SZ] * n)], "z-pair")


def z_string_group(n: int) -> UnitaryEnsemble:
    """Uniform ensemble over the 2^n tensor products of {I, Z}."""
    check_dim(2**n, "z-string dimension")
    ops = [kron_all([SZ if b == "1" else I2 for b in format(k, f"0{n}b")]) for k in range(2**n)]
    return _explicit(ops, "z-string")


def exact_erasure_ensemble(rho) -> UnitaryEnsemble:
    """2^r sign-flip conjugations that make ``rho`` exactly real.

    With O from the skew canonical form of Im(rho), member b is
    O^T (I_{d-2r} (+) Z^{b_1} (+) ... (+) Z^{b_r}) O.
    """
    rho = validate_state(rho)
    d = rho.shape[0]
    im = ((rho - rho.T) / 2j).real
    form = skew_canonical_form(im)
    z = d - 2 * form.r
    ops = []
    for bits in itertools.product((0, 1), repeat=form.r):
        S = np.ones(d)
        for k, b in enumerate(bits):
            if b:
                S[z + 2 * k + 1] = -1.0
        ops.append(form.O.T @ (S[:, None] * form.O))
    return _explicit(ops, "exact-erasure")


def _conjugate(O: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return O @ rho @ O.conj().T


def apply_ensemble(rho, ens: UnitaryEnsemble) -> np.ndarray:
    """Sum_k w_k O_k rho O_k^T over the (materialised) ensemble."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (ens.dim, ens.dim):
        raise ShapeError(f"state shape {rho.shape} does not match ensemble dimension {ens.dim}")
    if ens.kind == REAL_PAULI:
        w = 1.0 / ens.size
        return sum(w * _pauli_conjugate(rho, ens.n_qubits, i) for i in range(ens.size))
    return sum(w * _conjugate(O, rho) for w, O in ens.materialize())


def _pauli_conjugate(rho: np.ndarray, n_qubits: int, index: int) -> np.ndarray:
    # P = (x)_q X^{a_q} Z^{b_q} is a signed permutation: P|j> = (-1)^{b.j} |j xor a>
    a = b = 0
    for q in range(n_qubits):
        g = (index // 4 ** (n_qubits - 1 - q)) % 4
        bit = 1 << (n_qubits - 1 - q)
        if g & 2:
            a |= bit
        if g & 1:
            b |= bit
    j = np.arange(2**n_qubits)
    src = j ^ a
    sign = 1.0 - 2.0 * (np.array([bin(x & b).count("1") & 1 for x in src]))
    return sign[:, None] * sign[None, :] * rho[np.ix_(src, src)]


def _resolve_kind(kind, d: int, n: int) -> UnitaryEnsemble:
    if isinstance(kind, UnitaryEnsemble):
        if kind.dim != d**n:
            raise ShapeError(f"ensemble dimension {kind.dim} does not match {d}^{n}")
        return kind
    if kind == REAL_PAULI:
        if d != 2:
            raise InvalidInputError("real-pauli sampling requires qubit states (d = 2)")
        return real_pauli_group(n)
    if kind == HAAR_ORTHOGONAL:
        return haar_orthogonal_ensemble(d**n)
    if kind == "z-pair":
        if d != 2:
            raise InvalidInputError("z-pair requires qubit states (d = 2)")
        return z_pair(n)
    if kind == "z-string":
        if d != 2:
            raise InvalidInputError("z-string requires qubit states (d = 2)")
        return z_string_group(n)
    raise InvalidInputError(f"unknown ensemble kind {kind!r}")


ENSEMBLE_KINDS = (REAL_PAULI, HAAR_ORTHOGONAL, "z-pair", "z-string")


def _twirl_members(ens: UnitaryEnsemble, rho_n: np.ndarray, N: int, seed: Seed):
    if ens.kind == REAL_PAULI:
        idx = ens.sample_indices(N, seed.rng())
        return sum(_pauli_conjugate(rho_n, ens.n_qubits, int(i)) for i in idx) / N
    return sum(_conjugate(O, rho_n) for O in ens.sample(N, seed)) / N


def sampled_twirl(rho, n: int, N: int, ens_kind, seed, exhaustive: bool = False):
    """Uniform average over N i.i.d. ensemble draws applied to rho^{(x)n}.

    Returns ``(state, imag_distance(state))``. With ``exhaustive`` the full
    finite ensemble is applied with its own weights instead of sampling.
    """
    rho = validate_state(rho)
    if n < 1 or N < 1:
        raise InvalidInputError("n and N must be positive")
    d = rho.shape[0]
    check_dim(d**n, "twirl dimension")
    ens = _resolve_kind(ens_kind, d, n)
    rho_n = tensor_power(rho, n)
    if exhaustive:
        out = apply_ensemble(rho_n, ens)
    else:
        out = _twirl_members(ens, rho_n, N, as_seed(seed))
    return out, imag_distance(out)


@dataclass
class ThresholdResult:
    n: int
    epsilon: float
    N_star: int
    rate: float
    trials: int
    quantile: float
    seed: Seed
    saturated: bool = False
    state_label: str = "rho"
    mode: str = "sampled"
    distance: float = float("nan")
    members: Optional[tuple] = None

    CSV_FIELDS = ("state_label", "n", "epsilon", "trials", "quantile", "N_star", "rate", "saturated", "seed")

    def row(self) -> list:
        return [self.state_label, self.n, repr(float(self.epsilon)), self.trials, repr(float(self.quantile)),
                self.N_star, repr(float(self.rate)), str(self.saturated).lower(), self.seed.master_seed]


def results_to_csv(results: Sequence[ThresholdResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ThresholdResult.CSV_FIELDS)
    for r in results:
        w.writerow(r.row())
    return buf.getvalue()


def _rate(N: int, n: int) -> float:
    return math.log2(N) / n


def threshold_rate(rho, n: int, epsilon: float, ens_kind=REAL_PAULI, trials: int = 32,
                   quantile: float = 0.5, seed=0, max_N: int = 4096,
                   label: str = "rho") -> ThresholdResult:
    """Smallest sampled ensemble size whose distance quantile is <= epsilon.

    N doubles from 1 until the ``quantile`` of ``imag_distance`` over
    ``trials`` seeded repetitions drops to ``epsilon``, then bisects between
    the last failure and first success. If no N up to the ensemble size (or
    ``max_N`` for the continuous sampler) succeeds, the result is flagged
    ``saturated``.
    """
    rho = validate_state(rho)
    if not 0 < epsilon < 2:
        raise InvalidInputError(f"epsilon must lie in (0, 2), got {epsilon}")
    if trials < 1 or not 0 < quantile <= 1:
        raise InvalidInputError("trials must be positive and quantile in (0, 1]")
    seed = as_seed(seed)
    d = rho.shape[0]
    check_dim(d**n, "twirl dimension")
    ens = _resolve_kind(ens_kind, d, n)
    rho_n = tensor_power(rho, n)
    limit = min(ens.size, max_N) if ens.size is not None else max_N

    cache: dict[int, float] = {}

    def stat(N: int) -> float:
        if N not in cache:
            dists = [imag_distance(_twirl_members(ens, rho_n, N, seed.derive(N, t))) for t in range(trials)]
            cache[N] = float(np.quantile(dists, quantile, method="inverted_cdf"))
        return cache[N]

    def result(N, saturated):
        return ThresholdResult(n=n, epsilon=epsilon, N_star=N, rate=_rate(N, n), trials=trials,
                               quantile=quantile, seed=seed, saturated=saturated, state_label=label,
                               distance=stat(N))

    if stat(1) <= epsilon:
        return result(1, False)
    lo, hi = 1, 2
    while stat(min(hi, limit)) > epsilon:
        if hi >= limit:
            return result(limit, True)
        lo, hi = hi, hi * 2
    hi = min(hi, limit)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if stat(mid) <= epsilon:
            hi = mid
        else:
            lo = mid
    return result(hi, False)


def exhaustive_threshold(rho, n: int, epsilon: float, pool="z-string", max_N: int = 4,
                         max_candidates: int = 200_000, label: str = "rho") -> ThresholdResult:
    """Deterministic search over uniform multisets drawn from a finite pool.

    For N = 1, 2, ... every size-N multiset of pool members is tried as a
    uniform ensemble; the first one with imag_distance <= epsilon certifies
    N_star. Saturates at ``max_N`` or when the candidate count would exceed
    ``max_candidates``.
    """
    rho = validate_state(rho)
    if not 0 < epsilon < 2:
        raise InvalidInputError(f"epsilon must lie in (0, 2), got {epsilon}")
    d = rho.shape[0]
    check_dim(d**n, "twirl dimension")
    ens = _resolve_kind(pool, d, n)
    if ens.size is None:
        raise InvalidInputError("exhaustive search needs a finite pool")
    rho_n = tensor_power(rho, n)
    if ens.kind == REAL_PAULI:
        images = [_pauli_conjugate(rho_n, ens.n_qubits, i) for i in range(ens.size)]
    else:
        images = [_conjugate(O, rho_n) for _, O in ens.materialize()]
    best = (math.inf, None)
    for N in range(1, max_N + 1):
        if math.comb(len(images) + N - 1, N) > max_candidates:
            break
        for combo in itertools.combinations_with_replacement(range(len(images)), N):
            dist = imag_distance(sum(images[i] for i in combo) / N)
            if dist < best[0]:
                best = (dist, combo)
            if dist <= epsilon:
                return ThresholdResult(n=n, epsilon=epsilon, N_star=N, rate=_rate(N, n), trials=1,
                                       quantile=1.0, seed=Seed(0), state_label=label, mode="exhaustive",
                                       distance=dist, members=combo)
    N = min(max_N, len(images))
    return ThresholdResult(n=n, epsilon=epsilon, N_star=N, rate=_rate(N, n), trials=1, quantile=1.0,
                           seed=Seed(0), saturated=True, state_label=label, mode="exhaustive",
                           distance=best[0], members=best[1])


def chernoff_sufficient_N(rho, n: int, delta: float) -> int:
    """ceil(2^(I_r(rho^{(x)n}) + 3 n delta))."""
    rho = validate_state(rho)
    if delta <= 0:
        raise InvalidInputError(f"delta must be positive, got {delta}")
    ir = max(rei(tensor_power(rho, n)), 0.0)
    x = 2.0 ** (ir + 3 * n * delta)
    # snap values within float noise of an integer
    if abs(x - round(x)) < 1e-9 * max(1.0, x):
        return int(round(x))
    return int(math.ceil(x))


def covariance_ok(ens: UnitaryEnsemble, tol: float = 1e-10, samples: int = 16, seed=0) -> bool:
    """Every member (or ``samples`` draws from a continuous sampler) is real orthogonal."""
    if ens.kind == HAAR_ORTHOGONAL:
        ops = ens.sample(samples, seed)
    else:
        ops = [O for _, O in ens.materialize()]
    return all(is_covariant_unitary(O, tol) for O in ops)
