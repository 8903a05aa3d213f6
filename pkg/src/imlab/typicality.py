"""delta-typical sets (classical, by composition class) and typical subspaces."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .errors import InvalidInputError
from .imaginarity import is_real_state
from .matcore import (
    EIG_CLIP,
    check_dim,
    eigh_sorted,
    shannon_entropy,
    tensor_power,
    trace_norm,
    validate_state,
    von_neumann_entropy,
)

# exact rational accumulation below this many copies, log-space fsum above
EXACT_MASS_MAX_N = 2000


def _check_probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or abs(p.sum() - 1) > 1e-10:
        raise InvalidInputError(f"not a probability vector: {probs!r}")
    return p


def _window(probs: np.ndarray, n: int, delta: float) -> tuple[float, float]:
    H = shannon_entropy(probs)
    return -n * (H + delta), -n * (H - delta)


def _log2p(probs: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(probs > 0, np.log2(np.where(probs > 0, probs, 1.0)), -np.inf)


def _composition_logp(counts: Sequence[int], logp: np.ndarray) -> float:
    total = 0.0
    for k, lp in zip(counts, logp):
        if k:
            if lp == -np.inf:
                return -math.inf
            total += k * lp
    return total


def _in_window(lp: float, lo: float, hi: float) -> bool:
    # a few ulps of slack so sequences sitting exactly on a boundary count
    slack = 1e-12 * max(1.0, abs(lo), abs(hi))
    return lo - slack <= lp <= hi + slack


def is_typical(seq: Sequence[int], probs, n: int, delta: float) -> bool:
    """2^{-n(H+delta)} <= prod_i p_{seq_i} <= 2^{-n(H-delta)}, H in bits."""
    p = _check_probs(probs)
    if len(seq) != n:
        raise InvalidInputError(f"sequence length {len(seq)} != n = {n}")
    if delta <= 0:
        raise InvalidInputError(f"delta must be positive, got {delta}")
    counts = np.bincount(np.asarray(seq, dtype=int), minlength=p.size)
    if counts.size > p.size:
        raise InvalidInputError("sequence symbol outside the alphabet")
    lp = _composition_logp(counts, _log2p(p))
    lo, hi = _window(p, n, delta)
    return lp != -math.inf and _in_window(lp, lo, hi)


def compositions(n: int, d: int) -> Iterator[tuple[int, ...]]:
    """All (k_1..k_d) with sum n, in lexicographic order."""
    if d == 1:
        yield (n,)
        return
    for k in range(n + 1):
        for rest in compositions(n - k, d - 1):
            yield (k,) + rest


def multinomial(counts: Sequence[int]) -> int:
    out, total = 1, 0
    for k in counts:
        total += k
        out *= math.comb(total, k)
    return out


@dataclass
class TypicalSet:
    probs: tuple
    n: int
    delta: float
    member_count: int
    mass: float

    @property
    def log2_count_bound(self) -> float:
        return self.n * (shannon_entropy(self.probs) + self.delta)

    @property
    def count_bound(self) -> float:
        try:
            return 2.0 ** self.log2_count_bound
        except OverflowError:
            return math.inf

    @property
    def log2_member_count(self) -> float:
        return math.log2(self.member_count) if self.member_count else -math.inf


def typical_classes(probs, n: int, delta: float) -> list[tuple[int, ...]]:
    p = _check_probs(probs)
    lo, hi = _window(p, n, delta)
    logp = _log2p(p)
    out = []
    for c in compositions(n, p.size):
        lp = _composition_logp(c, logp)
        if lp != -math.inf and _in_window(lp, lo, hi):
            out.append(c)
    return out


def _class_mass(classes, probs: np.ndarray, n: int) -> float:
    if n <= EXACT_MASS_MAX_N:
        fp = [Fraction(float(x)) for x in probs]
        total = Fraction(0)
        for c in classes:
            term = Fraction(multinomial(c))
            for k, q in zip(c, fp):
                if k:
                    term *= q**k
            total += term
        return float(total)
    logs = []
    for c in classes:
        lg = math.lgamma(n + 1) - sum(math.lgamma(k + 1) for k in c)
        lg += sum(k * math.log(q) for k, q in zip(c, probs) if k)
        logs.append(lg)
    return math.fsum(math.exp(x) for x in logs)


def typical_stats(probs, n: int, delta: float) -> TypicalSet:
    """Exact size and probability mass of the delta-typical set by composition class."""
    p = _check_probs(probs)
    if n < 1 or delta <= 0:
        raise InvalidInputError("n must be positive and delta > 0")
    classes = typical_classes(p, n, delta)
    count = sum(multinomial(c) for c in classes)
    return TypicalSet(tuple(float(x) for x in p), n, delta, count, _class_mass(classes, p, n))


@dataclass
class TypicalProjector:
    n: int
    delta: float
    basis_indices: list
    projector: np.ndarray
    D: int
    mu: float
    eigenbasis: np.ndarray
    eigenvalues: np.ndarray
    entropy: float
    op_bound_slack: float
    pi_real: bool

    @property
    def dim_bound(self) -> float:
        return 2.0 ** (self.n * (self.entropy + self.delta))

    @property
    def op_bound_ok(self) -> bool:
        return self.op_bound_slack >= -1e-9

    CSV_FIELDS = ("d", "n", "delta", "D", "mass", "dim_bound", "op_bound_ok", "pi_real")

    def row(self) -> list:
        return [self.eigenbasis.shape[0], self.n, repr(float(self.delta)), self.D, repr(float(self.mu)),
                repr(float(self.dim_bound)), str(self.op_bound_ok).lower(), str(self.pi_real).lower()]


def typical_report_csv(projs: Sequence[TypicalProjector]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TypicalProjector.CSV_FIELDS)
    for t in projs:
        w.writerow(t.row())
    return buf.getvalue()


def _eigensystem(rho: np.ndarray):
    off = rho - np.diag(np.diag(rho))
    if np.max(np.abs(off), initial=0.0) <= 1e-14:
        # diagonal in the reference basis: keep that basis so Pi is real
        return np.clip(np.diag(rho).real, 0, None), np.eye(rho.shape[0], dtype=complex)
    lam, V = eigh_sorted(rho)
    return np.clip(lam, 0, None), V


def typical_projector(rho, n: int, delta: float) -> TypicalProjector:
    """Projector onto the span of eigenbasis product states with typical index sequences."""
    rho = validate_state(rho)
    if n < 1 or delta <= 0:
        raise InvalidInputError("n must be positive and delta > 0")
    d = rho.shape[0]
    check_dim(d**n, "typical subspace ambient dimension")
    lam, V = _eigensystem(rho)
    lam[lam <= EIG_CLIP] = 0.0
    lam = lam / lam.sum()
    classes = set(typical_classes(lam, n, delta))
    seqs = [s for s in itertools.product(range(d), repeat=n)
            if tuple(np.bincount(s, minlength=d)) in classes]
    # columns of V^{(x)n} are indexed by sequences in lexicographic order
    cols = [int(np.ravel_multi_index(s, (d,) * n)) for s in seqs]
    Vn = tensor_power(V, n)
    B = Vn[:, cols]
    Pi = B @ B.conj().T
    rho_n = tensor_power(rho, n)
    S = von_neumann_entropy(rho)
    squeezed = Pi @ rho_n @ Pi
    slack = float(np.linalg.eigvalsh(Pi - 2.0 ** (n * (S - delta)) * squeezed).min()) if cols else 0.0
    mu = _class_mass(sorted(classes), lam, n)
    D = len(cols)
    pi_real = bool(D > 0 and is_real_state(Pi / D, 1e-10))
    return TypicalProjector(n=n, delta=delta, basis_indices=seqs, projector=Pi, D=D, mu=mu,
                            eigenbasis=V, eigenvalues=lam, entropy=S, op_bound_slack=slack,
                            pi_real=pi_real)


def gentle_truncation_check(rho, n: int, delta: float) -> tuple[float, float]:
    """(||rho^n - Pi rho^n Pi||_1, 2 sqrt(2 (1 - mu))) for the typical projector Pi."""
    tp = typical_projector(rho, n, delta)
    rho_n = tensor_power(validate_state(rho), n)
    lhs = trace_norm(rho_n - tp.projector @ rho_n @ tp.projector)
    eps = max(0.0, 1.0 - tp.mu)
    return lhs, 2.0 * math.sqrt(2.0 * eps)


def direct_part_floor(rho, n: int, delta: float) -> tuple[float, float]:
    """(D' mu / D, (1 - eps) 2^{-(I_r(rho^n) + 2 n delta)}) with D' = 2^{n(S - delta)}, eps = 1 - mu.

    The first entry is the smallest nonzero eigenvalue of the flattened,
    rescaled truncated state; it should dominate the second.
    """
    from .imaginarity import rei

    tp = typical_projector(rho, n, delta)
    if tp.D == 0:
        return 0.0, 0.0
    d_prime = 2.0 ** (n * (tp.entropy - delta))
    ir = rei(tensor_power(validate_state(rho), n))
    return d_prime * tp.mu / tp.D, tp.mu * 2.0 ** (-(ir + 2 * n * delta))
