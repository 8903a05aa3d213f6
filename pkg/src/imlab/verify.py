"""Numerical checks of the entropy lemmas and the converse chain.

Each ``check_*`` function evaluates one instance and returns a
:class:`LemmaCheck` whose ``margin`` is the slack of the inequality (negative
means violated). ``run_suite`` fans a check out over seeded random instances
and folds the results into a :class:`LemmaReport`.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidInputError, ShapeError
from .imaginarity import is_covariant_unitary, theta
from .matcore import (
    _haar_orthogonal,
    as_seed,
    check_dim,
    purify,
    random_density,
    sqrtm_psd,
    tensor_power,
    trace_norm,
    validate_state,
    von_neumann_entropy,
)
from .protocols import UnitaryEnsemble, _explicit, apply_ensemble
from .typicality import typical_projector

SLACK = 1e-8
GENTLE_RANDOM_STATES = 4
INV_E = 1.0 / math.e


@dataclass
class LemmaCheck:
    lemma_id: str
    margin: float
    values: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.margin >= -SLACK


@dataclass
class LemmaReport:
    lemma_id: str
    samples: int
    violations: int
    worst_margin: float
    seed: int
    config: dict
    runtime_ms: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "lemma_id": self.lemma_id,
            "samples": self.samples,
            "violations": self.violations,
            "worst_margin": self.worst_margin,
            "seed": self.seed,
            "config": self.config,
        }
        if self.extra:
            out["extra"] = self.extra
        if include_timing:
            out["runtime_ms"] = self.runtime_ms
        return out


# ---------------------------------------------------------------------------
# Fannes


def fannes_eta(x: float) -> float:
    """x - x log2 x below the 1/e breakpoint, x + 1/e above it."""
    if x < 0:
        raise InvalidInputError(f"eta is defined for x >= 0, got {x}")
    if x == 0:
        return 0.0
    if x <= INV_E:
        return x - x * math.log2(x)
    return x + INV_E


def check_fannes(rho, sigma) -> LemmaCheck:
    rho = validate_state(rho)
    sigma = validate_state(sigma)
    if rho.shape != sigma.shape:
        raise ShapeError("states must have equal dimension")
    eps = trace_norm(rho - sigma)
    gap = abs(von_neumann_entropy(rho) - von_neumann_entropy(sigma))
    bound = fannes_eta(eps) * math.log2(rho.shape[0])
    return LemmaCheck("fannes", bound - gap, {"eps": eps, "gap": gap, "bound": bound})


# ---------------------------------------------------------------------------
# gentle measurement


def check_gentle(rho, X) -> LemmaCheck:
    """||rho - sqrt(X) rho sqrt(X)||_1 <= 2 sqrt(2 eps) with eps = 1 - tr(rho X).

    The literal bound ``2 sqrt(2) eps`` is recorded in ``values`` for
    diagnostics only.
    """
    rho = validate_state(rho)
    X = np.asarray(X, dtype=complex)
    if X.shape != rho.shape:
        raise ShapeError("X must match the state dimension")
    if np.max(np.abs(X - X.conj().T)) > 1e-10:
        raise InvalidInputError("X must be Hermitian")
    eig = np.linalg.eigvalsh(X)
    if eig.min() < -1e-10 or eig.max() > 1 + 1e-10:
        raise InvalidInputError("X must satisfy 0 <= X <= I")
    eps = max(0.0, 1.0 - float(np.real(np.trace(rho @ X))))
    R = sqrtm_psd(X)
    lhs = trace_norm(rho - R @ rho @ R)
    bound = 2.0 * math.sqrt(2.0 * eps)
    literal = 2.0 * math.sqrt(2.0) * eps
    return LemmaCheck("gentle", bound - lhs,
                      {"eps": eps, "lhs": lhs, "bound": bound, "literal_bound": literal,
                       "literal_margin": literal - lhs})


# ---------------------------------------------------------------------------
# Theta-entropy lemmas


def check_l4(rho) -> LemmaCheck:
    """S(Theta(rho)) >= S(rho)."""
    rho = validate_state(rho)
    s, st = von_neumann_entropy(rho), von_neumann_entropy(theta(rho))
    return LemmaCheck("l4", st - s, {"S": s, "S_theta": st})


def check_l6(rho, O) -> LemmaCheck:
    """S(Theta(O rho O^T)) = S(Theta(rho)) for real orthogonal O."""
    rho = validate_state(rho)
    O = np.asarray(O)
    if O.shape != rho.shape:
        raise ShapeError("O must match the state dimension")
    if not is_covariant_unitary(O, 1e-10):
        raise InvalidInputError("O is not a covariant (real orthogonal) unitary")
    a = von_neumann_entropy(theta(O @ rho @ O.conj().T))
    b = von_neumann_entropy(theta(rho))
    return LemmaCheck("l6", -abs(a - b), {"S_theta_rotated": a, "S_theta": b})


# ---------------------------------------------------------------------------
# converse chain


def _reduced(T: np.ndarray, keep: list[int]) -> np.ndarray:
    # reduced density matrix of the pure state with amplitude tensor T
    rest = [a for a in range(T.ndim) if a not in keep]
    dk = math.prod(T.shape[a] for a in keep)
    M = np.transpose(T, keep + rest).reshape(dk, -1)
    return M @ M.conj().T


def purified_twirl_state(rho, ens: UnitaryEnsemble, n: int) -> np.ndarray:
    """Amplitude tensor of sum_k sqrt(w_k) |k>_E (x) (O_k (x) I_Z)|psi>^{(x)n}.

    Axes are (E, A^n, Z^n). For a uniform ensemble sqrt(w_k) = 1/sqrt(N).
    """
    rho = validate_state(rho)
    d = rho.shape[0]
    if ens.dim != d**n:
        raise ShapeError(f"ensemble dimension {ens.dim} does not match {d}^{n}")
    psi = purify(rho)
    r = psi.size // d
    members = ens.materialize()
    check_dim(len(members) * d**n * r**n, "purified twirl dimension")
    T = psi.reshape(d, r)
    for _ in range(n - 1):
        T = np.einsum("ab,cd->acbd", T, psi.reshape(d, r)).reshape(T.shape[0] * d, T.shape[1] * r)
    out = np.stack([math.sqrt(w) * (O @ T) for w, O in members])
    return out


def converse_chain(rho, ens: UnitaryEnsemble, n: int = 1) -> dict:
    """Entropies of the purified twirl and the converse inequalities they satisfy."""
    rho = validate_state(rho)
    T = purified_twirl_state(rho, ens, n)
    N = T.shape[0]
    S_E = von_neumann_entropy(_reduced(T, [0]))
    S_A = von_neumann_entropy(_reduced(T, [1]))
    S_Z = von_neumann_entropy(_reduced(T, [2]))
    S_EZ = von_neumann_entropy(_reduced(T, [0, 2]))
    S_rho = von_neumann_entropy(rho)
    out_state = apply_ensemble(tensor_power(rho, n), ens)
    S_out = von_neumann_entropy(out_state)
    logN = math.log2(N)
    margins = {
        "logN_ge_SE": logN - S_E,
        "SE_ge_SEZ_minus_SZ": S_E - (S_EZ - S_Z),
        "SEZ_eq_SA": -abs(S_EZ - S_A),
        "SA_eq_Sout": -abs(S_A - S_out),
        "SZ_eq_nS": -abs(S_Z - n * S_rho),
        "logN_ge_Sout_minus_nS": logN - (S_out - n * S_rho),
    }
    return {
        "n": n,
        "N": N,
        "logN": logN,
        "S_E": S_E,
        "S_A": S_A,
        "S_Z": S_Z,
        "S_EZ": S_EZ,
        "S_out": S_out,
        "nS_rho": n * S_rho,
        "margins": margins,
        "ok": all(m >= -SLACK for m in margins.values()),
    }


def check_converse(rho, ens: UnitaryEnsemble, n: int = 1) -> LemmaCheck:
    rep = converse_chain(rho, ens, n)
    return LemmaCheck("converse", min(rep["margins"].values()), rep)


def concavity_step_check(rho, ens: UnitaryEnsemble, n: int = 1) -> LemmaCheck:
    """S(Theta(avg_k O_k r O_k^T)) >= avg_k S(Theta(O_k r O_k^T)) >= S(Theta(r)), r = rho^n."""
    rho_n = tensor_power(validate_state(rho), n)
    if ens.dim != rho_n.shape[0]:
        raise ShapeError("ensemble dimension does not match rho^n")
    members = ens.materialize()
    top = von_neumann_entropy(theta(apply_ensemble(rho_n, ens)))
    mid = sum(w * von_neumann_entropy(theta(O @ rho_n @ O.conj().T)) for w, O in members)
    low = von_neumann_entropy(theta(rho_n))
    return LemmaCheck("concavity", min(top - mid, mid - low), {"top": top, "mid": mid, "low": low})


def random_covariant_ensemble(dim: int, size: int, seed) -> UnitaryEnsemble:
    rng = as_seed(seed).rng()
    return _explicit([_haar_orthogonal(dim, rng) for _ in range(size)], "haar-sample")


# ---------------------------------------------------------------------------
# operator Chernoff


@dataclass
class ChernoffReport:
    d: int
    N: int
    mu: float
    epsilon: float
    trials: int
    empirical_failures: int
    lower_failures: int
    upper_failures: int
    bound: float
    generator: str
    seed: int

    @property
    def frequency(self) -> float:
        return self.empirical_failures / self.trials

    @property
    def margin(self) -> float:
        b = min(self.bound, 1.0)
        return 3.0 * math.sqrt(b * (1.0 - b) / self.trials)

    @property
    def ok(self) -> bool:
        if self.bound > 1:
            return True
        return self.frequency <= self.bound + self.margin

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(frequency=self.frequency, confidence_margin=self.margin, ok=self.ok)
        return out


CHERNOFF_GENERATORS = ("projector", "haar-conjugation")


def _chernoff_batch(generator: str, d: int, N: int, rng: np.random.Generator, seed_op: np.ndarray):
    if generator == "projector":
        v = rng.standard_normal((N, d)) + 1j * rng.standard_normal((N, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return np.einsum("ki,kj->ij", v, v.conj()) / N
    total = np.zeros((d, d), dtype=complex)
    for _ in range(N):
        O = _haar_orthogonal(d, rng)
        total += O @ seed_op @ O.T
    return total / N


def chernoff_experiment(d: int, N: int, trials: int, epsilon: float, generator: str = "projector",
                        seed=0) -> ChernoffReport:
    """Count batches whose mean leaves [(1 - eps) M, (1 + eps) M].

    ``projector``: Haar-random rank-1 projectors, M = I/d, mu = 1/d.
    ``haar-conjugation``: O X0 O^T with X0 = diag(1, ..., 1/d) fixed,
    M = tr(X0)/d I.
    """
    if generator not in CHERNOFF_GENERATORS:
        raise InvalidInputError(f"unknown generator {generator!r}; choose from {CHERNOFF_GENERATORS}")
    if d < 1 or N < 1 or trials < 1:
        raise InvalidInputError("d, N and trials must be positive")
    if not 0 <= epsilon <= 1:
        raise InvalidInputError(f"epsilon must lie in [0, 1], got {epsilon}")
    seed = as_seed(seed)
    if generator == "projector":
        seed_op = None
        mu = 1.0 / d
    else:
        seed_op = np.diag(np.linspace(1.0, 1.0 / d, d)).astype(complex)
        mu = float(np.trace(seed_op).real) / d
    M = mu * np.eye(d)
    lower = upper = failures = 0
    for t in range(trials):
        Xbar = _chernoff_batch(generator, d, N, seed.derive(t).rng(), seed_op)
        lo = np.linalg.eigvalsh(Xbar - (1 - epsilon) * M).min() < -1e-10
        hi = np.linalg.eigvalsh((1 + epsilon) * M - Xbar).min() < -1e-10
        lower += lo
        upper += hi
        failures += lo or hi
    bound = 2 * d * math.exp(-N * mu * epsilon**2 / 2)
    return ChernoffReport(d=d, N=N, mu=mu, epsilon=epsilon, trials=trials, empirical_failures=int(failures),
                          lower_failures=int(lower), upper_failures=int(upper), bound=bound,
                          generator=generator, seed=seed.master_seed)


# ---------------------------------------------------------------------------
# suites

SUITES = ("fannes", "gentle", "l4", "l6", "converse", "concavity")

_SUITE_INDEX = {name: k for k, name in enumerate(SUITES)}


def _fannes_instances(samples, dims, seed):
    for i in range(samples):
        d = dims[i % len(dims)]
        s = seed.derive(i)
        rho = random_density(d, s.derive(0))
        # mix toward rho so small distances are exercised too
        t = s.rng().uniform() ** 3
        sigma = (1 - t) * rho + t * random_density(d, s.derive(1))
        yield check_fannes(rho, sigma)


def _gentle_instances(samples, dims, seed):
    states = [np.diag([0.75, 0.25]), np.diag([0.9, 0.1])]
    states += [random_density(2, seed.derive(i)) for i in range(min(samples, GENTLE_RANDOM_STATES))]
    for rho in states:
        for n in range(1, 9):
            for delta in (0.1, 0.2, 0.3):
                tp = typical_projector(rho, n, delta)
                rho_n = tensor_power(rho, n)
                yield check_gentle(rho_n, tp.projector)


def _l4_instances(samples, dims, seed):
    for i in range(samples):
        yield check_l4(random_density(dims[i % len(dims)], seed.derive(i)))


def _l6_instances(samples, dims, seed):
    for i in range(samples):
        d = dims[i % len(dims)]
        s = seed.derive(i)
        yield check_l6(random_density(d, s.derive(0)), _haar_orthogonal(d, s.derive(1).rng()))


def _converse_instances(samples, dims, seed, n=2, size=4):
    for i in range(samples):
        s = seed.derive(i)
        rho = random_density(2, s.derive(0))
        yield check_converse(rho, random_covariant_ensemble(2**n, size, s.derive(1)), n)


def _concavity_instances(samples, dims, seed, n=2, size=4):
    for i in range(samples):
        s = seed.derive(i)
        rho = random_density(2, s.derive(0))
        yield concavity_step_check(rho, random_covariant_ensemble(2**n, size, s.derive(1)), n)


_GENERATORS = {
    "fannes": _fannes_instances,
    "gentle": _gentle_instances,
    "l4": _l4_instances,
    "l6": _l6_instances,
    "converse": _converse_instances,
    "concavity": _concavity_instances,
}


def run_suite(name: str, samples: int = 1000, dims=(2, 3, 4, 5, 6), seed=0) -> LemmaReport:
    """Run one lemma suite over seeded random instances.

    ``converse`` and ``concavity`` always use qubit states with n = 2 and
    four Haar-orthogonal members. ``gentle`` walks the typicality grid
    (n <= 8, delta in {0.1, 0.2, 0.3}) for two diagonal states plus at
    most ``GENTLE_RANDOM_STATES`` random qubit states; its literal-constant violations are
    reported in ``extra`` and do not count as failures.
    """
    if name not in _GENERATORS:
        raise InvalidInputError(f"unknown suite {name!r}; choose from {SUITES}")
    dims = tuple(int(x) for x in dims)
    if not dims or any(x < 1 for x in dims):
        raise InvalidInputError("dims must be a non-empty list of positive integers")
    seed = as_seed(seed)
    sub = seed.derive(_SUITE_INDEX[name])
    t0 = time.perf_counter()
    checks = list(_GENERATORS[name](samples, dims, sub))
    runtime = (time.perf_counter() - t0) * 1e3
    violations = sum(not c.ok for c in checks)
    worst = min((c.margin for c in checks), default=0.0)
    config = {"dims": list(dims), "slack": SLACK}
    extra = {}
    if name == "fannes":
        config.update(eta_log_base=2, eta_breakpoint="1/e")
    if name == "gentle":
        config.update(bound="2*sqrt(2*eps)", literal_bound="2*sqrt(2)*eps")
        extra["literal_violations"] = sum(c.values["literal_margin"] < -SLACK for c in checks)
    if name in ("converse", "concavity"):
        config.update(d=2, n=2, ensemble_size=4)
    return LemmaReport(lemma_id=name, samples=len(checks), violations=violations, worst_margin=worst,
                       seed=seed.master_seed, config=config, runtime_ms=runtime, extra=extra)


def run_all(samples: int = 1000, dims=(2, 3, 4, 5, 6), seed=0) -> list[LemmaReport]:
    return [run_suite(name, samples, dims, seed) for name in SUITES]
