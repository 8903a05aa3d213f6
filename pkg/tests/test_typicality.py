import csv
import io
import itertools
import math

import numpy as np
import pytest
from scipy.stats import binom

from imlab.errors import ResourceLimitError
from imlab.imaginarity import theta
from imlab.matcore import Seed, random_density, tensor_power
from imlab.typicality import (
    direct_part_floor,
    gentle_truncation_check,
    is_typical,
    typical_projector,
    typical_report_csv,
    typical_stats,
)

PLUS_I = np.array([[0.5, -0.5j], [0.5j, 0.5]])


def _enumerate(probs, n, delta):
    # oracle: every sequence, probability as an explicit product
    H = -sum(p * math.log2(p) for p in probs if p > 0)
    lo, hi = 2.0 ** (-n * (H + delta)), 2.0 ** (-n * (H - delta))
    members, mass = [], 0.0
    for seq in itertools.product(range(len(probs)), repeat=n):
        pr = math.prod(probs[i] for i in seq)
        if pr > 0 and lo * (1 - 1e-12) <= pr <= hi * (1 + 1e-12):
            members.append(seq)
            mass += pr
    return members, mass


def test_is_typical_examples():
    for d in (2, 3, 5):
        p = [1 / d] * d
        assert all(is_typical(s, p, 3, 0.01) for s in itertools.product(range(d), repeat=3))
    members, _ = _enumerate([0.75, 0.25], 4, 0.2)
    assert sorted(members) == sorted(set(itertools.permutations((0, 0, 0, 1))))
    assert len(set(members)) == 4
    got = [s for s in itertools.product(range(2), repeat=4) if is_typical(s, [0.75, 0.25], 4, 0.2)]
    assert sorted(got) == sorted(set(members))
    assert is_typical((0, 0, 0), [1.0, 0.0], 3, 0.1)
    assert not is_typical((0, 1, 0), [1.0, 0.0], 3, 0.1)


def test_typical_stats_golden():
    ts = typical_stats([0.75, 0.25], 4, 0.2)
    members, mass = _enumerate([0.75, 0.25], 4, 0.2)
    assert ts.member_count == len(members) == 4
    assert ts.mass == 0.421875 == mass


@pytest.mark.parametrize("probs,n,delta", [([0.6, 0.3, 0.1], 6, 0.15), ([0.5, 0.5], 9, 0.1),
                                           ([0.2, 0.8], 10, 0.3), ([0.1, 0.2, 0.3, 0.4], 4, 0.2)])
def test_typical_stats_matches_enumeration(probs, n, delta):
    ts = typical_stats(probs, n, delta)
    members, mass = _enumerate(probs, n, delta)
    assert ts.member_count == len(members)
    assert ts.mass == pytest.approx(mass, abs=1e-12)
    assert ts.member_count <= ts.count_bound


def test_typical_stats_uniform_mass_one():
    for n in (1, 10, 100):
        assert typical_stats([0.5, 0.5], n, 0.1).mass == 1.0


def test_typical_stats_binomial_oracle():
    # oracle: scipy binomial pmf over the window in "number of ones"
    p1 = 0.1
    H = -(0.9 * math.log2(0.9) + 0.1 * math.log2(0.1))
    for n in (50, 100, 200, 400):
        k = np.arange(n + 1)
        lp = (n - k) * math.log2(0.9) + k * math.log2(0.1)
        inside = (lp >= -n * (H + 0.1)) & (lp <= -n * (H - 0.1))
        expected = binom.pmf(k[inside], n, p1).sum()
        assert typical_stats([0.9, 0.1], n, 0.1).mass == pytest.approx(expected, abs=1e-10)


def test_typical_mass_approaches_one():
    masses = [typical_stats([0.9, 0.1], n, 0.1).mass for n in (50, 100, 200, 400, 800)]
    assert masses == sorted(masses)
    assert masses[-1] >= 0.99


def test_typical_stats_large_n_log_path():
    ts = typical_stats([0.9, 0.1], 5000, 0.1)
    assert ts.mass == pytest.approx(1.0, abs=1e-9)
    assert ts.log2_member_count <= ts.log2_count_bound


def test_typical_projector_examples():
    tp = typical_projector(np.eye(2) / 2, 3, 0.1)
    assert tp.D == 8 and tp.mu == 1.0 and np.allclose(tp.projector, np.eye(8))
    tp = typical_projector(np.diag([0.75, 0.25]), 4, 0.2)
    ts = typical_stats([0.75, 0.25], 4, 0.2)
    assert tp.D == ts.member_count == 4 and tp.mu == ts.mass == 0.421875
    assert tp.op_bound_ok and tp.pi_real
    tp = typical_projector(PLUS_I, 2, 0.1)
    assert tp.D == 1 and not tp.pi_real
    psi = np.kron([1, 1j], [1, 1j]) / 2
    assert np.allclose(tp.projector, np.outer(psi, psi.conj()))


@pytest.mark.parametrize("seed", range(6))
def test_typical_projector_invariants(seed):
    rho = random_density(2, Seed(3, seed))
    for n in (2, 4, 6):
        for delta in (0.1, 0.3):
            tp = typical_projector(rho, n, delta)
            P = tp.projector
            assert np.max(np.abs(P @ P - P)) <= 1e-10
            assert np.max(np.abs(P - P.conj().T)) <= 1e-10
            assert tp.D <= tp.dim_bound
            assert tp.op_bound_slack >= -1e-9
            ts = typical_stats(tp.eigenvalues, n, delta)
            assert ts.member_count == tp.D and ts.mass == tp.mu
            assert np.trace(P @ tensor_power(rho, n)).real == pytest.approx(tp.mu, abs=1e-10)


def test_typical_projector_diagonal_real():
    tp = typical_projector(theta(np.diag([0.6, 0.3, 0.1]).astype(complex)), 3, 0.2)
    assert tp.pi_real


def test_typical_projector_cap(monkeypatch):
    monkeypatch.setenv("IMLAB_DIM_CAP", "64")
    with pytest.raises(ResourceLimitError):
        typical_projector(np.eye(2) / 2, 7, 0.1)


def test_gentle_truncation_examples():
    lhs, _ = gentle_truncation_check(np.eye(2) / 2, 3, 0.1)
    assert lhs == 0.0
    lhs, bound = gentle_truncation_check(np.diag([0.75, 0.25]), 4, 0.2)
    # Pi commutes with the diagonal rho^4, so the gap is the discarded mass
    assert lhs == pytest.approx(0.578125, abs=1e-12)
    assert bound == pytest.approx(2 * math.sqrt(2 * 0.578125))
    assert lhs <= bound
    for k in range(5):
        rho = random_density(2, Seed(4, k))
        lhs, bound = gentle_truncation_check(rho, 6, 0.3)
        assert lhs <= bound


def test_direct_part_floor():
    for k in range(5):
        rho = random_density(2, Seed(6, k))
        for n in (2, 4):
            lhs, rhs = direct_part_floor(rho, n, 0.2)
            assert lhs >= rhs - 1e-12


def test_typical_report_csv():
    tp = typical_projector(np.diag([0.75, 0.25]), 4, 0.2)
    rows = list(csv.reader(io.StringIO(typical_report_csv([tp]))))
    assert rows[0] == ["d", "n", "delta", "D", "mass", "dim_bound", "op_bound_ok", "pi_real"]
    assert rows[1][:5] == ["2", "4", "0.2", "4", "0.421875"]
    assert rows[1][6:] == ["true", "true"]
