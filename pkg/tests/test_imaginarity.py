import csv
import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imlab.errors import InvalidInputError
from imlab.imaginarity import (
    imag_distance,
    is_covariant_unitary,
    is_real_operation,
    is_real_state,
    re_im_parts,
    rei,
    rei_min_form,
    rei_sequence,
    skew_canonical_form,
    theta,
    transpose_ref,
)
from imlab.matcore import Seed, haar_orthogonal, random_density, tensor_power, trace_norm, von_neumann_entropy

PLUS_I = np.array([[0.5, -0.5j], [0.5j, 0.5]])
SZ = np.diag([1.0, -1.0])
SX = np.array([[0, 1.0], [1.0, 0]])

seeds = st.integers(min_value=0, max_value=2**32)
dims = st.integers(min_value=2, max_value=6)


def random_real_state(d, seed):
    return theta(random_density(d, seed)).real.astype(complex)


def test_transpose_ref_examples():
    S = np.array([[1.0, 2.0], [2.0, 3.0]])
    assert np.array_equal(transpose_ref(S), S)
    assert np.allclose(transpose_ref(PLUS_I), np.array([[0.5, 0.5j], [-0.5j, 0.5]]))
    rho = random_density(2, 1)
    assert np.array_equal(transpose_ref(np.kron(rho, rho)), np.kron(rho.T, rho.T))


def test_theta_examples():
    sigma = random_real_state(3, 2)
    assert np.allclose(theta(sigma), sigma)
    assert np.allclose(theta(PLUS_I), np.eye(2) / 2)
    rho = random_density(4, 3)
    assert np.array_equal(theta(theta(rho)), theta(rho))


def test_re_im_parts_examples():
    sigma = random_real_state(3, 4)
    re, im = re_im_parts(sigma)
    assert np.allclose(re, sigma) and np.allclose(im, 0)
    re, im = re_im_parts(PLUS_I)
    assert np.allclose(re, np.eye(2) / 2)
    assert np.allclose(im, [[0, -0.5], [0.5, 0]])
    rho = random_density(5, 5)
    re, im = re_im_parts(rho)
    assert np.max(np.abs(im + im.T)) <= 1e-12
    assert np.max(np.abs(re + 1j * im - rho)) <= 1e-12


def test_is_real_state_examples():
    assert is_real_state(np.diag([0.2, 0.3, 0.5]))
    assert not is_real_state(PLUS_I, 1e-6)
    assert is_real_state(theta(random_density(4, 6)), 1e-10)


def test_is_real_operation_examples():
    assert is_real_operation([np.eye(2)])
    assert not is_real_operation([np.diag([1, 1j])])
    assert is_real_operation([np.diag([1.0, 0]), np.diag([0, 1.0])])
    assert not is_real_operation([np.diag([1.0, 0])])  # incomplete


def test_is_covariant_unitary_examples():
    assert is_covariant_unitary(SZ)
    assert not is_covariant_unitary(np.diag([1, 1j]))
    assert is_covariant_unitary(SX @ SZ)
    assert np.allclose(SX @ SZ, [[0, -1], [1, 0]])


def test_rei_examples():
    assert rei(random_real_state(3, 7)) == pytest.approx(0.0, abs=1e-10)
    assert rei(PLUS_I) == pytest.approx(1.0, abs=1e-12)
    for i in range(20):
        rho = random_density(2 + i % 5, Seed(8, i))
        assert abs(rei(rho) - rei_min_form(rho)) <= 1e-8


def _rei_by_minimisation_grid(rho, steps=201):
    # brute-force min over real qubit states sigma = (I + x X + z Z)/2
    best = np.inf
    for x in np.linspace(-1, 1, steps):
        for z in np.linspace(-1, 1, steps):
            r2 = x * x + z * z
            if r2 > (1 - 1e-6) ** 2:
                continue
            sigma = (np.eye(2) + x * SX + z * SZ) / 2
            lam, V = np.linalg.eigh(sigma)
            log_sigma = (V * np.log2(lam)) @ V.T
            val = -von_neumann_entropy(rho) - np.trace(rho @ log_sigma).real
            best = min(best, val)
    return best


def test_rei_matches_minimisation_over_real_states():
    rho = random_density(2, 31)
    grid = _rei_by_minimisation_grid(rho)
    # the grid minimum can only sit above the true minimum
    assert rei(rho) <= grid + 1e-12
    assert grid - rei(rho) < 1e-3


def test_rei_sequence_examples():
    seq = rei_sequence(random_real_state(2, 9), 3)
    assert np.allclose(seq.rei_values, 0, atol=1e-10)
    seq = rei_sequence(PLUS_I, 3, "plus-i")
    assert seq.ns == [1, 2, 3]
    assert np.allclose(seq.rei_values, [1, 1, 1], atol=1e-12)
    assert np.allclose(seq.per_copy, [1, 0.5, 1 / 3], atol=1e-12)
    rows = list(csv.reader(io.StringIO(seq.to_csv())))
    assert rows[0] == ["n", "rei", "rei_per_copy"]
    assert [float(x) for x in rows[2]] == [2.0, 1.0, 0.5]


def test_rei_sequence_brute_force_theta():
    # oracle: Theta(P^n) built from explicit Kronecker products of |+i>, |-i>
    plus = np.array([1, 1j]) / np.sqrt(2)
    minus = plus.conj()
    for n in (1, 2, 3):
        P = tensor_power(np.outer(plus, plus.conj()), n)
        Q = tensor_power(np.outer(minus, minus.conj()), n)
        assert np.allclose(theta(tensor_power(PLUS_I, n)), (P + Q) / 2)
        assert abs(np.trace(P @ Q)) < 1e-12
        assert von_neumann_entropy((P + Q) / 2) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 5))
def test_rei_power_bounded_by_one(s, n):
    seq = rei_sequence(random_density(2, s), n)
    assert max(seq.rei_values) <= 1 + 1e-9
    assert min(seq.rei_values) >= -1e-9


def test_imag_distance_examples():
    assert imag_distance(random_real_state(3, 10)) == pytest.approx(0.0, abs=1e-12)
    assert imag_distance(PLUS_I) == pytest.approx(1.0, abs=1e-12)


def test_imag_distance_sandwich_grid():
    # oracle: grid search over the real qubit states
    xs = np.linspace(-1, 1, 161)
    real_states = [(np.eye(2) + x * SX + z * SZ) / 2 for x, z in itertools.product(xs, xs) if x * x + z * z <= 1]
    for i in range(6):
        rho = random_density(2, Seed(12, i))
        true_min = min(trace_norm(rho - s) for s in real_states)
        dist = imag_distance(rho)
        assert dist / 2 - 1e-9 <= true_min <= dist + 0.02


def test_skew_canonical_examples():
    form = skew_canonical_form(np.zeros((3, 3)))
    assert form.r == 0 and np.allclose(form.O, np.eye(3))
    J = np.array([[0, 1.0], [-1.0, 0]])
    form = skew_canonical_form(0.7 * J)
    assert form.r == 1 and form.lambdas[0] == pytest.approx(0.7)
    assert np.allclose(form.O, np.eye(2))
    _, im = re_im_parts(random_density(5, 13))
    form = skew_canonical_form(im)
    assert form.residual(im) <= 1e-9 and form.r <= 2
    assert np.allclose(form.O @ form.O.T, np.eye(5), atol=1e-12)


def test_skew_canonical_rejects_symmetric():
    with pytest.raises(InvalidInputError):
        skew_canonical_form(np.eye(2))


# -- invariants ------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(seeds, dims)
def test_theta_projection_and_realness(s, d):
    rho = random_density(d, s)
    assert np.array_equal(theta(theta(rho)), theta(rho))
    assert is_real_state(theta(rho), 1e-10)


@settings(max_examples=50, deadline=None)
@given(seeds, dims)
def test_theta_covariance(s, d):
    rng = Seed(s, 0).rng()
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    O = haar_orthogonal(d, Seed(s, 1))
    assert is_covariant_unitary(O)
    assert trace_norm(theta(O @ X @ O.T) - O @ theta(X) @ O.T) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(seeds, dims)
def test_free_state_preservation(s, d):
    sigma = random_real_state(d, Seed(s, 0))
    O = haar_orthogonal(d, Seed(s, 1))
    assert is_real_state(O @ sigma @ O.T, 1e-10)


@settings(max_examples=50, deadline=None)
@given(seeds, dims)
def test_rei_nonnegative_and_zero_iff_real(s, d):
    rho = random_density(d, Seed(s, 0))
    assert rei(rho) >= -1e-9
    assert (abs(rei(rho)) <= 1e-9) == is_real_state(rho, 1e-8)
    sigma = random_real_state(d, Seed(s, 1))
    assert abs(rei(sigma)) <= 1e-9 and is_real_state(sigma, 1e-8)


@settings(max_examples=50, deadline=None)
@given(seeds, dims)
def test_minimiser_identity(s, d):
    rho = random_density(d, s)
    assert abs(rei(rho) - rei_min_form(rho)) <= 1e-8


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(2, 7))
def test_skew_lambdas_match_spectrum(s, d):
    _, im = re_im_parts(random_density(d, s))
    form = skew_canonical_form(im)
    spectrum = np.sort(np.linalg.eigvalsh(1j * im))[::-1]
    positive = spectrum[spectrum > 1e-10]
    assert form.r == len(positive) <= d // 2
    assert np.allclose(form.lambdas, positive, atol=1e-10)
    assert form.residual(im) <= 1e-9
