from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import ldl

from _factories import random_factor
from _golden import assert_csv_matches
from confspec.conformal import ConformalFactor
from confspec.spectrum import (
    NotPositiveDefiniteError,
    SpectralProblem,
    TruncationError,
    assemble_block,
    compute_spectrum,
    harmonic_dimension,
    lambda_k,
    merge_spectrum,
    round_box_eigenvalues,
    solve_block,
)

DATA = Path(__file__).parent / "data"
ONE = ConformalFactor.constant(3)


def count_below(S, M, sigma):
    """Eigenvalues of the pencil below ``sigma``: negative inertia of ``S - sigma M``."""
    _, D, _ = ldl(S - sigma * M)
    ev = []
    i = 0
    while i < len(D):
        if i + 1 < len(D) and D[i + 1, i] != 0:
            ev.extend(np.linalg.eigvalsh(D[i:i + 2, i:i + 2]))
            i += 2
        else:
            ev.append(D[i, i])
            i += 1
    return int(np.sum(np.array(ev) < 0))


def bisection_eigenvalues(S, M, lo, hi, tol=1e-12):
    out = []
    for k in range(len(S)):
        a, b = lo, hi
        while b - a > tol * max(1.0, abs(b)):
            mid = 0.5 * (a + b)
            if count_below(S, M, mid) > k:
                b = mid
            else:
                a = mid
        out.append(0.5 * (a + b))
    return np.array(out)


def test_round_box_examples():
    vals = round_box_eigenvalues(3, 3)
    assert vals[:3] == [(0.75, 1), (3.75, 4), (8.75, 9)]
    assert vals[3][1] == 16
    assert [harmonic_dimension(2, j) for j in range(4)] == [1, 3, 5, 7]
    assert [harmonic_dimension(4, j) for j in range(3)] == [1, 5, 14]


@pytest.mark.parametrize("n", [3, 4, 5])
def test_round_blocks_match_closed_form(n):
    problem = SpectralProblem(ConformalFactor.constant(n), L=10)
    for j in (0, 1, 4, 10):
        S, M = assemble_block(problem, j)
        assert np.max(np.abs(S - S.T)) <= 1e-13
        ev = solve_block(S, M)
        exact = [l * (l + n - 1) + n * (n - 2) / 4 for l in range(j, 11)]
        assert_allclose(ev, exact, rtol=1e-12)


def test_single_constant_basis():
    S, M = assemble_block(SpectralProblem(ONE, L=4), 0)
    assert_allclose(S[0, 0] / M[0, 0], 0.75, rtol=1e-14)


def test_solve_block_examples():
    assert_allclose(solve_block(np.diag([1.0, 2.0]), np.diag([1.0, 4.0])), [0.5, 1.0])
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert_allclose(solve_block(A, np.eye(2)), np.linalg.eigvalsh(A))
    with pytest.raises(NotPositiveDefiniteError):
        solve_block(A, np.diag([1.0, -1.0]))


def test_solve_block_against_inertia_oracle():
    rng = np.random.default_rng(3)
    B = rng.standard_normal((20, 20))
    C = rng.standard_normal((20, 20))
    S = B + B.T
    M = C @ C.T + 20 * np.eye(20)
    lam, V = solve_block(S, M, vectors=True)
    ref = bisection_eigenvalues(S, M, -10.0, 10.0)
    assert_allclose(lam, ref, atol=1e-9)
    res = np.linalg.norm(S @ V - M @ V * lam, axis=0)
    assert np.all(res <= 1e-9 * np.linalg.norm(S))


def test_merge_round_L6():
    res = compute_spectrum(ONE, L=6, check=False)
    g = res.grouped()[:4]
    assert [m for _, m in g] == [1, 4, 9, 16]
    assert_allclose([v for v, _ in g], [0.75, 3.75, 8.75, 15.75], rtol=1e-12)
    assert np.all(np.diff(res.values) >= -1e-10 * res.values[1:])
    for m, b in zip(res.multiplicities, res.blocks):
        assert m == harmonic_dimension(2, b)
    # 3.75 = second mode of block 0 (x1) + first mode of block 1 (x3), block 0 first
    idx = np.flatnonzero(np.isclose(res.values, 3.75))
    assert list(res.blocks[idx]) == [0, 1]


def test_single_block_merge():
    res = merge_spectrum([np.array([3.0, 1.0, 2.0])], n=3, L=4)
    assert_allclose(res.values, [1, 2, 3])
    assert list(res.multiplicities) == [1, 1, 1]


def test_round_baseline_L24():
    res = compute_spectrum(ONE, L=24)
    exact = np.repeat([v for v, _ in round_box_eigenvalues(3, 24)], [m for _, m in round_box_eigenvalues(3, 24)])
    assert_allclose(res.expanded()[:30], exact[:30], atol=1e-8)
    assert lambda_k(res, 0) == pytest.approx(0.75, abs=1e-12)
    for k in (1, 2, 3, 4):
        assert lambda_k(res, k) == pytest.approx(3.75, abs=1e-12)
    assert lambda_k(res, 5) == pytest.approx(8.75, abs=1e-12)


def test_homothety():
    res = compute_spectrum(ConformalFactor.constant(3, 2.0), L=12)
    assert lambda_k(res, 0) == pytest.approx(0.75 / 16, rel=1e-13)
    base = compute_spectrum(ONE, L=12)
    assert_allclose(res.values, base.values / 16, rtol=1e-12)
    res4 = compute_spectrum(ConformalFactor.constant(4, 3.0), L=10, check=False)
    base4 = compute_spectrum(ConformalFactor.constant(4), L=10, check=False)
    assert_allclose(res4.values, base4.values / 9, rtol=1e-12)


def test_dilation_isospectral_t2():
    res = compute_spectrum(ConformalFactor.bubble(3, 2.0), L=40)
    exact = np.repeat([v for v, _ in round_box_eigenvalues(3, 6)], [m for _, m in round_box_eigenvalues(3, 6)])
    assert_allclose(res.expanded()[:30], exact[:30], atol=1e-6)


def test_trusted_range_and_truncation_error():
    res = compute_spectrum(ConformalFactor.bubble(3, 10.0), L=24)
    assert res.trusted_count is not None
    with pytest.raises(TruncationError):
        lambda_k(res, res.trusted_count)
    with pytest.raises(ValueError):
        lambda_k(res, -1)


def test_positivity_and_monotonicity():
    rng = np.random.default_rng(8)
    for _ in range(5):
        mu = random_factor(rng)
        q = SpectralProblem(mu, 24).quad_order
        a = compute_spectrum(mu, 20, quad_order=q, check=False).expanded()
        b = compute_spectrum(mu, 24, quad_order=q, check=False).expanded()
        assert a.min() > 0
        assert np.all(b[:a.size] <= a + 1e-12)


def test_problem_validation():
    with pytest.raises(ValueError):
        SpectralProblem(ONE, L=3)
    with pytest.raises(ValueError):
        SpectralProblem(ONE, L=8, J=9)
    assert SpectralProblem(ONE, L=8).quad_order == 40


def test_csv_golden():
    text = compute_spectrum(ONE, L=8).to_csv()
    assert_csv_matches(text, (DATA / "round_n3_L8.csv").read_text(encoding="utf-8"))
    lines = text.splitlines()
    assert lines[0] == "k,eigenvalue,multiplicity,block,L"
    k, v, m, b, L = lines[2].split(",")
    assert (int(k), float(v), int(m), int(b)) == (1, pytest.approx(3.75, abs=1e-12), 1, 0)
    assert lines[3].split(",")[::2] == ["2", "3", "8"]
