import numpy as np
import pytest
from numpy.testing import assert_allclose

from _factories import random_factor
from confspec.conformal import ConformalFactor, measure_m_total
from confspec.functionals import (
    KOREVAAR_REGRESSION_C3,
    SHIPPED_FAMILIES,
    certify_upper_bound,
    concentration_table,
    family_generators,
    hersch_check,
    korevaar_ratio,
    normalized_eigenvalue,
    round_lambda_bar_0,
    sweep,
    volume_normalized,
)
from confspec.spectrum import compute_spectrum

VOL3 = 2 * np.pi**2
ONE = ConformalFactor.constant(3)


def test_normalized_eigenvalue_examples():
    assert_allclose(normalized_eigenvalue(ONE, 0), 0.75 * VOL3, rtol=1e-12)
    assert_allclose(normalized_eigenvalue(ONE, 0), 14.804406601634037, rtol=1e-12)
    for k in (0, 3, 7):
        assert_allclose(normalized_eigenvalue(ConformalFactor.constant(3, 2.0), k),
                        normalized_eigenvalue(ONE, k), rtol=1e-10)
    assert_allclose(normalized_eigenvalue(ConformalFactor.bubble(3, 2.0), 0) / measure_m_total(ConformalFactor.bubble(3, 2.0)),
                    0.75, rtol=1e-10)


def test_scale_invariance():
    rng = np.random.default_rng(6)
    for _ in range(3):
        mu = random_factor(rng)
        for c in (0.1, 10.0):
            for k in (0, 1, 5):
                assert_allclose(normalized_eigenvalue(mu.scaled(c), k), normalized_eigenvalue(mu, k), rtol=1e-10)
                assert_allclose(volume_normalized(mu.scaled(c), k), volume_normalized(mu, k), rtol=1e-10)


def test_korevaar_examples():
    assert_allclose(korevaar_ratio(ONE, 1), 3.75 * VOL3, rtol=1e-12)
    assert_allclose(KOREVAAR_REGRESSION_C3, 3.75 * VOL3, rtol=1e-15)
    assert korevaar_ratio(ONE, 4) < korevaar_ratio(ONE, 1)
    with pytest.raises(ValueError):
        korevaar_ratio(ONE, 0)


def test_volume_normalized_example():
    assert_allclose(volume_normalized(ONE, 0), 0.75 * VOL3 ** (2 / 3), rtol=1e-12)
    # the dilation factor is an isometry: the volume-normalised value is the round one
    assert_allclose(volume_normalized(ConformalFactor.bubble(3, 2.0), 1), 3.75 * VOL3 ** (2 / 3), rtol=1e-8)


def test_certify_examples():
    spec = compute_spectrum(ONE, 32)
    rep1 = certify_upper_bound(ONE, 1, spectrum=spec)
    assert rep1.bound >= 0.75 and rep1.solver_value == pytest.approx(0.75)
    assert_allclose(rep1.bound_constant, rep1.bound * VOL3, rtol=1e-9)
    rep5 = certify_upper_bound(ONE, 5, spectrum=spec)
    assert rep5.bound >= 3.75 and rep5.solver_value == pytest.approx(3.75)
    assert rep5.index_zero_based == 4
    for rep in (rep1, rep5):
        assert len(rep.quotients) == rep.k
        assert all(np.isfinite(q) and q > 0 for q in rep.quotients)
        assert all(rep.proof_checks.values()), rep.proof_checks
        d = rep.to_dict()
        assert d["index_one_based"] == rep.k


def test_certify_disjoint_supports():
    rep = certify_upper_bound(ConformalFactor.two_bubble(3, 2.0), 6)
    ann = rep.annuli
    for i in range(len(ann)):
        for j in range(i + 1, len(ann)):
            p, q = np.array(ann[i]["center"]), np.array(ann[j]["center"])
            delta = np.arccos(np.clip(p @ q, -1, 1))
            hi1, hi2 = min(2 * ann[i]["R"], np.pi), min(2 * ann[j]["R"], np.pi)
            lo1, lo2 = ann[i]["r"] / 2, ann[j]["r"] / 2
            assert (hi1 + hi2 < delta or lo1 - hi2 > delta or lo2 - hi1 > delta
                    or lo1 + lo2 > 2 * np.pi - delta)


def test_hersch_examples():
    for c in (1.0, 2.0, 0.3):
        h = hersch_check(ConformalFactor.constant(3, c))
        assert abs(h["gap"]) <= 1e-10 * h["lambda_bar_0_round"]
    assert_allclose(round_lambda_bar_0(3), 0.75 * VOL3, rtol=1e-15)
    rng = np.random.default_rng(9)
    for _ in range(5):
        mu = random_factor(rng)
        h = hersch_check(mu)
        assert h["gap"] > 0
        assert_allclose(h["rayleigh_times_mass"], h["lambda_bar_0_round"], rtol=1e-10)


def test_family_generators():
    fams = family_generators(SHIPPED_FAMILIES)
    kinds = [f for f, _, _ in fams]
    assert kinds.count("constant") == 2 and kinds.count("bubble") == 3
    assert kinds.count("two_bubble") == 3 and kinds.count("random_poly") == 5
    again = family_generators(SHIPPED_FAMILIES)
    assert [mu.to_json() for _, _, mu in fams] == [mu.to_json() for _, _, mu in again]
    assert family_generators("") == []
    (fid, params, mu), = family_generators("poly:coeffs=1,0.5")
    assert fid == "poly" and params["coeffs"] == [1.0, 0.5]
    assert_allclose(mu(np.array([1.0])), 1.5)
    with pytest.raises(ValueError):
        family_generators("nonsense:t=1")
    for _, _, mu in family_generators("random_poly:count=20,degree=6,seed=3"):
        assert mu(np.linspace(-1, 1, 1001)).min() > 0


def test_sweep_rows():
    rows = sweep(family_generators("constant:c=1;bubble:t=2"), [1, 2], L=24, certify=True)
    assert len(rows) == 4
    for r in rows:
        assert r["certified_bound"] >= r["lambda_k"]
        assert_allclose(r["ratio"], r["lambda_bar_k"] / r["k"] ** (2 / 3))


def test_concentration_table():
    rows = concentration_table(ts=(1.0, 2.0), ks=(0, 1))
    assert len(rows) == 4
    assert_allclose(rows[0]["lambda_bar_k"], 0.75 * VOL3, rtol=1e-10)
    assert all(np.isfinite(r["volume_normalized"]) for r in rows)
