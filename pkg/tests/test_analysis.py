import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from star422.analysis import (
    acceptance_fit,
    bell_probs,
    detection_fractions,
    error_budget,
    fit_decay,
    logical_expectation,
    postselect,
    run_lifetime,
    run_stabilizer_tomography,
    stabilizer_fidelity,
    stabilizer_mask,
    syndromes,
)
from star422.circuits import experiment_program
from star422.engine import ShotBatch, run_shots


def test_syndrome_worked_example():
    tr = syndromes([0, 0, 1, 1, 0])
    assert tr.s.tolist() == [1, 1, -1, 1, -1]
    assert tr.sigma.tolist() == [0, 0, 1, 1, 1]


def test_direct_variant_flags_parity_changes():
    tr = syndromes([0, 0, 1, 1, 0], variant="direct")
    assert tr.sigma.tolist() == [0, 0, 1, 0, 1]
    with pytest.raises(ValueError):
        syndromes([0, 1], variant="other")


@given(st.lists(st.integers(0, 1), min_size=1, max_size=30))
def test_syndromes_vectorize(bits):
    one = syndromes(bits)
    many = syndromes(np.array([bits, bits]))
    assert np.array_equal(many.s[1], one.s) and np.array_equal(many.sigma[0], one.sigma)


@given(st.floats(0.3, 0.99), st.floats(0.3, 1.0), st.integers(3, 20))
def test_acceptance_fit_round_trip(p_s, p_l, n_max):
    N = np.arange(1, n_max + 1)
    eta = p_s**N * p_l / 2
    curve = acceptance_fit(N, eta, eta * 0.01)
    assert curve.P_S == pytest.approx(p_s, abs=1e-9)
    assert curve.P_L == pytest.approx(p_l, abs=1e-9)


def test_acceptance_fit_hardware_like_series():
    N = np.arange(1, 21)
    curve = acceptance_fit(N, 0.67**N * 0.87 / 2)
    assert curve.P_S == pytest.approx(0.67, abs=1e-9) and curve.P_L == pytest.approx(0.87, abs=1e-9)


def test_acceptance_fit_constant_bell():
    curve = acceptance_fit([1, 2, 3, 4], [1.0] * 4, deterministic=True)
    assert curve.P_S == pytest.approx(1.0) and curve.P_L == pytest.approx(1.0)
    assert curve.rejection_rate == pytest.approx(0.0)


@given(st.floats(0.5, 1.0), st.floats(1e-4, 0.05), st.floats(0.5, 5.0))
def test_fit_decay_round_trip(a, b, t_cycle):
    N = np.arange(1, 16)
    fit = fit_decay(N, a * np.exp(-b * N), None, t_cycle)
    assert fit.a == pytest.approx(a, rel=1e-9) and fit.b == pytest.approx(b, rel=1e-7)
    assert fit.eps == pytest.approx((1 - np.exp(-fit.b)) / 2, rel=1e-12)
    assert fit.tau_us * fit.b == pytest.approx(t_cycle, rel=1e-12)
    assert fit.r2 == pytest.approx(1.0)


def test_constant_weights_match_unweighted():
    rng = np.random.default_rng(0)
    N = np.arange(1, 11)
    y = 0.9 * np.exp(-0.02 * N) * (1 + 0.01 * rng.standard_normal(10))
    a = fit_decay(N, y, None, 2.05)
    b = fit_decay(N, y, np.full(10, 0.37), 2.05)
    assert a.b == pytest.approx(b.b, rel=1e-12) and a.b_err == pytest.approx(b.b_err, rel=1e-9)


def test_fit_decay_drops_bad_points():
    N = np.arange(1, 8)
    y = 0.9 * np.exp(-0.02 * N)
    y[2] = -0.1
    with pytest.warns(UserWarning):
        fit = fit_decay(N, y, None, 2.05)
    assert fit.n_points == 6 and fit.b == pytest.approx(0.02)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert fit_decay([1, 2, 3], [0.5, -1, np.nan], None, 2.05).degenerate
    with pytest.raises(ValueError):
        fit_decay([1, 2], [0.5, 0.4], None, 2.05)


def test_growth_gives_infinite_lifetime():
    fit = fit_decay([1, 2, 3], [0.5, 0.6, 0.7], None, 2.05)
    assert fit.b < 0 and np.isinf(fit.tau_us)


def test_stabilizer_fidelity_definition():
    assert stabilizer_fidelity([1, -1], [1, -1]) == 1.0
    assert stabilizer_fidelity([0.8, -0.8], [1, -1]) == pytest.approx(0.9)


def _permuted(batch: ShotBatch, perm: np.ndarray) -> ShotBatch:
    bits = batch.matrix(batch.tags)[perm]
    packed = np.packbits(bits.T, axis=1, bitorder="little")
    return ShotBatch(batch.tags, batch.cycles, packed, batch.shots, batch.seed, batch.digest, batch.meta)


def test_bell_probs_shot_order_invariant(config_b):
    batch = run_shots(experiment_program("bell_lifetime", config_b, "0000", 2), 5000, 4)
    perm = np.random.default_rng(1).permutation(batch.shots)
    a = bell_probs(batch, postselect(batch)[0])
    b = bell_probs(_permuted(batch, perm), postselect(batch)[0][perm])
    assert a == pytest.approx(b)
    assert a["00+11"] == pytest.approx(a["00"] + a["11"])


def test_postselection_matches_syndrome_trace(config_a):
    batch = run_shots(experiment_program("lifetime", config_a, "0101", 4), 4000, 2)
    mask, point = postselect(batch, "all_s_plus_one")
    clean = np.ones(batch.shots, bool)
    for stab in "XZ":
        clean &= (syndromes(batch.ancilla(stab)).s == 1).all(axis=1)
    assert np.array_equal(mask, clean) and np.array_equal(stabilizer_mask(batch), clean)
    assert point.accepted == clean.sum() and point.shots == 4000
    full, _ = postselect(batch, "with_final_subspace")
    assert not np.any(full & ~mask)


def test_final_subspace_rule_rejects_tomography(ideal):
    batch = run_shots(experiment_program("tomography", ideal, "0000", 1, setting="XXZY"), 10, 0)
    with pytest.raises(ValueError):
        postselect(batch, "with_final_subspace")


def test_noiseless_protocol(ideal):
    res = run_lifetime(ideal, "0000", range(1, 4), 10_000, seed=1)
    assert np.allclose(res.eta, 0.5, atol=0.015)
    assert np.allclose(res.values, 1.0)
    bell = run_lifetime(ideal, "bell", range(1, 4), 2000, seed=1)
    assert np.all(bell.eta == 1.0) and np.allclose(bell.values, 1.0)


def test_signs_follow_codeword(ideal):
    res = run_lifetime(ideal, "0011", [1, 2, 3], 2000, seed=0, keep_batches=True)
    assert res.signs == (-1, 1)
    mask, _ = postselect(res.batches[1])
    raw, _, _ = logical_expectation(res.batches[1], mask, 1)
    assert raw == pytest.approx(-1.0) and np.allclose(res.values, 1.0)


def test_noiseless_stabilizer_tomography(ideal):
    for stab in "XZ":
        rows = run_stabilizer_tomography(ideal, stab, 200, seed=0)
        assert len(rows) == 16
        assert all(r.s_bar == r.s_ideal for r in rows)


def test_detection_grid_noiseless(ideal):
    for state, first_x in (("0000", 0.5), ("bell", 0.0)):
        kind = "bell_lifetime" if state == "bell" else "lifetime"
        batches = {N: run_shots(experiment_program(kind, ideal, "0000" if state == "bell" else state, N),
                                10_000, N) for N in (1, 2, 3)}
        g = detection_fractions(batches)
        assert g.x.shape == (3, 3) and np.isnan(g.x[0, 1]) and np.isnan(g.z[1, 2])
        assert np.allclose(g.x[:, 0], first_x, atol=0.02)
        assert np.nansum(g.z) == 0 and np.nansum(g.x[:, 1:]) == 0


def test_detector_rate_tracks_rejection(config_a):
    # steady-state detector mean against the per-cycle rejection rate 1 - P_S
    res = run_lifetime(config_a, "0000", range(1, 9), 20_000, seed=3, keep_batches=True)
    g = detection_fractions(res.batches)
    late = np.nanmean(np.stack([g.x, g.z])[:, 1:, 1:])
    assert abs(late - res.acceptance.rejection_rate) < 0.05


def test_budget_all_suppressed_is_clean(config_a):
    rows = error_budget(config_a, "0000", range(1, 4), 2000, seed=0, types=("cz",))
    by = {r.suppressed: r for r in rows}
    assert set(by) == {"none", "cz", "all"}
    assert by["all"].rejection == 0 and by["all"].eps == pytest.approx(0, abs=1e-12)
    assert by["cz"].d_rejection > 0
    with pytest.raises(ValueError):
        error_budget(config_a, types=("gravity",))
