import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from star422.pauli import (
    GATES,
    NoiseEvent,
    PauliString,
    Tableau,
    conjugate,
    measure_z,
    sample_noise,
)

labels = st.integers(1, 4).flatmap(
    lambda n: st.tuples(st.sampled_from("+-"), st.text("IXYZ", min_size=n, max_size=n)).map("".join)
)
ONE_Q = [g for g, v in GATES.items() if v.arity == 1]
TWO_Q = [g for g, v in GATES.items() if v.arity == 2]


def random_ops(n, seed, length=12):
    rng = np.random.default_rng(seed)
    ops = []
    for _ in range(length):
        if n > 1 and rng.random() < 0.4:
            ops.append((str(rng.choice(TWO_Q)), [int(q) for q in rng.choice(n, 2, replace=False)]))
        else:
            ops.append((str(rng.choice(ONE_Q)), [int(rng.integers(n))]))
    return ops


@given(labels, labels)
def test_product_matches_matrices(a, b):
    if len(a) != len(b):
        b = b[0] + (b[1:] * len(a))[: len(a) - 1]
    pa, pb = PauliString.from_label(a), PauliString.from_label(b)
    if not pa.commutes(pb):
        with pytest.raises(ValueError):
            pa * pb
        return
    assert np.allclose((pa * pb).to_matrix(), pa.to_matrix() @ pb.to_matrix())


@given(labels)
def test_label_round_trip(lab):
    assert str(PauliString.from_label(lab)) == lab


@given(labels, labels)
def test_commutation_matches_matrices(a, b):
    b = (b[0] + b[1:] * 4)[: len(a)]
    pa, pb = PauliString.from_label(a), PauliString.from_label(b)
    A, B = pa.to_matrix(), pb.to_matrix()
    assert pa.commutes(pb) == np.allclose(A @ B, B @ A)


@pytest.mark.parametrize("name", list(GATES))
@pytest.mark.parametrize("kind", ["X", "Z", "Y"])
def test_conjugation_matches_unitary(name, kind):
    g = GATES[name]
    for q in range(g.arity):
        p = PauliString.single(g.arity, q, kind)
        image = conjugate(p, name, list(range(g.arity)))
        u = g.matrix
        assert np.allclose(image.to_matrix(), u @ p.to_matrix() @ u.conj().T)


@pytest.mark.parametrize("name", list(GATES))
def test_gate_then_inverse_is_identity(name):
    g = GATES[name]
    n = g.arity + 1
    t = Tableau(n)
    for gate, tg in random_ops(n, 7):
        t.apply(gate, tg)
    before = t.copy()
    t.apply(name, list(range(g.arity))).apply(g.inverse, list(range(g.arity)))
    assert t.stabs == before.stabs and t.destabs == before.destabs


def test_sqrt_y_twice_flips():
    t = Tableau(1).apply("SQRT_Y", [0]).apply("SQRT_Y", [0])
    assert t.measure(0) == 1


def test_cz_maps_xi_to_xz():
    assert str(conjugate(PauliString.from_label("XI"), "CZ", [0, 1])) == "+XZ"


def test_iswap_moves_excitation():
    t = Tableau(2).apply("X", [0]).apply("ISWAP", [0, 1])
    assert (t.measure(0), t.measure(1)) == (0, 1)


def test_fresh_measurement_leaves_tableau():
    t = Tableau(3)
    before = t.copy()
    assert t.measure(2) == 0
    assert t.stabs == before.stabs


def test_plus_state_is_uniform():
    rng = np.random.default_rng(0)
    shots = 100_000
    ones = sum(Tableau(1).apply("H", [0]).measure(0, rng) for _ in range(shots))
    chi2 = (ones - shots / 2) ** 2 / (shots / 4)
    assert chi2 < 10.8  # p = 0.001 for one degree of freedom


def test_bell_pair_outcomes_agree():
    rng = np.random.default_rng(1)
    for _ in range(200):
        t = Tableau(2).apply("H", [0]).apply("CX", [0, 1])
        assert t.measure(0, rng) == t.measure(1, rng)


@given(st.integers(1, 4), st.integers(0, 10**6))
def test_invariants_survive_random_circuits(n, seed):
    rng = np.random.default_rng(seed)
    t = Tableau(n)
    for gate, tg in random_ops(n, seed, 20):
        t.apply(gate, tg)
        t.check()
        if rng.random() < 0.3:
            q = int(rng.integers(n))
            first = t.measure(q, rng)
            t.check()
            assert t.measure(q, rng) == first  # idempotent


@given(st.integers(1, 3), st.integers(0, 10**6))
def test_measured_state_is_in_stabilizer_group(n, seed):
    rng = np.random.default_rng(seed)
    t = Tableau(n)
    for gate, tg in random_ops(n, seed):
        t.apply(gate, tg)
    bit, t = measure_z(t, 0, rng)
    z = PauliString.single(n, 0, "Z")
    assert t.stabilizer_group_contains(-z if bit else z)


def test_noise_validation():
    with pytest.raises(ValueError):
        NoiseEvent("pauli_channel_1", (0.5, 0.4, 0.2), (0,))
    with pytest.raises(ValueError):
        NoiseEvent("depolarize2", (0.1,), (0,))
    with pytest.raises(ValueError):
        NoiseEvent("depolarize1", (-0.1,), (0,))


def test_zero_noise_never_fires():
    rng = np.random.default_rng(2)
    ev = NoiseEvent("depolarize1", (0.0,), (0,))
    assert all(sample_noise(ev, rng) is None for _ in range(1000))


def test_depolarize2_uniform_over_fifteen():
    rng = np.random.default_rng(3)
    p, n = 0.015, 1_000_000
    ev = NoiseEvent("depolarize2", (p,), (0, 1))
    dist = dict(ev.pauli_distribution())
    assert len(dist) == 15 and np.isclose(sum(dist.values()), p)
    u = rng.random(n)
    # inverse-CDF draw, vectorized version of sample_noise
    edges = np.cumsum([q for _, q in ev.pauli_distribution()])
    idx = np.searchsorted(edges, u, side="right")
    counts = np.bincount(idx, minlength=16)[:15]
    sigma = np.sqrt(n * p / 15)
    assert np.all(np.abs(counts - n * p / 15) < 3 * sigma + 1)
