import numpy as np
import pytest

from star422.circuits import (
    LIFETIME_STATES,
    TOMOGRAPHY_STATES,
    build_bell_prep,
    build_cycle,
    build_experiment,
    build_prep,
    compile_noise,
    experiment_program,
    idle_time,
    mute_noise,
    readout_basis,
)
from star422.code422 import bell_state, codeword, codeword_for_input, product_state
from star422.dense import dense_distribution, dense_final_state
from star422.device import ERROR_TYPES
from star422.engine import run_shots


def data_fidelity(state, target, device):
    """Overlap with ``target`` on D1..D4 and |0> on every other element."""
    idx = [device.index(r) for r in ("D1", "D2", "D3", "D4")]
    full = np.zeros([2] * state.n, complex)
    view = np.moveaxis(full, idx, range(4))
    view[(slice(None),) * 4 + (0,) * (state.n - 4)] = target.reshape([2] * 4)
    return state.fidelity(full.reshape(-1))


def test_zero_input_needs_no_gates(ideal):
    assert build_prep("0000", ideal).count("gate") == 0


def test_one_inputs_get_x_gates(ideal):
    prog = build_prep("1001", ideal)
    gates = [(i.name, prog.elements[i.targets[0]]) for i in prog.instructions if i.kind == "gate"]
    assert sorted(gates) == sorted([("X", ideal.element("D1")), ("X", ideal.element("D4"))])


@pytest.mark.parametrize("state", ["+-+-", "0110", "-++-"])
def test_prep_reaches_product_state(ideal, state):
    assert data_fidelity(dense_final_state(build_prep(state, ideal)), product_state(state), ideal) == \
        pytest.approx(1.0)


def test_bell_prep_fragment(ideal):
    prog = build_bell_prep(ideal)
    assert data_fidelity(dense_final_state(prog), bell_state(), ideal) == pytest.approx(1.0)
    exp = build_experiment("bell_tomography", ideal, cycles=0, setting="ZZZZ")
    dist = dense_distribution(exp)
    assert set(dist) == {(0, 0, 0, 0), (0, 1, 1, 0), (1, 0, 0, 1), (1, 1, 1, 1)}
    assert all(p == pytest.approx(0.25) for p in dist.values())


def test_cycle_gate_counts(ideal):
    prog = build_cycle(ideal)
    sqrt_y = sum(prog.count("gate", g) for g in ("SQRT_Y", "SQRT_Y_DAG"))
    assert sqrt_y == 12
    assert prog.count("gate", "MOVE") == 4
    assert prog.count("gate", "CZ") == 8
    assert prog.count("measure") == 2
    assert prog.count("reset") == 0  # ancillas are not reset between cycles


def test_cz_order_follows_device(ideal):
    prog = build_cycle(ideal.with_options(cz_order=("D4", "D3", "D2", "D1")))
    partners = [prog.elements[i.targets[1]] for i in prog.instructions if i.name == "CZ"]
    want = [ideal.element(r) for r in ("D4", "D3", "D2", "D1")]
    assert partners == want + want


def test_z_half_overlaps_x_readout(ideal):
    prog = build_cycle(ideal)
    ax = next(i for i in prog.instructions if i.kind == "measure" and i.name.startswith("AX"))
    first_z_move = [i for i in prog.instructions if i.name == "MOVE"][2]
    assert first_z_move.start < ax.end


def test_lifetime_schema(ideal):
    prog = build_experiment("lifetime", ideal, "0000", 20)
    assert len(prog.schema) == 44
    assert sum(s.cycle is not None for s in prog.schema) == 40
    assert prog.meta["basis"] == "Z" and prog.meta["cycles"] == 20


@pytest.mark.parametrize("kind", ["lifetime", "tomography", "bell_lifetime"])
def test_busy_plus_idle_is_duration(config_a, kind):
    setting = "XYZZ" if kind == "tomography" else None
    prog = build_experiment(kind, config_a, "++++", 2, setting=setting)
    for q in range(prog.n):
        if prog.busy_time(q) == 0:
            continue
        assert prog.busy_time(q) + idle_time(prog, q) == pytest.approx(prog.duration)


@pytest.mark.parametrize("state", LIFETIME_STATES)
def test_noiseless_first_cycle_accepts_half(ideal, state):
    prog = experiment_program("lifetime", ideal, state, 1)
    batch = run_shots(prog, 20_000, 1)
    both = batch.matrix([t for t in prog.tags if t.startswith("A")])
    sel = (both == 0).all(axis=1)
    assert sel.mean() == pytest.approx(0.5, abs=0.015)


def test_noiseless_bell_always_accepted(ideal):
    prog = experiment_program("bell_lifetime", ideal, "0000", 1)
    assert dense_distribution(prog).keys() <= {(0, 0, *b) for b in
                                               [(0, 0, 0, 0), (0, 1, 1, 0), (1, 0, 0, 1), (1, 1, 1, 1)]}


def test_noise_compilation_covers_every_operation(config_a):
    prog = build_experiment("lifetime", config_a, "0000", 1)
    noisy = compile_noise(prog, config_a)
    sources = {i.noise.source for i in noisy.instructions if i.kind == "noise"}
    assert sources == set(ERROR_TYPES)
    assert noisy.count("gate") == prog.count("gate") and noisy.compiled
    n_sqg = sum(1 for i in noisy.instructions if i.kind == "noise" and i.noise.source == "sqg")
    assert n_sqg == prog.count("gate", role="sqg")


def test_noiseless_device_compiles_to_no_op_events(ideal):
    prog = experiment_program("lifetime", ideal, "0000", 2)
    assert all(i.noise.total == 0 for i in prog.instructions if i.kind == "noise")


def test_suppressing_everything(config_a):
    prog = build_experiment("lifetime", config_a, "0000", 1)
    quiet = compile_noise(prog, config_a, suppress=ERROR_TYPES)
    assert all(i.noise.total == 0 for i in quiet.instructions if i.kind == "noise")


def test_mute_keeps_events_and_changes_digest(config_a):
    prog = experiment_program("lifetime", config_a, "0000", 1)
    muted = mute_noise(prog, ["cz"])
    assert len(muted.instructions) == len(prog.instructions)
    assert muted.digest() != prog.digest()
    assert all(i.role == "muted" for i in muted.instructions if i.kind == "noise" and i.noise.source == "cz")
    with pytest.raises(ValueError):
        mute_noise(build_experiment("lifetime", config_a, "0000", 1), ["cz"])


def test_readout_basis_and_validation(ideal):
    assert readout_basis("0101") == "Z" and readout_basis("+-+-") == "X"
    with pytest.raises(ValueError):
        build_experiment("lifetime", ideal, "0000", 0)
    with pytest.raises(ValueError):
        build_experiment("tomography", ideal, "0000", 1)
    with pytest.raises(ValueError):
        build_experiment("warp", ideal)


@pytest.mark.parametrize("state", TOMOGRAPHY_STATES[:4])
def test_noiseless_encoding_projects_onto_codeword(ideal, state):
    prog = build_experiment("tomography", ideal, state, 1, setting="ZZZZ")
    target = codeword(codeword_for_input(state))
    allowed = {tuple(int(c) for c in format(i, "04b")) for i in np.flatnonzero(np.abs(target) > 0)}
    dist = dense_distribution(prog)
    ok = sum(p for k, p in dist.items() if k[:2] == (0, 0))
    assert ok == pytest.approx(0.5)
    assert {k[2:] for k, p in dist.items() if k[:2] == (0, 0) and p > 1e-12} <= allowed
