import numpy as np
import pytest

from parallel_lives import lives as L
from parallel_lives.engine import execute
from parallel_lives.hilbert import Ket, bell_pair, double_bell_state, is_unitary
from parallel_lives.scenarios import build_graph, make_scenario

TOL = 1e-9


def test_split_computational():
    c = L.split_on_preparation(bell_pair(0.8, 0.6), [0], "z", record_id="psi")
    assert c.fluid_shares() == pytest.approx({(0,): 16 / 25, (1,): 9 / 25})
    assert all(any(r.state is not None and r.record_id == "psi" for r in l.history) for l in c.lives)
    assert L.total_fluid(c) == pytest.approx(1, abs=TOL)


def test_split_x_basis():
    c = L.split_on_preparation(bell_pair(0.8, 0.6), [0], "x", record_id="psi")
    assert c.fluid_shares() == pytest.approx({("+",): 0.5, ("-",): 0.5})


def test_split_four_lives():
    c = L.split_on_preparation(double_bell_state(), [0, 1], "z", record_id="S")
    assert len(c.lives) == 4


def test_split_empty_subsystem():
    with pytest.raises(ValueError):
        L.split_on_preparation(bell_pair(0.8, 0.6), [], "z")


def test_join_independent_single_lives():
    a = L.split_on_preparation(Ket([1, 0]), [0], record_id="a", system_id="a")
    b = L.split_on_preparation(Ket([0, 1j]), [0], record_id="b", system_id="b")
    out = L.join(a, b)
    assert len(out.lives) == 1
    assert out.lives[0].label == (0, 1)
    assert out.lives[0].amplitude == pytest.approx(1j)


def test_join_prunes_forbidden_pairings():
    psi = bell_pair(0.8, 0.6)
    rec = L.InteractionRecord("psi", ("q1", "q2"), state=psi)
    a = L.split_on_preparation(psi, [0], record=rec, system_id="q1")
    b = L.split_on_preparation(psi, [1], record=rec, system_id="q2")
    out = L.join(a, b)
    assert out.stats["pairings_total"] == 4 and out.stats["pairings_kept"] == 2
    assert {l.label: l.amplitude for l in out.lives} == pytest.approx({(0, 0): 0.8, (1, 1): 0.6})


def test_join_rejects_shared_slots():
    c = L.split_on_preparation(bell_pair(0.8, 0.6), [0], record_id="psi")
    with pytest.raises(ValueError):
        L.join(c, c)


def test_bell_join_counts():
    ex = execute(build_graph(make_scenario("bell_pms")))
    m1, e = ex.payloads["m1"], ex.results["E"]
    assert (len(m1.lives), m1.history_count()) == (12, 48)
    assert (len(e.lives), e.history_count()) == (72, 288)


def test_interfere_examples():
    r = 2**-0.5
    u, l = r, 1j * r  # arm amplitudes after the first beam splitter
    tuned = L.interfere([
        L.ChannelFlow(("d1",), ((("u",), r * u), (("l",), 1j * r * l))),
        L.ChannelFlow(("d0",), ((("u",), 1j * r * u), (("l",), r * l))),
    ])
    fl = L.channel_fluids(tuned)
    assert fl[("d0",)] == pytest.approx(1) and fl[("d1",)] == pytest.approx(0, abs=TOL)
    tagged = L.interfere([
        L.ChannelFlow(("d0",), ((("u",), 0.5),), tag="upper"),
        L.ChannelFlow(("d0",), ((("l",), -0.5),), tag="lower"),
        L.ChannelFlow(("d1",), ((("u",), 0.5),), tag="upper"),
        L.ChannelFlow(("d1",), ((("l",), 0.5),), tag="lower"),
    ])
    assert L.channel_fluids(tagged) == pytest.approx({("d0",): 0.5, ("d1",): 0.5})
    single = L.interfere([L.ChannelFlow(("x",), ((("a",), 0.6 + 0.8j),))])
    assert single[0].combined == pytest.approx(0.6 + 0.8j)


def test_project_merge():
    c = L.split_on_preparation(Ket([2**-0.5, 2**-0.5]), [0], record_id="q")
    merged = L.project_merge(c, {(0,): (0,), (1,): (0,)})
    assert len(merged.lives) == 1 and merged.lives[0].fluid == pytest.approx(1, abs=TOL)
    assert merged.stats["unitary"] is False
    same = L.project_merge(c, {(0,): (0,), (1,): (1,)})
    assert same.fluid_shares() == pytest.approx(c.fluid_shares())
    assert same.stats["unitary"] is True
    with pytest.raises(ValueError):
        L.project_merge(c, {(0,): (0,)})


def test_merge_operator_is_a_projector_not_a_unitary():
    labels = [(0,), (1,)]
    _, op = L.merge_operator(labels, {(0,): (0,), (1,): (0,)})
    square = np.zeros((2, 2))
    square[: op.shape[0]] = op
    assert np.allclose(square @ square, square)
    assert not is_unitary(square)


def test_total_fluid_eraser_and_bomb():
    ex = execute(build_graph(make_scenario("quantum_eraser")))
    idler = [L.total_fluid(ex.payloads[f"click_{d}"]) for d in ("A", "B", "C1", "C2")]
    assert idler == pytest.approx([0.25] * 4, abs=TOL) and sum(idler) == pytest.approx(1)
    ex = execute(build_graph(make_scenario("mach_zehnder", bomb=True)))
    bomb = ex.results["bomb"]
    assert bomb.absorbed and L.total_fluid(bomb) == pytest.approx(0.5)
    through = L.total_fluid(ex.payloads["out_d0"]) + L.total_fluid(ex.payloads["out_d1"])
    assert through + L.total_fluid(bomb) == pytest.approx(1, abs=TOL)


def _frequencies(c, n, seed):
    rng = np.random.default_rng(seed)
    counts = {}
    for _ in range(n):
        lab = L.sample_life(c, rng).label
        counts[lab] = counts.get(lab, 0) + 1
    return {k: v / n for k, v in counts.items()}


@pytest.mark.parametrize("amps,probs", [((0.8, 0.6), (0.64, 0.36)), ((2**-0.5, 2**-0.5), (0.5, 0.5))])
def test_sample_life_statistics(amps, probs):
    n = 100_000
    c = L.split_on_preparation(Ket(list(amps)), [0], record_id="q")
    freq = _frequencies(c, n, seed=1)
    for lab, p in zip([(0,), (1,)], probs):
        assert abs(freq[lab] - p) < 3 * np.sqrt(p * (1 - p) / n)


def test_sample_life_single_and_degenerate():
    c = L.split_on_preparation(Ket([1, 0]), [0], record_id="q")
    assert {L.sample_life(c, s).label for s in range(20)} == {(0,)}
    empty = c.select([])
    with pytest.raises(ValueError):
        L.sample_life(empty, 0)


def test_sample_life_deterministic():
    c = L.split_on_preparation(Ket([0.8, 0.6]), [0], record_id="q")
    assert [L.sample_life(c, s).label for s in range(50)] == [L.sample_life(c, s).label for s in range(50)]


def test_invariants_enforced():
    c = L.split_on_preparation(Ket([0.8, 0.6]), [0], record_id="q")
    with pytest.raises(ValueError):
        L.Carrier("x", c.lives + c.lives[:1], c.slots, c.records)
    with pytest.raises(ValueError):
        L.InteractionRecord("r", ())


def test_payloads_are_write_once():
    ex = execute(build_graph(make_scenario("entangled_pair")))
    with pytest.raises(TypeError):
        ex.payloads["q1"] = None
    with pytest.raises(ValueError):
        ex.payloads["q1"].lives[0].paths[0, 0] = 5


def test_joint_fluid_of_split_pair():
    psi = bell_pair(0.8, 0.6)
    rec = L.InteractionRecord("psi", ("q1", "q2"), state=psi)
    a = L.split_on_preparation(psi, [0], "x", record=rec, system_id="q1")
    b = L.split_on_preparation(psi, [1], "z", record=rec, system_id="q2")
    assert L.joint_fluid([a, b]) == pytest.approx(1, abs=TOL)
    assert L.joint_fluid([a.select([("+",)]), b]) == pytest.approx(0.5, abs=TOL)
