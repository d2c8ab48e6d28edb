import pytest

from parallel_lives import models
from parallel_lives.causal import add_initial_node
from parallel_lives.engine import execute, terminal_distribution
from parallel_lives.pms import standard_square
from parallel_lives.scenarios import build_graph, make_scenario, oracle_distribution, shared_values


@pytest.fixture(scope="module")
def bell():
    return build_graph(make_scenario("bell_pms"))


@pytest.fixture(scope="module")
def bell_inf():
    return build_graph(make_scenario("bell_pms", inflation=True))


def test_local_realist_fails(bell):
    rep = models.run_local_realist(bell)
    assert rep.failed and rep.satisfying == 0 and rep.total == 512
    assert (rep.contradiction.quantum_product, rep.contradiction.assignment_product) == (-1, 1)


def test_local_realist_relaxed_square_populates(bell):
    rep = models.run_local_realist(bell, standard_square().with_parity(5, 1))
    assert not rep.failed and rep.table["cells"] == [[1, 1, 1]] * 3


def test_local_realist_wrong_scenario():
    with pytest.raises(ValueError):
        models.run_local_realist(build_graph(make_scenario("mach_zehnder")))


def test_parallel_lives_counts(bell):
    t = models.run_parallel_lives(bell)
    assert t.counts() == {"r1": 3, "r2": 3, "s1": 4, "s2": 4, "m1": 12, "m2": 12, "E": 72}
    for row in t.rows.values():
        assert row.fluid_total == pytest.approx(1, abs=1e-9)
        assert row.lives == len(row.entries)


def test_single_life_walkthrough(bell):
    """The s1 life |0,0> meets row 1 (ZI, IZ, ZZ) and gives all +1; wherever
    m2 measured column 1, its ZI value is +1 as well."""
    ex = execute(bell)
    m1_life = ex.payloads["m1"].life((1, 1))
    s1_support = m1_life.support.reshape(3, 4)[0]
    assert standard_square().row(0).outcomes()[0] == (1, 1, 1)
    for life in ex.results["E"].lives:
        i, k, j, l = life.label
        if (i, k, j) == (1, 1, 1):
            assert shared_values(life.label) == (1, 1)
    assert s1_support.all()


def test_entangled_pair_experimenter():
    t = models.run_parallel_lives(build_graph(make_scenario("entangled_pair")))
    assert dict((e.label, e.fluid) for e in t.rows["X"].entries) == pytest.approx({(0, 0): 16 / 25, (1, 1): 9 / 25})


def test_pl_inflation_counts(bell_inf):
    t = models.run_pl_inflation(bell_inf)
    assert t.counts() == {"r1": 3, "r2": 3, "s1": 48, "s2": 48, "m1": 12, "m2": 12, "E": 72}
    assert all(r.initial_in_history for r in t.rows.values())
    assert all(e.tags == ("⟨?|",) for e in t.rows["E"].entries)
    for name, row in t.rows.items():
        assert row.fluid_total == pytest.approx(1, abs=1e-9), name


def test_pl_inflation_marginals_match_pl(bell_inf):
    pli = models.run_pl_inflation(bell_inf)
    pl = models.run_parallel_lives(bell_inf)
    for name in pl.rows:
        a, b = pli.marginal(name), pl.marginal(name)
        assert models.max_abs_difference(a, b) < 1e-9


def test_models_need_initial_node(bell):
    with pytest.raises(ValueError, match="initial"):
        models.run_pl_inflation(bell)
    with pytest.raises(ValueError, match="initial"):
        models.run_inflation(bell)


def test_inflation_counts_and_table(bell_inf):
    run = models.run_inflation(bell_inf, seed=3)
    assert run.trace.counts()["s1"] == 48
    assert (run.trace.rows["E"].lives, run.trace.rows["E"].histories) == (72, 288)
    assert (run.trace.rows["m1"].lives, run.trace.rows["m1"].histories) == (12, 48)
    assert run.replay_ok
    rows = run.table.rows
    assert rows["E"].post == "⟨?|"
    i, k, j, l = run.future.outcome
    assert rows["r1"].pre == f"|{i}⟩" and rows["m1"].pre == f"|{i},{k}⟩"
    assert rows["m1"].post == f"⟨{i},{k},{j},{l}|"
    assert shared_values(run.future.outcome)[0] == shared_values(run.future.outcome)[1]


def test_inflation_replay_for_many_seeds(bell_inf):
    ex = execute(bell_inf)
    for seed in range(25):
        run = models.run_inflation(bell_inf, seed, ex)
        assert run.replay_ok, seed
        assert models.run_inflation(bell_inf, seed, ex).future.outcome == run.future.outcome


def test_inflation_on_other_scenarios():
    for name, kw in [("mach_zehnder", {"bomb": True}), ("entangled_pair", {}), ("wigner_friend", {})]:
        g = add_initial_node(build_graph(make_scenario(name, **kw)))
        for seed in range(10):
            assert models.run_inflation(g, seed).replay_ok, (name, seed)


def test_compare_models(bell_inf):
    desc = make_scenario("bell_pms", inflation=True)
    rep = models.compare_models(bell_inf, oracle_distribution(desc), samples=20_000, seed=11)
    assert rep.row("parallel_lives").tv_distance < 1e-9
    assert rep.row("pl_inflation", "parallel_lives").max_abs_difference < 1e-9
    assert rep.row("inflation").samples == 20_000
    csv_text = rep.to_csv()
    assert csv_text.splitlines()[0].startswith("model,reference,tv_distance")
    assert len(csv_text.splitlines()) == 1 + len(rep.rows)


def test_terminal_distribution_is_normalized(bell):
    assert sum(terminal_distribution(execute(bell)).values()) == pytest.approx(1)
