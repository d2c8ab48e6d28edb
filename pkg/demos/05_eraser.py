"""Delayed-choice eraser: fringes show up only once idler clicks are sorted."""

from parallel_lives.engine import execute, terminal_distribution
from parallel_lives.scenarios import build_graph, eraser_summary, make_scenario

ex = execute(build_graph(make_scenario("quantum_eraser")))
dist = {(label[0], label[1]): f for label, f in terminal_distribution(ex).items()}
for key, value in sorted(eraser_summary(dist, 64).items()):
    print(f"{key:>20}: {value:.4f}")
