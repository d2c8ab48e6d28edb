"""Mach-Zehnder with and without the second beam splitter, and with a bomb in one arm."""

from parallel_lives.engine import execute
from parallel_lives.scenarios import build_graph, detector_fluids, make_scenario

for second_bs, bomb in [(True, False), (False, False), (True, True)]:
    ex = execute(build_graph(make_scenario("mach_zehnder", second_bs=second_bs, bomb=bomb)))
    fluids = {k: round(v, 6) for k, v in sorted(detector_fluids(ex).items())}
    print(f"second splitter={second_bs!s:5} bomb={bomb!s:5} -> {fluids}")
