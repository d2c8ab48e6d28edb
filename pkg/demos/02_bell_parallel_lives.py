"""The two-party square game told as a web of local lives."""

from parallel_lives import models
from parallel_lives.engine import execute
from parallel_lives.scenarios import build_graph, make_scenario, shared_values

ex = execute(build_graph(make_scenario("bell_pms")))
table = models.run_parallel_lives(ex.graph, ex)
for name, row in table.rows.items():
    print(f"{name:>3}: {row.lives:3d} lives, {row.histories:3d} histories")

meeting = ex.results["E"]
print(f"\nat the meeting, {meeting.stats['pairings_kept']} of {meeting.stats['pairings_total']} "
      "pairings of lives survive")
agree = sum(a == b for a, b in (shared_values(life.label) for life in meeting.lives))
print(f"the shared cell agrees in {agree} of them")
