"""Why no table of predetermined values can reproduce the Peres-Mermin square."""

from parallel_lives.pms import parity_product_argument, search_assignments, standard_square

square = standard_square()
for i in range(3):
    ctx = square.row(i)
    print("row", i, [str(w) for w in ctx.observables], f"parity {ctx.parity:+d}")

result = search_assignments(square)
print(f"\n{result.count} of {result.total} +/-1 assignments satisfy all six context parities")

report = parity_product_argument(square)
print(f"product of quantum parities: {report.quantum_product:+d}")
print(f"product forced by any assignment: {report.assignment_product:+d}")
