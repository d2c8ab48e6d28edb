"""Wigner's view of the friend's lab does not depend on whether the friend 'collapsed'."""

import numpy as np

from parallel_lives.scenarios import wigner_renderings

r = wigner_renderings(0.8, 0.6)
np.set_printoptions(precision=3, suppress=True)
print("Wigner + atom, unitary friend:\n", r["unitary"].real)
print("Wigner + atom, collapsing friend:\n", r["collapse"].real)
print("largest difference:", float(np.max(np.abs(r["unitary"] - r["collapse"]))))
