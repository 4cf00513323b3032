"""
A discontinuous outer metric in one dimension
==============================================

Take the H^1 norm on the interval [-1, 1] and ask for the cheapest extension
of the value 1 at a point x. Inside the interval the answer is smooth in x
(2 tanh(1) at the midpoint); outside, a field can equal 1 at x and vanish on
the interval at arbitrarily small cost, so the induced metric drops to zero.
The jump at |x| = 1 shows that outer metrics need not vary continuously with
the base point.
"""

import numpy as np

from curvemetrics.outer import demo_sweep

xs = [0.0, 0.5, 0.9, 0.99, 0.999, 1.001, 1.01, 1.5, 2.0]
rows = demo_sweep(xs, half_width=3.0, spacing=1e-3)

print(f"{'x':>7} {'value':>10}")
for x, _, value in rows:
    print(f"{x:7.3f} {value:10.5f}")
print(f"2 tanh(1) = {2 * np.tanh(1):.5f}")

inside = dict((r[0], r[2]) for r in rows)
print(f"jump ratio across x = 1: {inside[0.999] / inside[1.001]:.0f}")
