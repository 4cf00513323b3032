"""
Smoothing operators on a periodic grid
======================================

S_k cuts a function's spectrum at |xi| <= k and multiplies by a bump that is
1 on |x| <= k. As k grows S_k f approaches f, and the family stays uniformly
bounded in H^s.
"""

import numpy as np

from curvemetrics.flows import PeriodicGridField, grid_sobolev_norm, smooth_Sk

f = PeriodicGridField.sample(lambda x: (1 + (x - 0.5) ** 2) ** -2 * np.cos(1.3 * x), 64.0, 2048)
norm = grid_sobolev_norm(f, 2)
print(f"{'k':>4} {'|S_k f - f| / |f|':>18} {'|S_k f| / |f|':>14}")
for k in (2, 4, 8, 16, 32):
    S = smooth_Sk(f, k)
    defect = grid_sobolev_norm(PeriodicGridField(S.values - f.values, f.half_width), 2) / norm
    print(f"{k:4d} {defect:18.3e} {grid_sobolev_norm(S, 2) / norm:14.5f}")
