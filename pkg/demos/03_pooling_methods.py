"""Tour of the spatial pooling strategies on one activation map.

Shows gap / gmp / GeM / CroW / concat outputs side by side, the power-mean
ordering gap <= GeM(p) <= gmp, and GeM's march toward max pooling as p
grows.
"""

import numpy as np

from oodkit import PoolingSpec, SpatialFeatureMap, pool

rng = np.random.default_rng(42)

# A post-ReLU-looking map: sparse nonnegative activations, 6 channels, 7x7.
x = np.maximum(rng.standard_normal((6, 7, 7)), 0.0)
m = SpatialFeatureMap(x)

print("channel 0 of the map:")
print(np.array2string(x[0], precision=2, suppress_small=True))
print()

for label, spec in [
    ("gap", PoolingSpec("gap")),
    ("gmp", PoolingSpec("gmp")),
    ("gem p=3", PoolingSpec("gem")),
    ("crow", PoolingSpec("crow")),
    ("concat gap+gmp", PoolingSpec("concat", members=("gap", "gmp"))),
]:
    vec = pool(m, spec)
    shown = np.array2string(vec[:6], precision=3)
    print(f"{label:15s} len={len(vec):2d}  {shown}")

print()
print("power-mean ordering per channel (gap <= gem <= gmp):")
gap = pool(m, PoolingSpec("gap"))
gmp = pool(m, PoolingSpec("gmp"))
for p in (1, 2, 4, 8, 16, 64):
    gem = pool(m, PoolingSpec("gem", gem_power=float(p)))
    assert np.all(gap <= gem + 1e-12) and np.all(gem <= gmp + 1e-12)
    print(f"  p={p:3d}: mean gem/gmp ratio = {np.mean(gem / gmp):.4f}")
print("GeM sweeps from average pooling (p=1) to max pooling (p -> inf).")
