# %% [markdown]
# # Five features, two of them redundant
#
# X1, X2 and X4 are uniform on {0, 1, 2}. X3 copies X2 and X5 is constant.
# The target is sign(X1 - X2 + 0.5 X3), which in effect reads only X1 and X2.
# A decomposition that respects the dependence should put all of the
# signal on X1, X2 and their pair. It should not touch the copy, the
# constant, or the independent noise feature X4.

# %%
import numpy as np

from catanova import component_norms, decompose, global_importances, metrics
from catanova.datasets import analytical_case

dist, f = analytical_case()
print(f"support: {dist.r} rows on a grid of {dist.grid.size} cells")

# %%
dec = decompose(dist, f)
print("selected keys:", [str(k) for k in dec.keys])
# no key mentions feature index 2 (X3) or 4 (X5)
assert all(2 not in k.A and 4 not in k.A for k in dec.keys)

# %% [markdown]
# Squared component norms. The exact values are 1/9, 14/27, 2/27 and 2/27.
# Everything that involves X4 vanishes.

# %%
norms = component_norms(dec)
for A, v in sorted(norms.items(), key=lambda t: -t[1]):
    name = "{" + ",".join(f"X{i + 1}" for i in A) + "}"
    print(f"{name:12s} {v:.6f}")
np.testing.assert_allclose(norms[(0,)], 14 / 27, atol=1e-12)

# %%
report = metrics(dec, f)
print(f"R^2 = {report.r_squared:.3f}, MSE = {report.mse:.1e}, "
      f"orthogonality = {report.orthogonality_metric:.1e}")
print("global importances:", np.round(global_importances(dec), 4))
