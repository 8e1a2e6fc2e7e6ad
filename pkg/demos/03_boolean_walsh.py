# %% [markdown]
# # The uniform Boolean cube
#
# With independent fair bits, each basis column is a scaled parity
# function. The components are then the Walsh-Fourier terms of the
# target. We check this against a direct transform on {0,1}^6.

# %%
import numpy as np

from catanova import component_norms, decompose
from catanova.datasets import boolean_cube
from catanova.oracle import parity, walsh_transform

rng = np.random.default_rng(0)
dist = boolean_cube(6)
x = dist.support
f = (x[:, 0] & x[:, 1]) + 0.5 * parity(x, (2, 3, 4)) + 0.1 * rng.normal(size=dist.r)

dec = decompose(dist, f)
coef = walsh_transform(dist, f)
dev = max(np.max(np.abs(dec.component(A) - c * parity(x, A))) for A, c in coef.items())
print(f"max deviation from the Walsh expansion: {dev:.1e}")

# %% [markdown]
# Parseval: the squared norms add up to the second moment. The largest
# terms come from the AND gate and from the planted three-way parity.

# %%
norms = component_norms(dec)
print(f"sum of squared norms {sum(norms.values()):.12f}, E[f^2] {np.mean(f * f):.12f}")
for A, v in sorted(norms.items(), key=lambda t: -t[1])[:6]:
    print(A, round(v, 4))
