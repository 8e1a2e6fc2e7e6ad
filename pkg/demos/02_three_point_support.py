# %% [markdown]
# # Two Bernoulli features that never fire together
#
# The support is {(0,0), (0,1), (1,0)}, so the inputs are strongly
# dependent and the grid is not fully covered. The raw interaction column
# is a combination of the intercept and the two main-effect columns. Greedy
# selection must therefore stop after three keys.

# %%
import numpy as np

from catanova import SelectionConfig, decompose, greedy_select
from catanova.basis import IndexKey, corrected_phi_values, evaluate_phi, hierarchical_violation
from catanova.datasets import two_bernoulli
from catanova.distribution import inner_product

q1, q2 = 0.3, 0.2
dist = two_bernoulli(q1, q2)
for key in [IndexKey((), ()), IndexKey((0,), (0,)), IndexKey((1,), (0,)), IndexKey((0, 1), (0, 0))]:
    print(f"{str(key):12s}", evaluate_phi(dist, key).values)

# %% [markdown]
# On this support the raw interaction column is not centered: its mean is
# 1 - 1 - 1 = -1. That is why the library projects every column onto
# the functions of X_A whose conditional means given each smaller subset
# vanish. Here that projection sends the interaction column to zero. Every
# function of (x1, x2) on three points is already additive.

# %%
u12 = evaluate_phi(dist, IndexKey((0, 1), (0, 0))).values
print("mean of raw u12:", inner_product(dist, u12, np.ones(3)))
print("violation before/after:", hierarchical_violation(dist, (0, 1), u12),
      hierarchical_violation(dist, (0, 1), corrected_phi_values(dist, IndexKey((0, 1), (0, 0)))))

# %%
print("selected:", [str(k) for k in greedy_select(dist, SelectionConfig()).keys])
dec = decompose(dist, np.array([1.0, -2.0, 4.0]))
for A, comp in dec.components.items():
    print(A, np.round(comp, 6))
