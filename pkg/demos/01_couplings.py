# # Couplings of a layer distribution
#
# A distribution over n binary nodes is fixed by 2^n - 1 numbers: the
# coefficients of -log q on the products of spins s_i = 2 h_i - 1. This
# script pulls those couplings out of a small network layer and puts the
# distribution back together from them.

# %%
import numpy as np

from rgaudit.exact import exact_layer_distribution
from rgaudit.nets import random_stack
from rgaudit.operators import couplings_from_distribution, distribution_from_couplings, enumerate_basis

rng = np.random.default_rng(0)
stack = random_stack([4, 3], rng)
x = np.array([0.2, 0.9, 0.5, 0.1])

# %% [markdown]
# The first layer's conditional given x is a product of Bernoullis, so only
# single-spin couplings should be non-zero.

# %%
q = exact_layer_distribution(stack, x, 1).probabilities
basis = enumerate_basis(3)
g = couplings_from_distribution(q, basis)
for mask, value in zip(basis.masks(), g.values):
    print(f"{str(mask):12s} {value:+.6f}")

# %% [markdown]
# Reconstruction is exact up to rounding.

# %%
back = distribution_from_couplings(g)
print("total variation after round trip:", 0.5 * np.abs(back - q).sum())
