# # Following couplings through depth
#
# Each layer maps the couplings of the layer below to new couplings. Its
# linearisation, the stability matrix T, is estimated here from sampled
# chains and compared with the value computed by enumeration.

# %%
import numpy as np

from rgaudit.mcrg import FlowConfig, analysis_bases, exact_expectation_set, flow_for_input, solve_stability
from rgaudit.nets import EXPANDING_INPUT, expanding_stack, identity_stack
from rgaudit.rbm import RbmLayer

stack = expanding_stack()
x = EXPANDING_INPUT
config = FlowConfig(n_chains=200_000, max_degree=2, n_boot=100, seed=0)

# %%
report = flow_for_input(stack, x, config)
t = report.transitions[0]
print("transition", t.transition, "condition number", round(t.condition_number, 1))
for m in t.eigenmodes[:3]:
    print(f"|Lambda| = {m.magnitude:.3f} +/- {m.stderr:.3f}  relevant={m.relevant}")

# %% [markdown]
# The same matrix from enumerated moments (no sampling noise).

# %%
bases = analysis_bases(stack, 2)
exact_T = solve_stability(exact_expectation_set(stack, x, 1, bases[0]),
                          exact_expectation_set(stack, x, 2, bases[1], bases[0]), 0.0, n_boot=0)
print("largest |T_exact - T_sampled|:", np.abs(exact_T.matrix - t.matrix).max())

# %% [markdown]
# A copy kernel leaves the couplings unchanged: every eigenvalue sits at one
# and nothing is flagged.

# %%
first = RbmLayer([[2.0, -1.0, 0.5], [0.5, 1.5, -1.0], [1.0, 0.0, -2.0]], [0.1, -0.4, 0.3], np.zeros(3))
copy = flow_for_input(identity_stack(3, 3, first), [0.3, 0.5, 0.8], config)
print("copy kernel top |Lambda| per transition:", [round(v, 6) for v in copy.top_eigenvalues])
print("any relevant mode:", copy.has_relevant)
