# # Stiff input directions
#
# The Fisher information over inputs says how fast the output distribution
# moves when x moves. Its top eigenvector is the cheapest direction for an
# attacker; the bottom one is the control.

# %%
import numpy as np

from rgaudit.exact import fim_fd
from rgaudit.fim import evaluate_attack, exact_fim, top_mode
from rgaudit.nets import random_stack

rng = np.random.default_rng(3)
stack = random_stack([4, 3, 3, 2], rng, 1.5)
x = np.array([0.4, 0.6, 0.5, 0.3])

# %%
F = exact_fim(stack, x)
print("relative Frobenius gap to finite-difference Hessian:",
      np.linalg.norm(F.matrix - fim_fd(stack, x)) / np.linalg.norm(F.matrix))
vals, _ = F.spectrum()
print("FIM spectrum:", np.array2string(vals, precision=4))

# %% [markdown]
# Sweep the perturbation size along both directions.

# %%
lam, v = top_mode(F)
rep = evaluate_attack(stack, x, v, [0.01, 0.02, 0.05, 0.1], fim=F)
for (eps, kt), (_, kc) in zip(rep.kl_curve("top"), rep.kl_curve("control")):
    print(f"eps={eps:<5} KL top={kt:.3e}  control={kc:.3e}  quadratic={0.5 * eps**2 * lam:.3e}")
