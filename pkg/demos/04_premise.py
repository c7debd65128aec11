# # Does the trained stack approximate the true posterior?
#
# The prototype-plus-noise task has a closed-form p(y | x). A stack trained on
# samples of it should land far closer to that posterior than an untrained
# one.

# %%
import numpy as np

from rgaudit.fim import kl_to_posterior
from rgaudit.rbm import TrainConfig, initial_stack, train_layerwise
from rgaudit.rng import substream
from rgaudit.tasks import TaskSpec, posterior, sample_task

task = TaskSpec.default(n_in=8, n_classes=2, flip_noise=0.1)
X, y = sample_task(task, 500, substream(0, "train"))
cfg = TrainConfig(seed=0)

# %%
trained = train_layerwise(X, y, cfg)
print("training accuracy:", trained.meta["train_accuracy"])

# %%
Xt, _ = sample_task(task, 100, substream(0, "test"))
for name, stack in [("trained", trained), ("untrained", initial_stack(8, 2, cfg))]:
    kl = np.mean([kl_to_posterior(posterior(task, x), stack, x) for x in Xt])
    print(f"{name:10s} mean KL(p || q_N) = {kl:.4f}")
