# %% [markdown]
# # Trajectory-dependent claims are fragile
#
# For `x1' = -x1, x2' = x2 - x1` the decaying eigendirection is `x1 = 2 x2`.
# A start on it converges; any offset `eps` in `x2` excites the growing mode
# `eps e^t`, which crosses the blow-up threshold at `ln(1e6 / eps)`.

# %%
import math

from l1equiv import IntegratorConfig
from l1equiv.analysis import fragility_demo

for eps in (0.0, 1e-6, 1e-3, 1.0):
    on, off = fragility_demo(eps, IntegratorConfig(1e-3, 40, 100))
    pred = math.log(1e6 / eps) if eps else float("inf")
    print(f"eps={eps:g}: on-manifold {on.verdict.value}, perturbed {off.verdict.value} "
          f"at {off.diverged_at}  (predicted {pred:.3f})")
