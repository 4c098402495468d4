# %% [markdown]
# # The induced-norm small-gain condition
#
# The condition asks for the L-infinity induced norm of
# `(sI - A_m)^-1 b theta^T s/(s + k)` to be below one.  For a scalar plant the
# impulse response has a closed form; elsewhere it is integrated numerically.

# %%
import math

import numpy as np

from l1equiv import ReferenceModel
from l1equiv.analysis import linf_condition_norm

ref, theta = ReferenceModel([1.0]), np.array([-2.0])
ts = math.log(4.0) / 3.0
closed = 2 * abs(-2 / 3 * math.exp(-ts) + 2 / 3 * math.exp(-4 * ts))
print(f"k=4: numeric {linf_condition_norm(ref, theta, 4.0):.7f}  closed form {closed:.7f}")

# %%
for k in (0.1, 1.0, 4.0, 10.0, 100.0):
    v = linf_condition_norm(ref, theta, k)
    print(f"k={k:6.1f}: norm {v:.4f}  condition {'holds' if v < 1 else 'fails'}")
