# %% [markdown]
# # Perturbation decay and the (k, gamma) stability chart
#
# When the adaptive loop stays bounded, `theta_tilde^T x` dies out and the
# Lyapunov function never rises.  Whether it stays bounded is decided by the
# PI gain, not by the adaptation rate.

# %%
from l1equiv import IntegratorConfig, L1Config, PlantParams, ReferenceModel
from l1equiv.analysis import convergence_check, correspondence_violations, stability_sweep
from l1equiv.simulator import run_closed_loop

plant, ref = PlantParams([-1.0]), ReferenceModel([1.0])

run = run_closed_loop("l1ac", plant, ref, L1Config(2.0, 10.0), None, IntegratorConfig(1e-3, 200, 10))
rep = convergence_check(run)
print(f"k=2: tail sup |theta_tilde^T x| = {rep.tail_sup:.2e}, V nonincreasing: {rep.v_nonincreasing}")

# %%
sweep = stability_sweep(plant, ref, [0.25, 0.5, 0.75, 1.0, 1.5, 2.0], [1.0, 10.0, 100.0], IntegratorConfig(1e-3, 80, 100))
print(sweep.to_csv())
violations, exceptions = correspondence_violations(sweep)
print("violations:", violations, " Hurwitz gains where every gamma diverged:", exceptions)
