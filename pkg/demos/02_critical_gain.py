# %% [markdown]
# # Closed-loop polynomial and the critical gain
#
# With the estimate frozen at the true parameters, the loop matrix
# `[[A, b], [k theta^T, -k]]` has characteristic polynomial
# `s p_A(s) + k p_Am(s)`, which is exactly the PI loop polynomial.  It does not
# depend on the estimator, so a low filter gain destabilises both loops.

# %%
from l1equiv import PlantParams, ReferenceModel, theta_from
from l1equiv.analysis import charpoly_a0, critical_gain, loop_polynomial, polynomial_agreement
from l1equiv.poly_linalg import poly_roots_oracle, routh_hurwitz

plant, ref = PlantParams([-1.0, -1.0]), ReferenceModel([1.0, 2.0])
lhs, rhs = charpoly_a0(plant, ref, theta_from(plant, ref), 1.0)
print("det(sI - A0) coefficients:", lhs.coeffs)
print("s pA + k pAm coefficients:", rhs.coeffs)
print("relative discrepancy:", polynomial_agreement(lhs, rhs))

# %%
kc = critical_gain(plant, ref, 0.1, 10.0, tol=1e-10)
print(f"critical gain k_c = {kc:.10f}")
for k in (kc - 0.1, kc + 0.1):
    p = loop_polynomial(plant, ref, k)
    roots = poly_roots_oracle(p)
    print(f"k={k:.4f}: {routh_hurwitz(p).tag.value:8s} max Re root = {max(r.real for r in roots):+.4f}")
