"""Building blocks in isolation: kernel constants, Gaussian cubature and FE rates.

    python demos/cubature_rates.py
"""

from mdfem.cli import cubature_errors, fem_errors, fitted_slope
from mdfem.gausscube import constant_M, constant_M_bound

print("alpha  M(alpha)  closed-form bound")
for alpha in range(1, 7):
    print(f"{alpha:5d}  {constant_M(alpha):8.4f}  {constant_M_bound(alpha):8.4f}")

# integrand prod_j (exp(y_j/2) - 1), interlacing order 2, lambda = 1
print("\ns  cubature error slope over n = 2^6..2^14")
for s in (1, 2, 3):
    rows = cubature_errors(s, 2, 1.0, range(6, 15))
    print(f"{s}  {-fitted_slope([r[0] for r in rows], [r[4] for r in rows]):.3f}")

rows = fem_errors(1, range(3, 10))
slope = -fitted_slope([1 / r[0] for r in rows], [r[2] for r in rows])
print(f"\nP1 functional error slope over h = 2^-3..2^-9: {slope:.3f}")
