# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Dilations and ergodic averages
#
# A convex combination of isometries has a power expansion indexed by
# schedules. With rational weights the identity can be checked exactly.

# %%
from fractions import Fraction

import numpy as np

from ncergodic import dilation, ergodic

one, zero = Fraction(1), Fraction(0)
swap = np.array([[zero, one], [one, zero]], dtype=object)
eye = np.array([[one, zero], [zero, one]], dtype=object)
fam = dilation.ConvexFamily((Fraction(1, 3), Fraction(2, 3)), (swap, eye))
for n in range(4):
    print(n, dilation.one_var_identity_check(fam, 3, n))

# %% [markdown]
# Two commuting families give a joint dilation. The report lists one
# residual per multi-index.

# %%
rng = np.random.default_rng(1)
fam_f = dilation.ConvexFamily((0.25, 0.75), (np.array([[0, 1], [1, 0]]), np.eye(2)))
system = dilation.build_dilation([fam_f, fam_f], N=2, p=2.0)
report = dilation.verify_joint_dilation(system, [rng.standard_normal(2) for _ in range(3)])
print(report.passed, report.dimensions)

# %% [markdown]
# Cesàro averages of a unitary converge to the projection onto its fixed
# vectors. The square function measures how much the averages oscillate.

# %%
U = ergodic.random_unitary(3, rng)
x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
for n in (1, 4, 16, 64):
    print(n, np.round(ergodic.cesaro_average(U, n) @ x, 4))

exhaustive = ergodic.sup_square_function(x, U, 2, 8)
greedy = ergodic.sup_square_function(x, U, 2, 8, mode="greedy")
print(exhaustive.value, exhaustive.subsequence)
print(greedy.value, greedy.subsequence)

# %% [markdown]
# The sup ratio grows with the largest index but levels off.

# %%
_, summary = ergodic.sweep({"p": [2], "dims": [2], "n_max": [4, 6, 8], "trials": 20, "seed": 0})
for key, val in sorted(summary.items()):
    print(key, round(val, 4))
