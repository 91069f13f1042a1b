# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Matrix Lp norms and Lamperti operators
#
# Matrix algebras with a trace behave like small noncommutative Lp spaces.
# This script computes Schatten norms, then builds a weighted permutation
# and compares its closed-form p -> p norm with power iteration.

# %%
import numpy as np

from ncergodic import lamperti, opalg

rng = np.random.default_rng(0)
x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
for p in (1, 1.5, 2, 4, np.inf):
    print(f"||x||_{p} = {opalg.schatten_norm(x, p):.6f}")

# %% [markdown]
# The norm is invariant under adjoints and under taking the modulus.

# %%
print(opalg.schatten_norm(x.conj().T, 3) - opalg.schatten_norm(x, 3))
print(opalg.schatten_norm(opalg.modulus(x), 3) - opalg.schatten_norm(x, 3))

# %% [markdown]
# A weighted permutation sends the i-th diagonal unit to b_i times the
# pi(i)-th one. On the diagonal algebra its norm has a closed form.

# %%
b = np.array([0.5, 2.0, 1.0, 1.5])
T = lamperti.weighted_permutation(b, [1, 2, 3, 0])
for p in (1.5, 3.0):
    closed = lamperti.weighted_permutation_norm(T, p)
    iterated = lamperti.operator_pnorm(T, p, algebra="diagonal")
    print(p, closed, iterated)

# %% [markdown]
# The modulus of a Lamperti operator is again Lamperti.

# %%
M = lamperti.lamperti_modulus(T)
print(lamperti.is_lamperti(M, 4).ok)
