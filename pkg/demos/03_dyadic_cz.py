# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Dyadic cubes and the Calderón–Zygmund decomposition
#
# Finite metric measure spaces carry a system of nested dyadic cubes.
# Matrix-valued fields on them decompose into a good part and two bad parts.

# %%
import numpy as np

from ncergodic.harmonic import (
    OperatorField,
    build_dyadic_system,
    cz_decompose,
    doubling_constant,
    estimate_sqfn_constants,
    verify_dyadic_system,
    z_interval,
    zeta_projection,
)

space = z_interval(32)
print("doubling constant", doubling_constant(space).D)
system = build_dyadic_system(space)
print([c.ok for c in verify_dyadic_system(system)])

# %% [markdown]
# A positive field with one tall spike.

# %%
rng = np.random.default_rng(0)
a = rng.standard_normal((32, 2, 2))
vals = np.einsum("nij,nkj->nik", a, a)
vals[5] *= 40
f = OperatorField(space, vals)
res = cz_decompose(f, system, lam=2.0)
for check in res.checks:
    print(check.name, check.ok)

# %% [markdown]
# The projection zeta avoids the enlarged bad cubes.

# %%
z = zeta_projection(res, system)
print(z.ok, z.phi_one_minus_zeta, z.chain_bound)

# %% [markdown]
# Empirical square function constants for a few trials.

# %%
print(estimate_sqfn_constants(system, 2.0, 10, 0).to_json())
