# %% [markdown]
# # Gaussian processes on a time grid
#
# Processes are described by a family (stationary kernel, stationary
# increments with a drift, fractional Brownian motion) and evaluated through
# their mean vector and covariance matrix on a grid.

# %%
import numpy as np

from gaussys import processes as pr
from gaussys.processes import FBM, Kernel, LinearDrift, ProcessSpec, SelfSimilarDrift, StationaryKernel

times = [0.0, 0.5, 1.0, 2.0]
bm = ProcessSpec(FBM(1.0, SelfSimilarDrift(1.0)))
law = pr.grid_law(bm, times)
law.mean_vector, law.covariance_matrix

# %% [markdown]
# `FBM(kappa)` has `Var W(t) = 2|t|^kappa`; at `kappa = 2` every path is a
# random line and the covariance has rank one.

# %%
np.linalg.eigvalsh(pr.grid_law(ProcessSpec(FBM(2.0)), [0.5, 1.0, 2.0]).covariance_matrix)

# %% [markdown]
# Grid checks for the structural properties used by the classifier.

# %%
ou = ProcessSpec(StationaryKernel(Kernel("exp", 1.0, 0.5)))
drifted = ProcessSpec(FBM(1.0, LinearDrift((3.0,), 1.0)))
for name, p in [("ou", ou), ("bm + 3t + 1", drifted), ("bm - |t|", bm)]:
    print(f"{name:<12} increments {pr.increment_residual(p):.1e}  covariance shift {pr.covariance_shift_residual(p):.1e}")

# %%
pr.additive_check(lambda t: 3 * t, [(a, b) for a in (-1.0, 0.5) for b in (0.0, 2.0)])
