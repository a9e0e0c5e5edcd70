# %% [markdown]
# # Closed-form intensities
#
# The particles of a pair `(m, xi)` start at Poisson points of `m` and move
# as independent copies of `xi`. At one time the positions form a Poisson
# process with intensity `m * N(mu(t), sigma^2(t))`; at two times the
# intensity of an exponential measure reduces to a one-dimensional integral.

# %%
import numpy as np

from gaussys import measures as ms
from gaussys.analytic import PairSpec, bivariate_intensity, decompose_layer, onedim_density, pair_grid_law, psi_kappa
from gaussys.processes import FBM, ProcessSpec, SelfSimilarDrift

br = PairSpec(ms.exponential(1.0), ProcessSpec(FBM(1.0, SelfSimilarDrift(1.0, 0.0))))
x = np.linspace(-2, 2, 5)
for t in (0.0, 1.0, 5.0):
    print(t, onedim_density(br, t, x))

# %% [markdown]
# Shifting both times leaves the two-time intensity unchanged.

# %%
rect = ((0.0, 1.0), (-1.0, 1.0))
[bivariate_intensity(br, h, 1 + h, rect) for h in (0.0, 0.5, 1.0, 3.0)]

# %% [markdown]
# The diagonal layer behind the two-time formula: a Gaussian profile with
# total mass, mean and variance read off the two-point law.

# %%
law = pair_grid_law(br, [0.0, 1.0])
layer = decompose_layer(law, 1.0)
print(layer.total_mass, layer.profile_mean, layer.profile_variance)
print(psi_kappa(law, 1.0, 0.5), layer.laplace(0.5))
