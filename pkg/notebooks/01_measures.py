# %% [markdown]
# # Intensity measures
#
# A starting-point measure is a finite mixture of exponential densities
# `w * exp(-k x)` (rate 0 is a multiple of Lebesgue measure) and Gaussian
# components. Convolving with a Gaussian keeps the family closed, which is
# what makes the one-time intensities explicit.

# %%
import numpy as np

from gaussys import measures as ms

m = ms.MeasureSpec([(1.0, 1.0), (0.5, 0.0)], [ms.GaussianMeasure1D(2.0, 0.25, 3.0)])
m

# %% [markdown]
# Convolution with `N(mu, v)` multiplies each exponential weight by
# `exp(k mu + k^2 v / 2)`; Gaussian components add means and variances.

# %%
n = ms.GaussianMeasure1D(0.3, 0.8)
conv = ms.convolve_with_gaussian(m, n)
conv.exp_terms, conv.gaussian_terms

# %% [markdown]
# Two different Gaussians can leave an exponential mixture unchanged when the
# rate matches `-2 (mu2 - mu1) / (v2 - v1)`.

# %%
mu1, v1, mu2, v2 = 0.0, 0.5, -0.6, 1.1
lam = -2 * (mu2 - mu1) / (v2 - v1)
mix = ms.MeasureSpec([(1.0, lam), (2.0, 0.0)])
x = np.linspace(-3, 3, 7)
a = ms.density(ms.convolve_with_gaussian(mix, ms.GaussianMeasure1D(mu1, v1)), x)
b = ms.density(ms.convolve_with_gaussian(mix, ms.GaussianMeasure1D(mu2, v2)), x)
print(lam, np.max(np.abs(a - b) / a))

# %% [markdown]
# Interval masses and inverse-CDF sampling on a window.

# %%
print(ms.mass_on_interval(ms.exponential(1.0), 0.0, np.log(2)))
rng = np.random.default_rng(0)
draws = ms.sample_on_window(ms.exponential(1.0), -1.0, 2.0, 100_000, rng)
hist, edges = np.histogram(draws, bins=6, range=(-1, 2))
expected = [ms.mass_on_interval(ms.exponential(1.0), lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]
print(hist / len(draws))
print(np.array(expected) / ms.mass_on_interval(ms.exponential(1.0), -1.0, 2.0))
