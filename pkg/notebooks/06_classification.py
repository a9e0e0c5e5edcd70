# %% [markdown]
# # Classifying stationary pairs
#
# A pair is stationary when it falls in one of three families: an
# exponential measure with a matching self-similar drift (S3), a multiple of
# Lebesgue measure with a linear drift (S2), or a stationary process with any
# admissible measure (S1*, what remains after removing S2 and S3).

# %%
from gaussys import measures as ms
from gaussys.analytic import PairSpec
from gaussys.classify import canonicalize, classify_pair, equal_in_law_analytic
from gaussys.processes import FBM, IncrementVariance, Kernel, LinearDrift, ProcessSpec, SelfSimilarDrift
from gaussys.processes import StationaryKernel, StatIncrementDrift
from gaussys.verify import equal_in_law_mc

pairs = {
    "brown-resnick": PairSpec(ms.exponential(1.0), ProcessSpec(FBM(1.0, SelfSimilarDrift(1.0, 3.0)))),
    "lebesgue, bm + 2t + 5": PairSpec(ms.lebesgue(), ProcessSpec(FBM(1.0, LinearDrift((2.0,), 5.0)))),
    "gaussian, ou": PairSpec(ms.gaussian(0.0, 1.0), ProcessSpec(StationaryKernel(Kernel("exp")))),
    "e_1, bm": PairSpec(ms.exponential(1.0), ProcessSpec(StatIncrementDrift(IncrementVariance("bm")))),
}
for name, pair in pairs.items():
    print(f"== {name}")
    print(classify_pair(pair).to_text())

# %% [markdown]
# Canonical representatives have `xi(0) = 0`; the offset moves into the measure.

# %%
c = canonicalize(pairs["brown-resnick"])
print(c.measure, c.process)
print(equal_in_law_mc(pairs["brown-resnick"], c, replicates=20_000, seed=3).verdict)

# %% [markdown]
# Two S1* pairs are equal in law when one process is the other plus an
# independent Gaussian variable and the measures compensate for it.

# %%
a = PairSpec(ms.gaussian(0.0, 1.5), ProcessSpec(StationaryKernel(Kernel("exp", 0.5))))
b = PairSpec(ms.gaussian(0.0, 1.0), ProcessSpec(StationaryKernel(Kernel("exp", 0.5, 1.0, 0.5))))
res = equal_in_law_analytic(a, b)
print(res.equal, res.certificate)
print(equal_in_law_mc(a, b, replicates=20_000, seed=4).verdict)
