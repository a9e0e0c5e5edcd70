# %% [markdown]
# # Testing stationarity by simulation
#
# Box counts at the design times are compared with counts at shifted times by
# two-sample z-tests under a Bonferroni correction. Closed-form values are
# attached where they exist.

# %%
from gaussys import measures as ms
from gaussys.analytic import PairSpec
from gaussys.processes import FBM, ProcessSpec, SelfSimilarDrift
from gaussys.verify import Design, equal_in_law_mc, stationarity_test

br = PairSpec(ms.exponential(1.0), ProcessSpec(FBM(1.0, SelfSimilarDrift(1.0))))
print(stationarity_test(br, replicates=20_000, seed=1).to_text())

# %% [markdown]
# Without the drift the intensity at `t = 1` is `e^{1/2}` times that at `t = 0`.

# %%
bm = PairSpec(ms.exponential(1.0), ProcessSpec(FBM(1.0)))
small = Design(times=(0.0,), shifts=(1.0,), boxes=((0.0, 1.0), (-1.0, 0.0)), rectangles=())
print(stationarity_test(bm, small, replicates=10_000, seed=1).to_text())

# %%
print(equal_in_law_mc(br, bm, small, replicates=10_000, seed=2).to_text())
