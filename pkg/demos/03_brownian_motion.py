# coding: utf-8

# # Horizontal Brownian motion
#
# Endpoints of the hypoelliptic diffusion are simulated in fixed blocks, each
# with its own counter-based random stream, so results do not depend on the
# number of threads.

# In[1]:

import numpy as np

from carnotheat import (DiffusionSampler, get_group, huisken_statistic, ledoux_constant,
                        ledoux_statistic, marginal_gaussian_test, sample_endpoints)
from carnotheat.frame import horizontal_frame, ito_correction_audit


# On Heisenberg the Ito correction vanishes and the layer-exact scheme is
# used.  On Engel it does not, so the sampler falls back to Heun.

# In[2]:

for name in ("h1", "engel"):
    print(name, ito_correction_audit(horizontal_frame(get_group(name))).vanishes,
          DiffusionSampler(get_group(name), 1.0, 0.05, 10).resolved_scheme())


# The horizontal block is Gaussian with covariance 2t, whatever the group.

# In[3]:

s = sample_endpoints(DiffusionSampler(get_group("engel"), 1.0, 0.02, 50_000, seed=1))
rep = marginal_gaussian_test(s)
print(rep["ok"], rep["checks"])


# Ledoux constants: E|<nu, z>|^p / t^(p/2) = 2 Gamma(p) / Gamma(p/2).

# In[4]:

for p in (1, 2, 3):
    print(p, ledoux_statistic(s, [0.6, 0.8], p), ledoux_constant(p))


# Huisken identity: sqrt(4 pi t) times the density of <nu, z> at 0 is 1.

# In[5]:

print(huisken_statistic(s, [1.0, 0.0]))


# Coarse steps lose the intra-step areas, which shows in the vertical
# variance.  Statistics of the vertical layer need a fine step.

# In[6]:

for h in (0.1, 0.01):
    pts = sample_endpoints(DiffusionSampler(get_group("h1"), 1.0, h, 50_000, seed=2)).points
    print(h, np.var(pts[:, 2]))
