# coding: utf-8

# # Heat Besov seminorms from a Phi profile
#
# Phi(t) = int P_t(|f - f(g)|^p)(g) dg is tabulated once on a log grid.
# Seminorms for any s come from integrating t^(-s p / 2) Phi(t) dt / t, with
# model tails below and above the grid.

# In[1]:

import numpy as np

from carnotheat import (bbm_seminorm_limit, besov_embedding_bound, besov_seminorm,
                        get_function, get_group, ms_limit, phi_profile, sandwich_check)
from carnotheat.functionals import gaussian_moment_constant

r1 = get_group("r1")
f = get_function("r1_bump").field
prof = phi_profile(f, 2.0, np.geomspace(1e-4, 1e3, 15), r1)
print(prof.metadata["plateau_ratio"], prof.metadata["small_t_ratio"], prof.flags)


# As s -> 1, (1 - s) N^p recovers the Sobolev energy.

# In[2]:

print(bbm_seminorm_limit(f, 2.0, [0.99, 0.995, 0.999], prof).ratio)


# As s -> 0, s N^p recovers (4/p) ||f||_p^p.

# In[3]:

print(ms_limit(f, 2.0, [0.02, 0.01], prof).ratio)


# The embedding bound holds for every s.

# In[4]:

cp = gaussian_moment_constant(2.0, 1)
for s in (0.1, 0.5, 0.9):
    print(s, besov_seminorm(f, s, 2.0, prof).value, besov_embedding_bound(prof, s, cp))


# On a finite grid the liminf/limsup chain becomes two inequalities.

# In[5]:

rep = sandwich_check(prof, prof.t[:3], [0.9999, 0.99999, 0.999999])
print(rep["left"], rep["min_s"], rep["max_s"], rep["right"], rep["ok"])
