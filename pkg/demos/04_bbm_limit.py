# coding: utf-8

# # BBM limit of the heat-semigroup energy
#
# t^(-p/2) int P_t(|f - f(g)|^p)(g) dg tends to 2 Gamma(p)/Gamma(p/2) times the
# horizontal Sobolev energy as t -> 0.

# In[1]:

from carnotheat import DiffusionSampler, bbm_limit, get_function, get_group


# On the line the Gaussian law is integrated by quadrature, so the limit is
# reached to quadrature accuracy.  The exact target for p = 2 is 2 * 256/105.

# In[2]:

r1 = get_group("r1")
f = get_function("r1_bump").field
rep = bbm_limit(f, 2.0, [4e-4, 2e-4, 1e-4, 5e-5], r1)
print(rep.limit, rep.target, rep.ratio)


# On Heisenberg the increments are Monte Carlo endpoints.  A control variate
# built from the horizontal gradient keeps the error small at few paths.

# In[3]:

h1 = get_group("h1")
g = get_function("h1_bump").field
sampler = DiffusionSampler(h1, 0.02, 0.001, 64, seed=3)
rep = bbm_limit(g, 2.0, [0.02, 0.01, 0.005], sampler)
print(rep.to_csv())
print("ratio", rep.ratio, "+-", rep.ratio_error)
