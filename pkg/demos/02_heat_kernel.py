# coding: utf-8

# # Explicit heat kernel on step-two groups
#
# For step two the kernel is a single oscillatory integral over the vertical
# frequency, evaluated here by Gauss-Legendre panels with a refinement error.

# In[1]:

import numpy as np

from carnotheat import (KernelEngine, decoupling_marginal, euclidean_kernel, get_group,
                        kernel_normalization, step2_kernel)

h1 = get_group("h1")
eng = KernelEngine(h1)


# At the identity and t = 1 the Heisenberg kernel equals 1/16.

# In[2]:

print(step2_kernel(np.zeros(3), 1.0, eng))


# Parabolic scaling: p(delta_lam g, lam^2 t) = lam^-Q p(g, t) with Q = 4.

# In[3]:

g = np.array([0.7, -0.2, 0.4])
lam = 1.7
print(eng.evaluate(np.array([lam * 0.7, lam * -0.2, lam ** 2 * 0.4]), lam ** 2)[0]
      * lam ** 4, eng.evaluate(g, 1.0)[0])


# The kernel is a probability density.

# In[4]:

for t in (0.25, 1.0, 4.0):
    print(t, kernel_normalization(eng, t))


# Integrating out the vertical variable leaves the Euclidean heat kernel on
# the horizontal layer.

# In[5]:

z = np.array([[0.0, 0.0], [1.0, -0.5], [2.0, 1.0]])
est = decoupling_marginal(eng, z, 1.0)
print(est.value)
print(euclidean_kernel(z, 1.0))
