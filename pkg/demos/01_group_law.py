# coding: utf-8

# # Group law on Carnot groups
#
# A Carnot group is stored as a sparse bracket table on a graded basis.  The
# product is the Baker-Campbell-Hausdorff series, which terminates because the
# algebra is nilpotent.

# In[1]:

from fractions import Fraction

import numpy as np

from carnotheat import bch_product, dilate, gauge, get_group, inverse, validate_algebra
from carnotheat.algebra import bch_symbolic


# On the Heisenberg group the product of the two horizontal generators picks up
# half their bracket in the vertical coordinate.

# In[2]:

h1 = get_group("h1")
print(bch_product([1, 0, 0], [0, 1, 0], h1))   # [1, 1, 0.5]
print(inverse(np.array([1, 1, 0.5])))


# Engel has step 3, so the series has a third-order term.  Exact rational
# arithmetic shows the 1/12.

# In[3]:

engel = get_group("engel")
print(bch_symbolic([Fraction(1), 0, 0, 0], [0, Fraction(1), 0, 0], engel))


# The validator checks antisymmetry, the Jacobi identity, the grading and
# generation by the first layer.

# In[4]:

rep = validate_algebra(engel)
print(rep.ok, rep.checks)


# Dilations are group automorphisms and the gauge is homogeneous of degree one.

# In[5]:

rng = np.random.default_rng(0)
g, h = rng.uniform(-1, 1, size=(2, 4))
lhs = dilate(2.0, bch_product(g, h, engel), engel)
rhs = bch_product(dilate(2.0, g, engel), dilate(2.0, h, engel), engel)
print(np.max(np.abs(lhs - rhs)))
print(gauge(dilate(3.0, g, engel), engel) / gauge(g, engel))
