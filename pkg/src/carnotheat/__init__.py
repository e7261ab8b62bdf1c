"""Heat kernels, hypoelliptic diffusions and BBM/Besov functionals on Carnot groups."""

from .algebra import (Stratification, StructureConstants, axiom_audit, bch_product, dilate,
                      gauge, identity, inverse, kaplan_map, validate_algebra)
from .catalog import CATALOG, get_group, group_from_dict, group_to_dict, load_group
from .diffusion import (DiffusionSampler, SampleSet, huisken_statistic, kde_kernel_estimate,
                        ledoux_constant, ledoux_statistic, marginal_gaussian_test,
                        sample_endpoints, write_endpoints)
from .estimate import Estimate, LimitReport, extrapolate
from .frame import horizontal_frame, horizontal_gradient, ito_correction_audit
from .functionals import (PhiProfile, bbm_energy, bbm_limit, bbm_limits, bbm_seminorm_limit,
                          besov_embedding_bound, besov_seminorm, diffquot_bound_check,
                          diffquot_bound_profile, lp_norm, ms_limit, phi_profile, phi_profiles,
                          sandwich_check, sobolev_energy)
from .heat_kernel import (KernelEngine, decoupling_marginal, euclidean_kernel,
                          kernel_normalization, step2_kernel)
from .testfns import FUNCTIONS, ScalarField, get_function, make_bump

__version__ = "0.1.0"
