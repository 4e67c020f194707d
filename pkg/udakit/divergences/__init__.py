from .classification import cross_entropy, domain_adv_loss, one_hot
from .coral import coral_loss, covariance
from .kernel import KernelSpec, gaussian_kernel, median_distance, squared_distances
from .mmd import ClassWeights, lmmd2, lmmd_weights, mk_mmd2, mmd2
from .nuclear import Svd, bnm_loss, jacobi_svd, nuclear_norm
from .refinement import confidence_filter, entropy_mean, kl_div, kl_rows, sr_loss
