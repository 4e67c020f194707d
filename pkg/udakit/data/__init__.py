from .dataset import Dataset
from .shift import ShiftSpec, add_gaussian_noise, make_domain, make_shift_pair
from .csv import load_csv, save_csv
from .sampler import BatchPair, labeled_subset, sample_balanced_batch
from .pca import pca2
