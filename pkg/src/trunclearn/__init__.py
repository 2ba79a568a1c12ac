"""Robust regression with truncated losses trained by SGD."""
from .datagen import Dataset, NoiseModel, gen_linear, parse_libsvm, sample_noise, test_set_for, train_test_split, write_libsvm
from .errors import DataError, DimensionError, DomainError, NumericalError, TruncLearnError
from .linmodel import LinearModel, LinearProblem, ObjectiveSpec, full_gradient, objective, ridge_oracle, sample_gradient
from .loss import BaseLoss, TruncatedLoss
from .optim import SgdConfig, StepRule, TrainReport, grad_variance, sgd
from .truncation import Truncation, TruncationConstants, check_axioms, constants_of, phi, phi_prime, phi_second

__version__ = "0.1.0"
