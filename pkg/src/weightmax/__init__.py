"""Training networks of Bernoulli-logistic units with local learning rules.

The package provides the sigmoid calculus behind high-order Weight
Maximization (``math_kernel``), the stochastic network (``network``), the
gradient estimators (``estimators``), exact enumeration of small networks
(``oracle``), the multiplexer task (``tasks``), batched Adam training
(``trainer``), a scikit-learn wrapper (``classifier``) and a CLI (``cli``).
"""

from .classifier import BernoulliNetworkClassifier
from .estimators import EstimatorConfig, UWMVariant, estimate, individual_rewards
from .exceptions import BoundsError, CapacityError, ConfigurationError, DomainError, ShapeError, WeightMaxError
from .network import ForwardTrace, GradientEstimate, NetworkParams, forward_deterministic, forward_sample, init_params
from .oracle import EnumerableTask, appendix_c4_study, estimator_bias_variance, exact_gradient, natural_extension_value
from .tasks import MultiplexerTask
from .trainer import TrainConfig, sweep, train_run

__version__ = "0.1.0"

__all__ = [
    "BernoulliNetworkClassifier",
    "BoundsError",
    "CapacityError",
    "ConfigurationError",
    "DomainError",
    "EnumerableTask",
    "EstimatorConfig",
    "ForwardTrace",
    "GradientEstimate",
    "MultiplexerTask",
    "NetworkParams",
    "ShapeError",
    "TrainConfig",
    "UWMVariant",
    "WeightMaxError",
    "appendix_c4_study",
    "estimate",
    "estimator_bias_variance",
    "exact_gradient",
    "forward_deterministic",
    "forward_sample",
    "individual_rewards",
    "init_params",
    "natural_extension_value",
    "sweep",
    "train_run",
]
