"""scikit-learn estimator wrapper around :func:`~weightmax.trainer.train_run`.

Each training row becomes one episode: the network's output action is
rewarded ``+1`` when it matches the label and ``-1`` otherwise. Predictions
average the stochastic output over several forward passes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .estimators import EstimatorConfig, UWMVariant
from .exceptions import ConfigurationError
from .network import forward_deterministic, forward_sample
from .tasks import DatasetTask
from .trainer import TrainConfig, train_run


class BernoulliNetworkClassifier(ClassifierMixin, BaseEstimator):
    """Binary classifier made of Bernoulli-logistic units.

    Parameters mirror :class:`~weightmax.trainer.TrainConfig`; ``hidden``
    lists the hidden widths (a single output unit is appended).
    ``n_samples`` is the number of stochastic passes used by
    :meth:`predict_proba`.
    """

    def __init__(
        self,
        hidden=(16, 16),
        estimator="unbiased_wm",
        p=1,
        uwm_variant="single",
        episodes=100_000,
        batch_size=16,
        step_size=0.005,
        n_samples=32,
        random_state=0,
    ):
        self.hidden = hidden
        self.estimator = estimator
        self.p = p
        self.uwm_variant = uwm_variant
        self.episodes = episodes
        self.batch_size = batch_size
        self.step_size = step_size
        self.n_samples = n_samples
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        est = EstimatorConfig(self.estimator, p=self.p, uwm_variant=UWMVariant.parse(self.uwm_variant))
        seed = 0 if self.random_state is None else int(self.random_state)
        return TrainConfig(
            layer_sizes=tuple(self.hidden) + (1,),
            estimator=est,
            episodes=self.episodes,
            batch_size=self.batch_size,
            step_size=self.step_size,
            seed=seed,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = unique_labels(y)
        if self.classes_.size != 2:
            raise ConfigurationError(f"BernoulliNetworkClassifier is binary, got {self.classes_.size} classes")
        targets = np.where(y == self.classes_[1], 1.0, -1.0)
        result = train_run(self._train_config(), task=DatasetTask(X, targets))
        self.params_ = result.params
        self.learning_curve_ = result.curve
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        if self.estimator == "backprop":
            p1 = forward_deterministic(self.params_, X).firing_probs[-1][:, 0]
        else:
            rng = np.random.default_rng(self.random_state)
            p1 = np.mean([forward_sample(self.params_, X, rng).firing_probs[-1][:, 0] for _ in range(self.n_samples)], axis=0)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[(proba[:, 1] > 0.5).astype(int)]
