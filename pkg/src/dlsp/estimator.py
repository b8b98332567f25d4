"""Scikit-learn facade over the classifier.

The real work lives in ``dlsp.nn``; this wraps it in the familiar
fit/predict/predict_proba surface so the model slots into pipelines,
grid search, and ``clone``.  Hyperparameters are stored verbatim in
``__init__`` per the estimator contract.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .nn import ArchSpec, TrainConfig, build_model, train
from .nn.model import predict as model_predict
from .nn.model import predict_proba as model_predict_proba
from .validation import as_grid_batch, check_labels


class SurrogateClassifier(BaseEstimator, ClassifierMixin):
    """Morphology-to-performance-class estimator.

    ``validation_fraction`` > 0 holds out a seeded tail of the training
    set and keeps the checkpoint with the best held-out accuracy;
    otherwise the final-epoch weights are kept.
    """

    def __init__(
        self,
        learning_rate: float = 1e-4,
        batch_size: int = 128,
        epochs: int = 70,
        seed: int = 0,
        validation_fraction: float = 0.0,
        arch: ArchSpec | None = None,
    ):
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.validation_fraction = validation_fraction
        self.arch = arch

    def _arch(self) -> ArchSpec:
        return self.arch if self.arch is not None else ArchSpec()

    def fit(self, X, y):
        arch = self._arch()
        x = as_grid_batch(X, size=arch.input_size)
        labels = check_labels(y, arch.n_classes)
        if len(x) != len(labels):
            raise ValueError(f"{len(x)} grids but {len(labels)} labels")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")

        x_val = y_val = None
        if self.validation_fraction > 0.0:
            n_val = int(round(len(x) * self.validation_fraction))
            if n_val:
                order = np.random.default_rng(self.seed).permutation(len(x))
                x, labels = x[order], labels[order]
                x, x_val = x[:-n_val], x[-n_val:]
                labels, y_val = labels[:-n_val], labels[-n_val:]

        config = TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
        )
        final, best, history = train(
            build_model(arch, seed=self.seed), x, labels, config,
            x_val=x_val, y_val=y_val,
        )
        self.model_ = best if x_val is not None else final
        self.history_ = history
        self.classes_ = np.arange(arch.n_classes, dtype=np.int64)
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return model_predict(self.model_, as_grid_batch(X, size=self._arch().input_size))

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "model_")
        return model_predict_proba(self.model_, as_grid_batch(X, size=self._arch().input_size))
