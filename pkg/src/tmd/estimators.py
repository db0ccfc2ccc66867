"""scikit-learn style facades over the functional core.

These wrappers follow the estimator conventions: constructor arguments are
stored verbatim, all learned state lands in trailing-underscore attributes
during fit, and get_params/set_params come from BaseEstimator.  They exist so
the package drops into sklearn pipelines and model-selection tooling; the
underlying work happens in the functional modules.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .bundle import ModelBundle, load_bundle, save_bundle
from .datastore import EmbeddingDataset, fit_scaler, scale_matrix
from .defense import classify, classify_defended, train_head
from .errors import ValidationError
from .nets import ArchConfig
from .projection import ManifoldEvaluator
from .training import TrainConfig, train


def _rows(X) -> np.ndarray:
    return check_array(X, dtype=np.float32, ensure_2d=True, order="C")


class EmbeddingScaler(TransformerMixin, BaseEstimator):
    """Per-column affine map of raw embeddings onto (-1, 1)."""

    def __init__(self, epsilon: float = 1e-12):
        self.epsilon = epsilon

    def fit(self, X, y=None):
        del y
        ds = EmbeddingDataset(data=_rows(X), scaled=False)
        self.scaler_ = fit_scaler(ds, epsilon=self.epsilon)
        self.n_features_in_ = ds.dim
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "scaler_")
        return scale_matrix(_rows(X), self.scaler_, "forward")

    def inverse_transform(self, X) -> np.ndarray:
        check_is_fitted(self, "scaler_")
        return scale_matrix(_rows(X), self.scaler_, "inverse")


class ManifoldApproximator(BaseEstimator):
    """Adversarially trained manifold model of an embedding matrix.

    fit scales the input internally and trains the generator; transform
    projects rows onto the learned manifold (returned in the input's raw
    space); predict reports inferred codes; score_samples returns negated
    manifold distances so higher means more on-manifold.
    """

    def __init__(self, preset: str = "mlp", num_codes: int = 10, z_dim: int = 16,
                 disconnected: bool = True, mlp_widths: tuple | None = None,
                 epochs: int = 100, batch_size: int = 64, alpha_g: float = 1e-4,
                 alpha_d: float = 1e-4, alpha_p: float = 0.0,
                 lambda_info: float = 1.0, dg_ratio: int = 1,
                 uniform_codes: bool = False, k: int = 15,
                 method: str = "sampling", gd_alpha: float = 0.1,
                 gd_steps: int = 10, seed: int = 0):
        self.preset = preset
        self.num_codes = num_codes
        self.z_dim = z_dim
        self.disconnected = disconnected
        self.mlp_widths = mlp_widths
        self.epochs = epochs
        self.batch_size = batch_size
        self.alpha_g = alpha_g
        self.alpha_d = alpha_d
        self.alpha_p = alpha_p
        self.lambda_info = lambda_info
        self.dg_ratio = dg_ratio
        self.uniform_codes = uniform_codes
        self.k = k
        self.method = method
        self.gd_alpha = gd_alpha
        self.gd_steps = gd_steps
        self.seed = seed

    def fit(self, X, y=None):
        rows = _rows(X)
        raw = EmbeddingDataset(
            data=rows,
            labels=None if y is None else np.asarray(y, dtype=np.int32),
            scaled=False,
        )
        scaler = fit_scaler(raw)
        scaled = EmbeddingDataset(
            data=scale_matrix(rows, scaler, "forward"),
            labels=raw.labels, scaled=True,
        )
        arch = ArchConfig(preset=self.preset, dim=raw.dim,
                          num_codes=self.num_codes, z_dim=self.z_dim,
                          disconnected=self.disconnected,
                          mlp_widths=self.mlp_widths)
        config = TrainConfig(arch=arch, epochs=self.epochs,
                             batch_size=self.batch_size, alpha_g=self.alpha_g,
                             alpha_d=self.alpha_d, alpha_p=self.alpha_p,
                             lambda_info=self.lambda_info, dg_ratio=self.dg_ratio,
                             seed=self.seed,
                             baseline_mode=not self.disconnected,
                             uniform_codes=self.uniform_codes)
        bundle, report = train(scaled, config)
        self.bundle_ = ModelBundle(arch=bundle.arch, params=bundle.params,
                                   buffers=bundle.buffers,
                                   prior_logits=bundle.prior_logits,
                                   scaler=scaler, head=bundle.head)
        self.report_ = report
        self.n_features_in_ = raw.dim
        return self

    def _evaluator(self) -> ManifoldEvaluator:
        check_is_fitted(self, "bundle_")
        return ManifoldEvaluator.from_bundle(self.bundle_)

    def transform(self, X) -> np.ndarray:
        ev = self._evaluator()
        scaled = scale_matrix(_rows(X), self.bundle_.scaler, "forward")
        res = ev.project(scaled, self.k, self.seed, method=self.method,
                         alpha=self.gd_alpha, n_steps=self.gd_steps)
        return scale_matrix(res.projected, self.bundle_.scaler, "inverse")

    def predict(self, X) -> np.ndarray:
        """Inferred code per row (needs a code-carrying model)."""
        ev = self._evaluator()
        scaled = scale_matrix(_rows(X), self.bundle_.scaler, "forward")
        return ev.infer_codes(scaled)

    def score_samples(self, X) -> np.ndarray:
        """Negated scaled-space manifold distance; higher is more on-manifold."""
        return -self.distance(X)

    def distance(self, X, space: str = "scaled") -> np.ndarray:
        ev = self._evaluator()
        rows = _rows(X)
        if space == "raw":
            return ev.distances(rows, self.k, self.seed, method=self.method,
                                alpha=self.gd_alpha, n_steps=self.gd_steps,
                                space="raw")
        scaled = scale_matrix(rows, self.bundle_.scaler, "forward")
        return ev.distances(scaled, self.k, self.seed, method=self.method,
                            alpha=self.gd_alpha, n_steps=self.gd_steps,
                            space="scaled")

    def save(self, path) -> None:
        check_is_fitted(self, "bundle_")
        save_bundle(self.bundle_, path)

    @classmethod
    def from_bundle_file(cls, path) -> "ManifoldApproximator":
        bundle = load_bundle(path)
        if bundle.scaler is None:
            raise ValidationError("estimator bundles must carry a scaler")
        est = cls(preset=bundle.arch.preset, num_codes=bundle.arch.num_codes,
                  z_dim=bundle.arch.z_dim, disconnected=bundle.arch.disconnected,
                  mlp_widths=bundle.arch.mlp_widths)
        est.bundle_ = bundle
        est.report_ = None
        est.n_features_in_ = bundle.arch.dim
        return est


class EmbeddingClassifier(ClassifierMixin, BaseEstimator):
    """Softmax-regression head over embedding rows."""

    def __init__(self, epochs: int = 200, lr: float = 0.5, l2: float = 0.0,
                 scaled_inputs: bool = False):
        self.epochs = epochs
        self.lr = lr
        self.l2 = l2
        self.scaled_inputs = scaled_inputs

    def fit(self, X, y):
        rows = _rows(X)
        labels = np.asarray(y, dtype=np.int32)
        ds = EmbeddingDataset(data=rows, labels=labels, scaled=self.scaled_inputs)
        self.head_ = train_head(ds, epochs=self.epochs, lr=self.lr, l2=self.l2)
        self.classes_ = self.head_.classes.copy()
        self.n_features_in_ = ds.dim
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "head_")
        rows = _rows(X).astype(np.float64)
        return rows @ self.head_.weights.astype(np.float64).T \
            + self.head_.bias.astype(np.float64)

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "head_")
        return classify(_rows(X), self.head_)


class DefendedClassifier(ClassifierMixin, BaseEstimator):
    """Manifold-projection defense wrapped around a linear head.

    The approximator argument is a fitted ManifoldApproximator acting as a
    frozen backbone; fit trains only the head, on rows in the raw input
    space.  predict projects each row onto the manifold before the head sees
    it; predict_undefended skips the projection.
    """

    def __init__(self, approximator: ManifoldApproximator | None = None,
                 k: int = 15, seed: int = 0, method: str = "sampling",
                 gd_alpha: float = 0.1, gd_steps: int = 10,
                 head_epochs: int = 200, head_lr: float = 0.5,
                 head_l2: float = 0.0):
        self.approximator = approximator
        self.k = k
        self.seed = seed
        self.method = method
        self.gd_alpha = gd_alpha
        self.gd_steps = gd_steps
        self.head_epochs = head_epochs
        self.head_lr = head_lr
        self.head_l2 = head_l2

    def _bundle(self) -> ModelBundle:
        if self.approximator is None:
            raise ValidationError("DefendedClassifier needs a fitted approximator")
        check_is_fitted(self.approximator, "bundle_")
        return self.approximator.bundle_

    def fit(self, X, y):
        bundle = self._bundle()
        rows = _rows(X)
        if rows.shape[1] != bundle.arch.dim:
            raise ValidationError("rows do not match the approximator dimension")
        ds = EmbeddingDataset(data=rows, labels=np.asarray(y, dtype=np.int32),
                              scaled=False)
        self.head_ = train_head(ds, epochs=self.head_epochs, lr=self.head_lr,
                                l2=self.head_l2)
        self.classes_ = self.head_.classes.copy()
        self.n_features_in_ = ds.dim
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "head_")
        return classify_defended(_rows(X), self.head_, self._bundle(),
                                 self.k, self.seed, method=self.method,
                                 alpha=self.gd_alpha, n_steps=self.gd_steps)

    def predict_undefended(self, X) -> np.ndarray:
        check_is_fitted(self, "head_")
        return classify(_rows(X), self.head_)
