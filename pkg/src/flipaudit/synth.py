"""Synthetic grouped datasets and the binary classifiers used with them.

The generators are deterministic per seed and emit the CSV-compatible schema
from :mod:`flipaudit.data`. Distribution parameters that are not pinned by a
fixed rule live in small config dataclasses with documented defaults.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .data import FeatureMatrix, GroupedDataset
from .errors import BadParamsError, DataError, DivergedError, SchemaMismatchError
from .rng import substream

# ---------------------------------------------------------------------------
# Classifiers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearThresholdModel:
    """Predicts 1 iff weights . x > threshold; ties classify as 0.

    Flipset counts are sensitive to the tie rule, so it is fixed here rather
    than left to floating-point accident.
    """

    weights: np.ndarray
    threshold: float
    feature_names: tuple | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def predict(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return (values @ self.weights > self.threshold).astype(int)


@dataclass(frozen=True)
class ArrestsModel:
    """Single-feature rule: 0 arrests -> low risk, >= 2 -> high, exactly 1 -> coin.

    The coin is a fair draw fixed by (seed, row index), so repeated queries
    and source/counterpart comparisons at the same row agree. Non-integer
    inputs are rounded to the nearest count first, keeping the rule total.
    """

    seed: int = 0

    def _coins(self, n: int) -> np.ndarray:
        return substream(self.seed, "arrests-coin").integers(0, 2, size=n)

    def predict(self, values: np.ndarray) -> np.ndarray:
        arrests = np.rint(np.asarray(values, dtype=float)[:, 0]).astype(int)
        out = (arrests >= 2).astype(int)
        mid = arrests == 1
        if mid.any():
            out[mid] = self._coins(len(arrests))[mid]
        return out


class PredictionsFileModel:
    """Black-box classifier given as a row-index -> {0,1} lookup."""

    def __init__(self, predictions: dict):
        self.predictions = {int(k): int(v) for k, v in predictions.items()}
        if not set(self.predictions.values()) <= {0, 1}:
            raise DataError("predictions must be 0/1")

    @classmethod
    def from_csv(cls, path) -> "PredictionsFileModel":
        """CSV with header row_index,prediction."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["row_index", "prediction"]:
                raise DataError(f"{path}: expected header 'row_index,prediction'")
            preds = {}
            for row in reader:
                if row:
                    preds[int(row[0])] = int(row[1])
        return cls(preds)

    def lookup(self, rows) -> np.ndarray:
        try:
            return np.array([self.predictions[int(i)] for i in rows], dtype=int)
        except KeyError as exc:
            raise DataError(f"predictions file does not cover row {exc.args[0]}") from None

    def predict(self, values: np.ndarray) -> np.ndarray:
        return self.lookup(range(len(values)))


@dataclass(frozen=True)
class RandomLabelNeighborModel:
    """1-nearest-neighbor over randomly labeled anchor points.

    Stands in for an arbitrarily complicated ~50%-accuracy boundary. Only the
    first ``n_features_used`` features are visible to the model; anchors are
    standard normal in that subspace.
    """

    n_anchors: int = 2000
    n_features_used: int = 3
    dims: int = 6
    seed: int = 0

    def _anchors(self):
        rng = substream(self.seed, "nn-anchors")
        pts = rng.standard_normal((self.n_anchors, self.n_features_used))
        labels = rng.integers(0, 2, size=self.n_anchors)
        return pts, labels

    def predict(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)[:, : self.n_features_used]
        pts, labels = self._anchors()
        out = np.empty(len(values), dtype=int)
        for start in range(0, len(values), 512):
            chunk = values[start : start + 512]
            d2 = ((chunk[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
            out[start : start + 512] = labels[np.argmin(d2, axis=1)]
        return out


# ---------------------------------------------------------------------------
# Dataset generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HiringParams:
    """Two-feature hiring population: group_a = women, group_b = men.

    Defaults put women at longer hair and less work experience on average;
    the magnitudes are package choices, not values from any external source,
    and every audit on this data should be read qualitatively.
    """

    hair_mean_women: float = 6.0
    hair_std_women: float = 2.0
    hair_mean_men: float = 2.0
    hair_std_men: float = 1.5
    work_mean_women: float = 4.0
    work_std_women: float = 2.0
    work_mean_men: float = 6.0
    work_std_men: float = 2.0

    def __post_init__(self):
        stds = (self.hair_std_women, self.hair_std_men, self.work_std_women, self.work_std_men)
        if min(stds) <= 0:
            raise BadParamsError("standard deviations must be positive")
        if not (self.hair_mean_women > self.hair_mean_men):
            raise BadParamsError("women must have longer hair on average")
        if not (self.work_mean_women < self.work_mean_men):
            raise BadParamsError("women must have less work experience on average")


HIRING_FEATURES = ("work_exp", "hair_len")


def gen_two_feature_hiring(
    n: int, seed: int, params: HiringParams = HiringParams()
) -> GroupedDataset:
    """n women (group_a) and n men (group_b) with work experience and hair length."""
    if n < 1:
        raise BadParamsError("n must be >= 1")
    rng = substream(seed, "hiring")
    women = np.column_stack(
        [
            rng.normal(params.work_mean_women, params.work_std_women, size=n),
            rng.normal(params.hair_mean_women, params.hair_std_women, size=n),
        ]
    )
    men = np.column_stack(
        [
            rng.normal(params.work_mean_men, params.work_std_men, size=n),
            rng.normal(params.hair_mean_men, params.hair_std_men, size=n),
        ]
    )
    return GroupedDataset(
        FeatureMatrix(women, HIRING_FEATURES), FeatureMatrix(men, HIRING_FEATURES)
    )


def fair_hiring_model(normalized: GroupedDataset, hire_rate: float = 0.27) -> LinearThresholdModel:
    """Fixed-weight hiring rule on normalized features, thresholded on the men.

    Weights the two features almost equally (1.2 on work experience, 1.4 on
    hair length) and calibrates the threshold so the given fraction of the
    male sample is hired.
    """
    weights = np.array([1.2, 1.4])
    scores = normalized.group_b.values @ weights
    threshold = float(np.quantile(scores, 1.0 - hire_rate))
    return LinearThresholdModel(weights, threshold, normalized.feature_names)


def gen_geometric_arrests(n: int, seed: int) -> GroupedDataset:
    """Single 'arrests' feature: group_a ~ Geom(1/4) - 1, group_b ~ Geom(1/2) - 1."""
    if n < 1:
        raise BadParamsError("n must be >= 1")
    rng = substream(seed, "geometric")
    a = rng.geometric(0.25, size=n) - 1
    b = rng.geometric(0.5, size=n) - 1
    return GroupedDataset(
        FeatureMatrix(a[:, None].astype(float), ("arrests",)),
        FeatureMatrix(b[:, None].astype(float), ("arrests",)),
    )


CONTROL_FEATURES = ("f1", "f2", "f3", "f4", "f5", "f6")
CONTROL_MEAN_A = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
CONTROL_MEAN_B = np.array([0.0, 0.0, 0.0, -1.0, -1.0, -1.0])


def gen_control_normal(n: int, seed: int) -> GroupedDataset:
    """Six-feature unit-covariance normals; groups share the first three means."""
    if n < 1:
        raise BadParamsError("n must be >= 1")
    rng = substream(seed, "control")
    a = rng.standard_normal((n, 6)) + CONTROL_MEAN_A
    b = rng.standard_normal((n, 6)) + CONTROL_MEAN_B
    return GroupedDataset(
        FeatureMatrix(a, CONTROL_FEATURES), FeatureMatrix(b, CONTROL_FEATURES)
    )


def gen_gaussian(n: int, seed: int, mean_a, mean_b, cov=None) -> GroupedDataset:
    """Two multivariate normal groups with shared covariance (identity default)."""
    if n < 1:
        raise BadParamsError("n must be >= 1")
    mean_a = np.asarray(mean_a, dtype=float)
    mean_b = np.asarray(mean_b, dtype=float)
    if mean_a.shape != mean_b.shape or mean_a.ndim != 1:
        raise BadParamsError("mean vectors must be 1-d and of equal length")
    d = len(mean_a)
    cov = np.eye(d) if cov is None else np.asarray(cov, dtype=float)
    if cov.shape != (d, d):
        raise BadParamsError(f"covariance must be {d}x{d}")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise BadParamsError("covariance must be positive definite") from exc
    rng = substream(seed, "gaussian")
    names = tuple(f"x{j}" for j in range(d))
    a = rng.standard_normal((n, d)) @ chol.T + mean_a
    b = rng.standard_normal((n, d)) @ chol.T + mean_b
    return GroupedDataset(FeatureMatrix(a, names), FeatureMatrix(b, names))


# ---------------------------------------------------------------------------
# Predictive-policing style fixed models
# ---------------------------------------------------------------------------

SSL_FEATURES = (
    "vic_shooting",
    "age",
    "vic_assault",
    "violent_arrests",
    "gang_affiliation",
    "narcotics_arrests",
    "trend",
    "uuw_arrests",
)

# 10% point of the multi-feature score under independent standard-normal
# features: 1.2816 * sqrt(50^2 + 3 * 20^2).
_MULTI_DEFAULT_THRESHOLD = 77.93


def ssl_style_models(calibration: FeatureMatrix | None = None) -> dict:
    """The two fixed linear rules for the 8-feature policing schema.

    ``age_narc`` uses -53 * age + 25 * narcotics_arrests > 65. ``multi_feature``
    weights age 50 and the three victimization/narcotics counts 20 each, with
    its threshold calibrated to a 10% positive rate on ``calibration`` when
    provided (otherwise the standard-normal default). Features must already
    be normalized.
    """
    if calibration is not None and calibration.feature_names != SSL_FEATURES:
        raise SchemaMismatchError(
            f"expected schema {SSL_FEATURES}, got {calibration.feature_names}"
        )
    w_age_narc = np.zeros(8)
    w_age_narc[SSL_FEATURES.index("age")] = -53.0
    w_age_narc[SSL_FEATURES.index("narcotics_arrests")] = 25.0

    w_multi = np.zeros(8)
    w_multi[SSL_FEATURES.index("age")] = 50.0
    w_multi[SSL_FEATURES.index("vic_shooting")] = 20.0
    w_multi[SSL_FEATURES.index("vic_assault")] = 20.0
    w_multi[SSL_FEATURES.index("narcotics_arrests")] = 20.0
    if calibration is None:
        thr = _MULTI_DEFAULT_THRESHOLD
    else:
        thr = float(np.quantile(calibration.values @ w_multi, 0.9))
    return {
        "age_narc": LinearThresholdModel(w_age_narc, 65.0, SSL_FEATURES),
        "multi_feature": LinearThresholdModel(w_multi, thr, SSL_FEATURES),
    }


# ---------------------------------------------------------------------------
# Logistic trainer (stand-in for in-toolkit models)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogisticTrainer:
    learning_rate: float = 0.5
    iterations: int = 500
    seed: int = 0


def _logistic_loss(z: np.ndarray, y: np.ndarray) -> float:
    # mean log(1 + exp(-s z)) with s = +-1, stably via logaddexp
    signed = np.where(y == 1, -z, z)
    return float(np.logaddexp(0.0, signed).mean())


def train_logistic(
    data: FeatureMatrix, labels, cfg: LogisticTrainer = LogisticTrainer()
) -> LinearThresholdModel:
    """Full-batch gradient descent on the logistic loss.

    Step halving keeps the loss non-increasing; the returned rule thresholds
    the fitted score at probability one half.
    """
    y = np.asarray(labels, dtype=float)
    x = np.column_stack([data.values, np.ones(data.n_rows)])
    if data.n_rows < data.n_features + 1:
        raise DataError("need at least d+1 rows")
    if not np.isin(y, (0.0, 1.0)).all():
        raise DataError("labels must be binary 0/1")
    w = np.zeros(x.shape[1])
    loss = _logistic_loss(x @ w, y)
    lr = cfg.learning_rate
    for _ in range(cfg.iterations):
        p = 1.0 / (1.0 + np.exp(-(x @ w)))
        grad = x.T @ (p - y) / len(y)
        step = lr
        for _ in range(50):
            cand = w - step * grad
            cand_loss = _logistic_loss(x @ cand, y)
            if cand_loss <= loss:
                break
            step /= 2.0
        w, loss = cand, cand_loss
        if not np.isfinite(loss):
            raise DivergedError("logistic loss became non-finite")
    # sigmoid(w.x + b) > 0.5  <=>  w.x > -b
    return LinearThresholdModel(w[:-1], -float(w[-1]), data.feature_names)
