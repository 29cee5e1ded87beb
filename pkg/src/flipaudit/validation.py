"""Statistical checks for trained transport maps.

Covers the per-feature two-sample KS statistic, the regression-transfer MSE
difference, the mean-transport-cost comparison against the exact map, a
resampling harness measuring how stable each kind of map is at a fixed probe
point, and the identical-distributions control experiment.
"""

import dataclasses
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import (
    CostFunction,
    FeatureMatrix,
    GroupedDataset,
    mean_cost_rows,
    normalize_dataset,
)
from .errors import EmptySampleError, SingularDesignError
from .exact import solve_exact, subsample
from .gan import Generator, TrainConfig, map_points, train
from .rng import derive_seed, substream

THREADS_ENV = "FLIPTEST_THREADS"


def max_threads(requested: int | None = None) -> int:
    """Thread budget for embarrassingly parallel loops, capped by the env var."""
    cap = os.environ.get(THREADS_ENV)
    cap = int(cap) if cap else 1
    return max(1, min(cap, requested if requested is not None else cap))


def ks_two_sample(a, b) -> float:
    """Largest gap between the two empirical CDFs (statistic only, no p-value)."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise EmptySampleError("both samples must be nonempty")
    grid = np.concatenate([a, b])
    ecdf_a = np.searchsorted(a, grid, side="right") / a.size
    ecdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.abs(ecdf_a - ecdf_b).max())


def mse_diff(real_target: FeatureMatrix, generated: FeatureMatrix, feature_index: int) -> float:
    """MSE gap of a least-squares model fit on real data, applied to generated data.

    Fits column ``feature_index`` from all other columns (with intercept) on
    ``real_target`` and returns MSE(generated) - MSE(real_target). Positive
    values mean the generated sample transfers worse than the real one.
    """
    names = real_target.feature_names
    if generated.feature_names != names:
        from .errors import SchemaMismatchError

        raise SchemaMismatchError("real and generated schemas differ")
    others = [j for j in range(len(names)) if j != feature_index]
    x_real = real_target.values[:, others]
    y_real = real_target.values[:, feature_index]
    design = np.column_stack([x_real, np.ones(len(x_real))])
    if len(design) < design.shape[1]:
        raise SingularDesignError([names[j] for j in others])
    coef, _, rank, _ = np.linalg.lstsq(design, y_real, rcond=None)
    if rank < design.shape[1]:
        raise SingularDesignError([names[j] for j in others])

    def mse(fm: FeatureMatrix) -> float:
        pred = np.column_stack([fm.values[:, others], np.ones(fm.n_rows)]) @ coef
        return float(np.mean((fm.values[:, feature_index] - pred) ** 2))

    return mse(generated) - mse(real_target)


def distance_comparison(
    data: GroupedDataset,
    gen: Generator,
    c: CostFunction = CostFunction.SQUARED_L1,
    subset: int = 2000,
    seed: int = 0,
) -> tuple[float, float]:
    """(exact mean cost on a seeded subsample, generator mean cost on all of S)."""
    k = min(subset, data.group_a.n_rows, data.group_b.n_rows)
    pair = GroupedDataset(
        subsample(data.group_a, k, derive_seed(seed, "dist-a")),
        subsample(data.group_b, k, derive_seed(seed, "dist-b")),
    )
    dist_exact = solve_exact(pair, c).mean_cost
    mapped = map_points(gen, data.group_a)
    dist_gan = mean_cost_rows(c, data.group_a.values, mapped.values)
    return dist_exact, dist_gan


@dataclass(frozen=True, eq=False)
class ValidationReport:
    """Table of per-feature KS and MSE-diff statistics across trials."""

    feature_names: tuple
    ks: np.ndarray  # (trials, d)
    mse: np.ndarray  # (trials, d)
    dist_exact: float
    dist_gan: float
    trials: int

    @property
    def ks_mean(self):
        return self.ks.mean(axis=0)

    @property
    def ks_std(self):
        return self.ks.std(axis=0)

    @property
    def mse_mean(self):
        return self.mse.mean(axis=0)

    @property
    def mse_std(self):
        return self.mse.std(axis=0)


def validate_gan(
    data: GroupedDataset,
    cfg: TrainConfig,
    c: CostFunction = CostFunction.SQUARED_L1,
    trials: int = 10,
    subset: int = 2000,
) -> ValidationReport:
    """Retrain the generator ``trials`` times and tabulate KS / MSE-diff per feature.

    Trial t reseeds training from (cfg.seed, t); the distance comparison is a
    single seeded value computed with the first trial's generator.
    """
    d = data.n_features
    ks = np.empty((trials, d))
    mse = np.empty((trials, d))
    dist_exact = dist_gan = float("nan")
    for t in range(trials):
        trial_cfg = dataclasses.replace(cfg, seed=derive_seed(cfg.seed, "trial", t))
        gen = train(data, trial_cfg, c)
        mapped = map_points(gen, data.group_a)
        for j in range(d):
            ks[t, j] = ks_two_sample(data.group_b.values[:, j], mapped.values[:, j])
            mse[t, j] = mse_diff(data.group_b, mapped, j)
        if t == 0:
            dist_exact, dist_gan = distance_comparison(data, gen, c, subset, cfg.seed)
    return ValidationReport(data.feature_names, ks, mse, dist_exact, dist_gan, trials)


@dataclass(frozen=True, eq=False)
class StabilityResult:
    """Mean and variance of a probe point's image across dataset redraws."""

    dims: int
    probe: np.ndarray
    method: str
    mean: np.ndarray
    variance: np.ndarray
    draws: int


def _stability_draw(dims, n, probe, method, cfg, c, seed, draw):
    rng = substream(seed, "stability", method, draw)
    src = np.vstack([probe, rng.standard_normal((n - 1, dims))])
    tgt = rng.standard_normal((n, dims))
    names = tuple(f"x{j}" for j in range(dims))
    data = GroupedDataset(FeatureMatrix(src, names), FeatureMatrix(tgt, names))
    if method == "exact":
        mapping = solve_exact(data, c)
        return tgt[mapping.assignment[0]]
    if method == "gan":
        draw_cfg = dataclasses.replace(cfg, seed=derive_seed(seed, "stability-train", draw))
        gen = train(data, draw_cfg, c)
        return gen.transform(probe[None, :])[0]
    raise ValueError(f"unknown method {method!r}")


def stability_harness(
    dims: int,
    probe,
    method: str,
    cfg: TrainConfig | None = None,
    n: int = 500,
    draws: int = 100,
    c: CostFunction = CostFunction.SQUARED_L1,
    seed: int = 0,
    threads: int | None = None,
) -> StabilityResult:
    """Variance of the mapped probe across standard-normal dataset redraws.

    Each draw resamples n-1 source points plus the fixed probe, and n target
    points, all standard normal; the map is refit and the probe's image
    recorded. Draws derive their RNG from (seed, draw index), so results do
    not depend on scheduling.
    """
    probe = np.asarray(probe, dtype=float)
    if probe.shape != (dims,):
        from .errors import DimensionMismatchError

        raise DimensionMismatchError(f"probe has shape {probe.shape}, expected ({dims},)")
    if cfg is None:
        cfg = TrainConfig()
    workers = max_threads(threads)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            images = list(
                pool.map(
                    lambda i: _stability_draw(dims, n, probe, method, cfg, c, seed, i),
                    range(draws),
                )
            )
    else:
        images = [_stability_draw(dims, n, probe, method, cfg, c, seed, i) for i in range(draws)]
    images = np.asarray(images)
    return StabilityResult(
        dims, probe, method, images.mean(axis=0), images.var(axis=0), draws
    )


# ---------------------------------------------------------------------------
# Control experiment: identical first-three-feature distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ControlConfig:
    n_per_group: int = 10_000
    anchors: int = 2000
    seed: int = 0
    train: TrainConfig = field(default_factory=lambda: TrainConfig(cost_weight=1e-4))


@dataclass(frozen=True, eq=False)
class ControlResult:
    flip_pos: int
    flip_neg: int
    classified_pos: int
    classified_neg: int
    mean_abs_displacement: np.ndarray  # raw units, per feature

    @property
    def pos_rate(self) -> float:
        return self.flip_pos / max(1, self.classified_pos)

    @property
    def neg_rate(self) -> float:
        return self.flip_neg / max(1, self.classified_neg)


def control_experiment(cfg: ControlConfig = ControlConfig()) -> ControlResult:
    """Flipset sizes when the classifier only sees identically distributed features.

    The two groups share the first three feature distributions and differ by
    +-1 in the last three; the classifier is a 1-NN memorizer of randomly
    labeled anchor points restricted to the first three features, so any
    flips measure approximation noise of the trained map rather than real
    distributional differences.
    """
    from .flips import compute_flipset
    from .synth import RandomLabelNeighborModel, gen_control_normal

    data = gen_control_normal(cfg.n_per_group, derive_seed(cfg.seed, "control-data"))
    h = RandomLabelNeighborModel(
        n_anchors=cfg.anchors,
        n_features_used=3,
        dims=data.n_features,
        seed=derive_seed(cfg.seed, "control-classifier"),
    )
    normalized, norm = normalize_dataset(data)
    gen = train(normalized, cfg.train)
    mapped_norm = map_points(gen, normalized.group_a)
    mapped_raw = norm.inverse_transform(mapped_norm)

    flipset = compute_flipset(h, data.group_a, mapped_raw)
    preds = h.predict(data.group_a.values)
    displacement = np.abs(data.group_a.values - mapped_raw.values).mean(axis=0)
    return ControlResult(
        flip_pos=flipset.n_positive,
        flip_neg=flipset.n_negative,
        classified_pos=int(preds.sum()),
        classified_neg=int(len(preds) - preds.sum()),
        mean_abs_displacement=displacement,
    )
