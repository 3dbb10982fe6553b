"""Evaluation harness: 1-NN classification over repeated stratified splits,
epsilon model selection, transport-plan class-mass summaries, synthetic
cluster generation, and BCD-vs-MM timing sweeps.

All randomness flows from counter-based Philox generators keyed by a single
seed, with one spawned child per split / repeat / blob, so every experiment
is reproducible from its seed and split evaluations stay independent of
execution order.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, EmptySetError
from .solver import fit_bcd, fit_mm
from .subspace import pca
from .types import DataMatrix, FitResult, SolverConfig, StiefelBasis, TransportPlan

Fitter = Callable[[DataMatrix], "StiefelBasis | FitResult"]


@dataclass(frozen=True)
class LabeledDataset:
    """Samples (d, n) plus one integer class label per column."""

    data: DataMatrix
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).copy()
        if labels.ndim != 1 or labels.size != self.data.n:
            raise DimensionError(
                f"labels shape {labels.shape} does not match sample count {self.data.n}"
            )
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.data.n

    def subset(self, indices: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(
            DataMatrix(self.data.values[:, indices]), self.labels[indices]
        )


@dataclass(frozen=True)
class SplitSpec:
    """Repeated stratified holdout: train fraction, repeat count, seed."""

    train_fraction: float = 0.5
    n_repeats: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(
                f"train_fraction must lie in (0, 1), got {self.train_fraction}"
            )
        if self.n_repeats < 1:
            raise ConfigError(f"n_repeats must be >= 1, got {self.n_repeats}")
        if self.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed}")


@dataclass(frozen=True)
class EvalReport:
    """Per-split misclassification rates with mean and quartiles."""

    per_split_error: np.ndarray
    mean: float
    q1: float
    q3: float

    @classmethod
    def from_errors(cls, errors: Sequence[float]) -> "EvalReport":
        arr = np.asarray(errors, dtype=np.float64)
        if arr.size == 0:
            raise EmptySetError("cannot aggregate an empty error list")
        if np.any(arr < 0) or np.any(arr > 1):
            raise ConfigError("misclassification rates must lie in [0, 1]")
        arr = arr.copy()
        arr.flags.writeable = False
        # quartiles by linear interpolation on the sorted errors
        q1, q3 = np.quantile(arr, [0.25, 0.75])
        return cls(per_split_error=arr, mean=float(arr.mean()), q1=float(q1), q3=float(q3))


def _split_rng(seed: int, index: int) -> np.random.Generator:
    child = np.random.SeedSequence(seed).spawn(index + 1)[index]
    return np.random.Generator(np.random.Philox(child))


def stratified_split(
    labels: np.ndarray, train_fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Split indices per class; per-class train size within one of the target."""
    labels = np.asarray(labels)
    train: list[np.ndarray] = []
    test: list[np.ndarray] = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < 2:
            raise ConfigError(
                f"class {cls} has {idx.size} sample(s); stratified splitting "
                "needs at least 2 per class"
            )
        perm = rng.permutation(idx)
        n_train = int(np.clip(round(train_fraction * idx.size), 1, idx.size - 1))
        train.append(perm[:n_train])
        test.append(perm[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split_indices(labels: np.ndarray, spec: SplitSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """All train/test index pairs for the spec, deterministic per seed."""
    return [
        stratified_split(labels, spec.train_fraction, _split_rng(spec.seed, i))
        for i in range(spec.n_repeats)
    ]


def one_nn_error(train: LabeledDataset, test: LabeledDataset) -> float:
    """Fraction of test points whose nearest train point has another label.

    Euclidean distance; ties resolve to the lowest train index. A test point
    at distance zero from a train point contributes no error when labels
    agree, so evaluating a set against itself returns zero.
    """
    if train.data.d != test.data.d:
        raise DimensionError(
            f"train dimension {train.data.d} does not match test dimension {test.data.d}"
        )
    if train.n == 0 or test.n == 0:
        raise EmptySetError("1-NN needs non-empty train and test sets")
    tr = train.data.values
    te = test.data.values
    sq_tr = np.einsum("ij,ij->j", tr, tr)
    sq_te = np.einsum("ij,ij->j", te, te)
    dist = sq_te[:, None] + sq_tr[None, :] - 2.0 * (te.T @ tr)
    nearest = np.argmin(dist, axis=1)  # first index wins ties
    return float(np.mean(train.labels[nearest] != test.labels))


def _resolve_basis(fit_output: StiefelBasis | FitResult) -> StiefelBasis:
    return fit_output.basis if isinstance(fit_output, FitResult) else fit_output


def _project(dataset: LabeledDataset, basis: StiefelBasis | None) -> LabeledDataset:
    if basis is None:
        return dataset
    return LabeledDataset(
        DataMatrix(basis.values.T @ dataset.data.values), dataset.labels
    )


def evaluate_embedding(
    dataset: LabeledDataset,
    spec: SplitSpec,
    basis: StiefelBasis | None = None,
    fitter: Fitter | None = None,
    refit_per_split: bool = True,
    n_jobs: int = 1,
) -> EvalReport:
    """1-NN misclassification of projected data over repeated stratified splits.

    Three modes:
      * ``fitter`` given with ``refit_per_split`` (the default): the subspace
        is refit on each split's train half before projecting, the
        protocol-faithful reading;
      * ``basis`` given (or ``fitter`` with refit off, which fits once on the
        full data): one fixed basis projects every split;
      * neither: the raw-data baseline, no projection.

    Split errors are computed independently (optionally across ``n_jobs``
    threads) and reduced in split-index order.
    """
    if fitter is not None and not refit_per_split:
        basis = _resolve_basis(fitter(dataset.data))
        fitter = None
    splits = split_indices(dataset.labels, spec)

    if fitter is None:
        projected = _project(dataset, basis)

        def run(split):
            train_idx, test_idx = split
            return one_nn_error(projected.subset(train_idx), projected.subset(test_idx))

    else:

        def run(split):
            train_idx, test_idx = split
            train = dataset.subset(train_idx)
            split_basis = _resolve_basis(fitter(train.data))
            return one_nn_error(
                _project(train, split_basis),
                _project(dataset.subset(test_idx), split_basis),
            )

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            errors = list(pool.map(run, splits))
    else:
        errors = [run(split) for split in splits]
    return EvalReport.from_errors(errors)


def pca_fitter(k: int, center_data: bool = True) -> Fitter:
    """Fitter closure returning the top-k PCA basis of its input."""

    def fit(data: DataMatrix) -> StiefelBasis:
        basis, _ = pca(data, k, center_data=center_data)
        return basis

    return fit


def ewca_fitter(config: SolverConfig, algo: str = "mm") -> Fitter:
    """Fitter closure running the requested solver with the given config."""
    if algo not in ("bcd", "mm"):
        raise ConfigError(f"algo must be 'bcd' or 'mm', got {algo!r}")
    solver = fit_bcd if algo == "bcd" else fit_mm

    def fit(data: DataMatrix) -> FitResult:
        return solver(data, config)

    return fit


def select_epsilon(
    train: LabeledDataset,
    candidates: Sequence[float],
    k: int,
    inner_spec: SplitSpec,
    base_config: SolverConfig | None = None,
    algo: str = "mm",
    n_jobs: int = 1,
) -> float:
    """Pick the epsilon with the lowest mean 1-NN error over inner splits.

    Each candidate refits the solver on every inner train half. Ties break
    toward the smaller epsilon, then the earlier list position.
    """
    candidates = list(candidates)
    if not candidates:
        raise ConfigError("epsilon candidate list is empty")
    if any(c <= 0 for c in candidates):
        raise ConfigError("epsilon candidates must all be > 0")
    if base_config is None:
        base_config = SolverConfig(epsilon=1.0, k=k)
    results = []
    for position, eps in enumerate(candidates):
        config = replace(base_config, epsilon=float(eps), k=k)
        report = evaluate_embedding(
            train, inner_spec, fitter=ewca_fitter(config, algo), n_jobs=n_jobs
        )
        results.append((report.mean, float(eps), position))
    return min(results)[1]


def plan_class_mass(plan: TransportPlan, labels: np.ndarray) -> tuple[float, float]:
    """Plan mass on same-label pairs and its complement (within, between)."""
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size != plan.values.shape[0] or plan.values.shape[0] != plan.values.shape[1]:
        raise DimensionError(
            f"labels of length {labels.size} do not match plan shape {plan.values.shape}"
        )
    same = labels[:, None] == labels[None, :]
    within = float(plan.values[same].sum())
    return within, 1.0 - within


def make_synthetic_clusters(
    n_per_class: int,
    d: int,
    n_classes: int,
    separation: float,
    seed: int,
) -> LabeledDataset:
    """Isotropic unit-variance Gaussian blobs with centers at mutual distance
    >= separation, deterministic per seed."""
    if n_per_class < 1 or d < 1 or n_classes < 1:
        raise ConfigError("n_per_class, d and n_classes must all be >= 1")
    if separation < 0:
        raise ConfigError(f"separation must be >= 0, got {separation}")
    root = np.random.SeedSequence(seed)
    center_seq, noise_seq = root.spawn(2)
    center_rng = np.random.Generator(np.random.Philox(center_seq))
    noise_rng = np.random.Generator(np.random.Philox(noise_seq))

    if n_classes == 1:
        centers = np.zeros((1, d))
    else:
        centers = center_rng.standard_normal((n_classes, d))
        deltas = centers[:, None, :] - centers[None, :, :]
        dists = np.sqrt((deltas**2).sum(axis=2))
        min_dist = dists[np.triu_indices(n_classes, k=1)].min()
        centers = centers * (separation / min_dist)

    columns = []
    labels = []
    for cls in range(n_classes):
        noise = noise_rng.standard_normal((d, n_per_class))
        columns.append(centers[cls][:, None] + noise)
        labels.extend([cls] * n_per_class)
    return LabeledDataset(DataMatrix(np.hstack(columns)), np.asarray(labels))


@dataclass(frozen=True)
class TimingRecord:
    """One solver run inside a timing sweep."""

    algo: str
    d: int
    repeat: int
    wall_time: float
    objective: float
    iterations: int


@dataclass(frozen=True)
class TimingRow:
    """Aggregated wall times per (algo, d)."""

    algo: str
    d: int
    mean: float
    q1: float
    q3: float


def timing_sweep(
    dataset: DataMatrix,
    dims: Sequence[int],
    k: int,
    config: SolverConfig,
    algos: Iterable[str] = ("bcd", "mm"),
    repeats: int = 1,
    seed: int = 0,
) -> list[TimingRecord]:
    """Fit each algorithm on feature-subsampled copies of the data.

    For every requested dimension and repeat, that many feature rows are
    drawn uniformly without replacement (seeded), and every algorithm runs
    on the same subsample so wall times and objectives are comparable.
    """
    algos = list(algos)
    if not algos or any(a not in ("bcd", "mm") for a in algos):
        raise ConfigError(f"algos must be a non-empty subset of {{'bcd', 'mm'}}, got {algos}")
    dims = [int(d) for d in dims]
    if any(dim > dataset.d for dim in dims):
        raise ConfigError(
            f"requested dimensions {dims} exceed the available {dataset.d} features"
        )
    if any(dim <= k for dim in dims):
        raise ConfigError(f"every swept dimension must exceed k={k}")
    if repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {repeats}")

    solvers = {"bcd": fit_bcd, "mm": fit_mm}
    root = np.random.SeedSequence(seed)
    children = iter(root.spawn(len(dims) * repeats))
    records = []
    for dim in dims:
        for repeat in range(repeats):
            rng = np.random.Generator(np.random.Philox(next(children)))
            rows = np.sort(rng.choice(dataset.d, size=dim, replace=False))
            sub = DataMatrix(dataset.values[rows, :])
            for algo in algos:
                result = solvers[algo](sub, replace(config, k=k))
                records.append(
                    TimingRecord(
                        algo=algo,
                        d=dim,
                        repeat=repeat,
                        wall_time=result.wall_time,
                        objective=result.objective,
                        iterations=result.iterations,
                    )
                )
    return records


def aggregate_timings(records: Sequence[TimingRecord]) -> list[TimingRow]:
    """mean/q1/q3 wall time per (algo, d), algos alphabetical, d ascending."""
    rows = []
    keys = sorted({(r.algo, r.d) for r in records})
    for algo, dim in keys:
        times = np.asarray([r.wall_time for r in records if (r.algo, r.d) == (algo, dim)])
        q1, q3 = np.quantile(times, [0.25, 0.75])
        rows.append(TimingRow(algo=algo, d=dim, mean=float(times.mean()), q1=float(q1), q3=float(q3)))
    return rows
