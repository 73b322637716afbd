"""Synthetic test-retest cohorts.

Each subject has a latent severity ``u`` on ``[0, k-1]``. A fixed random
nonlinear embedding maps ``u`` into feature space, and every image of the
subject is that embedding plus independent Gaussian noise, so images of one
subject differ only by acquisition noise.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class CohortConfig:
    n_subjects: int = 4000
    images_per_subject: int = 2
    k: int = 3
    feature_dim: int = 16
    image_noise_sigma: float = 0.2
    label_noise_rate: float = 0.2
    split_fractions: tuple[float, float, float] = (0.65, 0.10, 0.25)
    embedding_hidden: int = 32
    embedding_curvature: float = 3.0  # sd of the tanh-layer input weights; larger bends the curve more
    seed: int = 0

    def __post_init__(self):
        if self.n_subjects < 3:
            raise ValueError("n_subjects must be >= 3")
        if self.images_per_subject < 2:
            raise ValueError("images_per_subject must be >= 2")
        if self.k < 2 or self.feature_dim < 1:
            raise ValueError("k must be >= 2 and feature_dim >= 1")
        if self.image_noise_sigma < 0:
            raise ValueError("image_noise_sigma must be >= 0")
        if self.embedding_curvature <= 0:
            raise ValueError("embedding_curvature must be > 0")
        if not 0 <= self.label_noise_rate < 0.5:
            raise ValueError("label_noise_rate must lie in [0, 0.5)")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9 or min(self.split_fractions) < 0:
            raise ValueError("split_fractions must be non-negative and sum to 1")

    def to_dict(self):
        d = asdict(self)
        d["split_fractions"] = list(self.split_fractions)
        return d


@dataclass(frozen=True)
class CohortSplit:
    """Images of one split, row-aligned across all arrays."""

    name: str
    k: int
    X: np.ndarray
    labels: np.ndarray
    severity: np.ndarray
    subject_ids: tuple[str, ...]
    session_ids: tuple[str, ...]
    image_ids: tuple[str, ...]

    def __len__(self):
        return self.X.shape[0]

    @property
    def keys(self):
        return list(zip(self.subject_ids, self.session_ids, self.image_ids))

    def label_map(self, positive_from: int | None = None) -> dict:
        """Labels keyed by ``(subject, session, image)``; binarized if ``positive_from`` is set."""
        y = self.labels if positive_from is None else (self.labels >= positive_from).astype(int)
        return dict(zip(self.keys, y.tolist()))


@dataclass(frozen=True)
class SyntheticCohort:
    config: CohortConfig
    X: np.ndarray
    subject_index: np.ndarray
    severity: np.ndarray
    labels: np.ndarray
    subject_split: np.ndarray  # split name per subject

    @property
    def image_split(self) -> np.ndarray:
        return self.subject_split[self.subject_index]

    def split(self, name: str) -> CohortSplit:
        if name not in SPLITS:
            raise KeyError(name)
        sel = np.flatnonzero(self.image_split == name)
        per = self.config.images_per_subject
        subj = self.subject_index[sel]
        return CohortSplit(
            name=name,
            k=self.config.k,
            X=self.X[sel],
            labels=self.labels[sel],
            severity=self.severity[sel],
            subject_ids=tuple(f"s{s:05d}" for s in subj),
            session_ids=("v0",) * sel.size,
            image_ids=tuple(f"img{i % per}" for i in sel),
        )


def class_width(k: int) -> float:
    return (k - 1) / k


def bin_severity(u: np.ndarray, k: int) -> np.ndarray:
    """Assign latent severities to ``k`` equal-width classes on ``[0, k-1]``."""
    return np.clip(np.floor(np.asarray(u) / class_width(k)).astype(int), 0, k - 1)


def embedding(cfg: CohortConfig):
    """Seeded smooth map from severity to ``R^d`` (one tanh layer).

    The curve is rescaled to unit mean speed: moving one severity unit moves
    the noiseless image one unit in feature space on average, so
    ``image_noise_sigma`` is comparable across seeds.
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(0,)))
    h = cfg.embedding_hidden
    w1 = rng.normal(0.0, cfg.embedding_curvature, size=h)
    b1 = rng.uniform(-3.0, 3.0, size=h)
    w2 = rng.normal(0.0, 1.0, size=(h, cfg.feature_dim))

    def raw(u):
        t = np.asarray(u, dtype=float)[:, None] / (cfg.k - 1) * 2.0 - 1.0
        return np.tanh(t * w1 + b1) @ w2

    grid = np.linspace(0.0, cfg.k - 1, 2001)
    length = np.sum(np.linalg.norm(np.diff(raw(grid), axis=0), axis=1))
    scale = (cfg.k - 1) / length

    def g(u):
        return raw(u) * scale

    return g


def generate_cohort(cfg: CohortConfig) -> SyntheticCohort:
    seq = np.random.SeedSequence(cfg.seed, spawn_key=(1,))
    rng = np.random.default_rng(seq)
    n, per, k = cfg.n_subjects, cfg.images_per_subject, cfg.k

    u = rng.uniform(0.0, k - 1, size=n)
    labels = bin_severity(u, k)

    # boundary label noise: only subjects within 10% of a class width from a cut
    width = class_width(k)
    cuts = width * np.arange(1, k)
    nearest = np.argmin(np.abs(u[:, None] - cuts[None, :]), axis=1)
    dist = u - cuts[nearest]
    near = np.abs(dist) < 0.1 * width
    flip = near & (rng.random(n) < cfg.label_noise_rate)
    # move to the class on the other side of the nearest cut
    labels = np.where(flip, np.where(dist >= 0, nearest, nearest + 1), labels)

    subject_index = np.repeat(np.arange(n), per)
    sev = u[subject_index]
    g = embedding(cfg)
    X = g(sev) + rng.normal(0.0, 1.0, size=(n * per, cfg.feature_dim)) * cfg.image_noise_sigma

    order = rng.permutation(n)
    n_train = int(round(cfg.split_fractions[0] * n))
    n_val = int(round(cfg.split_fractions[1] * n))
    subject_split = np.empty(n, dtype=object)
    subject_split[order[:n_train]] = "train"
    subject_split[order[n_train:n_train + n_val]] = "val"
    subject_split[order[n_train + n_val:]] = "test"

    return SyntheticCohort(
        config=cfg,
        X=X,
        subject_index=subject_index,
        severity=sev,
        labels=labels[subject_index],
        subject_split=subject_split.astype(str),
    )
