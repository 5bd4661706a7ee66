"""Signal ensembles, sequences, empirical covariances, and observation transforms.

An ensemble is an m x s matrix: s realizations (columns) of an m-component
random vector. Ensembles that take part in one experiment share the
realization index, i.e. column r of every ensemble belongs to the same
outcome. Covariance operations require centered data and use the 1/s
maximum-likelihood normalization throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInput

CENTER_RTOL = 1e-10
DISTINCTNESS_RTOL = 1e-10

Q_KINDS = ("identity", "sequence_lag", "component_shift", "weighted_prefix_sum")


@dataclass(frozen=True)
class Ensemble:
    """m x s realization matrix of a random m-vector.

    ``centered`` asserts that every row mean is at most ``1e-10`` times the
    row RMS; constructing an Ensemble with a false claim raises.
    """

    data: np.ndarray
    centered: bool = False

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim != 2:
            raise InvalidInput(f"ensemble data must be 2-D, got shape {arr.shape}")
        if arr.shape[1] < 2:
            raise InvalidInput("an ensemble needs at least two realizations")
        if not np.all(np.isfinite(arr)):
            raise InvalidInput("ensemble data contains non-finite entries")
        object.__setattr__(self, "data", arr)
        if self.centered:
            rms = np.sqrt(np.mean(arr**2, axis=1))
            if np.any(np.abs(arr.mean(axis=1)) > CENTER_RTOL * rms):
                raise InvalidInput("data marked centered but row means are too large")

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def s(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class SignalSequence:
    """Ordered ensembles sharing component count, realization count and outcomes."""

    items: tuple[Ensemble, ...]

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise InvalidInput("a signal sequence needs at least one ensemble")
        m, s = items[0].m, items[0].s
        for pos, e in enumerate(items):
            if (e.m, e.s) != (m, s):
                raise InvalidInput(
                    f"sequence item {pos} has shape {(e.m, e.s)}, expected {(m, s)}"
                )
        object.__setattr__(self, "items", items)

    @property
    def m(self) -> int:
        return self.items[0].m

    @property
    def s(self) -> int:
        return self.items[0].s

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i: int) -> Ensemble:
        return self.items[i]


@dataclass(frozen=True)
class CovMatrix:
    """Empirical cross-covariance together with the sample count behind it."""

    matrix: np.ndarray
    samples: int

    def __post_init__(self):
        arr = np.asarray(self.matrix, dtype=float)
        if arr.ndim != 2 or not np.all(np.isfinite(arr)):
            raise InvalidInput("covariance matrix must be finite and 2-D")
        if self.samples < 2:
            raise InvalidInput("covariance needs at least two samples")
        object.__setattr__(self, "matrix", arr)


@dataclass(frozen=True)
class QOperatorSpec:
    """Declarative transform applied at one position of an observation sequence.

    kind is one of:

    * ``identity``: the observation at the requested position.
    * ``sequence_lag``: the observation ``lag`` positions earlier, clamped to
      the start of the sequence.
    * ``component_shift``: the observation with rows rolled by ``lag``.
    * ``weighted_prefix_sum``: the weighted sum of observations from the
      start of the sequence up to the requested position.
    """

    kind: str
    lag: int = 0
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in Q_KINDS:
            raise InvalidInput(f"unknown transform kind {self.kind!r}")
        if self.lag < 0 or int(self.lag) != self.lag:
            raise InvalidInput("lag must be a nonnegative integer")
        weights = tuple(float(w) for w in self.weights)
        if not all(np.isfinite(weights)):
            raise InvalidInput("weights must be finite")
        if self.kind == "weighted_prefix_sum" and not weights:
            raise InvalidInput("weighted_prefix_sum needs at least one weight")
        object.__setattr__(self, "weights", weights)

    @staticmethod
    def identity() -> "QOperatorSpec":
        return QOperatorSpec("identity")

    @staticmethod
    def sequence_lag(d: int) -> "QOperatorSpec":
        return QOperatorSpec("sequence_lag", lag=d)

    @staticmethod
    def component_shift(d: int) -> "QOperatorSpec":
        return QOperatorSpec("component_shift", lag=d)

    @staticmethod
    def weighted_prefix_sum(weights) -> "QOperatorSpec":
        return QOperatorSpec("weighted_prefix_sum", weights=tuple(weights))

    def window(self) -> int:
        """Number of trailing sequence positions the transform can touch."""
        if self.kind == "sequence_lag":
            return self.lag + 1
        if self.kind == "weighted_prefix_sum":
            return len(self.weights)
        return 1

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind in ("sequence_lag", "component_shift"):
            out["lag"] = int(self.lag)
        if self.kind == "weighted_prefix_sum":
            out["weights"] = list(self.weights)
        return out

    @staticmethod
    def from_dict(d: dict) -> "QOperatorSpec":
        return QOperatorSpec(
            d.get("kind", ""), lag=d.get("lag", 0), weights=tuple(d.get("weights", ()))
        )


@dataclass(frozen=True)
class TrainingSet:
    """Reference signals paired with positions in an observation sequence.

    ``s_x[k]`` is the reference for the observation at sequence position
    ``s_y_indices[k]`` (0-based, strictly increasing).
    """

    s_x: tuple[Ensemble, ...]
    s_y_context: SignalSequence
    s_y_indices: tuple[int, ...]

    def __post_init__(self):
        s_x = tuple(self.s_x)
        idx = tuple(int(i) for i in self.s_y_indices)
        object.__setattr__(self, "s_x", s_x)
        object.__setattr__(self, "s_y_indices", idx)
        if not s_x:
            raise InvalidInput("training set needs at least one reference signal")
        if len(s_x) != len(idx):
            raise InvalidInput("one sequence position is required per reference signal")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidInput("sequence positions must be strictly increasing")
        if idx[0] < 0 or idx[-1] >= len(self.s_y_context):
            raise InvalidInput("sequence position out of range")
        s = self.s_y_context.s
        for pos, e in enumerate(s_x):
            if e.s != s:
                raise InvalidInput(
                    f"reference signal {pos} has {e.s} realizations, observations have {s}"
                )

    @property
    def p(self) -> int:
        return len(self.s_x)


@dataclass(frozen=True)
class DistinctnessReport:
    """Pairs of ensembles whose distance is below the distinctness threshold."""

    pairs: tuple[tuple[int, int], ...]
    threshold: float

    @property
    def ok(self) -> bool:
        return not self.pairs


def center(e: Ensemble) -> Ensemble:
    """Subtract each row's empirical mean."""
    return Ensemble(e.data - e.data.mean(axis=1, keepdims=True), centered=True)


def est_cov(a: Ensemble, b: Ensemble) -> CovMatrix:
    """Empirical cross-covariance ``(1/s) A B^T`` of realization-aligned ensembles.

    Both inputs must be centered (covariances of uncentered data would be
    silently biased) and have the same realization count.
    """
    if not (a.centered and b.centered):
        raise InvalidInput("est_cov requires centered ensembles")
    if a.s != b.s:
        raise InvalidInput(f"realization counts differ: {a.s} vs {b.s}")
    return CovMatrix((a.data @ b.data.T) / a.s, samples=a.s)


def cov(a: Ensemble, b: Ensemble) -> np.ndarray:
    """est_cov shorthand returning the bare matrix."""
    return est_cov(a, b).matrix


def energy(e: Ensemble) -> float:
    """Mean squared Euclidean norm over realizations, ``(1/s) ||data||_F^2``."""
    return float(np.sum(e.data**2)) / e.s


def apply_q(q: QOperatorSpec, seq: SignalSequence, i: int) -> Ensemble:
    """Evaluate one observation transform at sequence position ``i``."""
    if not 0 <= i < len(seq):
        raise InvalidInput(f"sequence position {i} out of range [0, {len(seq) - 1}]")
    if q.kind == "identity":
        return seq[i]
    if q.kind == "sequence_lag":
        return seq[max(0, i - q.lag)]
    if q.kind == "component_shift":
        src = seq[i]
        return Ensemble(np.roll(src.data, q.lag, axis=0), centered=src.centered)
    # weighted_prefix_sum
    if len(q.weights) > len(seq):
        raise InvalidInput("more weights than sequence positions")
    acc = np.zeros_like(seq[0].data)
    centered = True
    for t in range(min(i + 1, len(q.weights))):
        acc += q.weights[t] * seq[t].data
        centered = centered and seq[t].centered
    return Ensemble(acc, centered=centered)


def distinctness_check(vs: list[Ensemble] | tuple[Ensemble, ...]) -> DistinctnessReport:
    """Flag pairs of ensembles that are numerically indistinguishable.

    Warning-level: near-identical transformed observations collapse filter
    terms, so callers may want to reject or report them, but this never
    raises on its own.
    """
    scale = max((float(np.linalg.norm(v.data)) for v in vs), default=0.0)
    threshold = DISTINCTNESS_RTOL * scale
    pairs = []
    for i in range(len(vs)):
        for j in range(i + 1, len(vs)):
            if float(np.linalg.norm(vs[i].data - vs[j].data)) <= threshold:
                pairs.append((i, j))
    return DistinctnessReport(tuple(pairs), threshold)
