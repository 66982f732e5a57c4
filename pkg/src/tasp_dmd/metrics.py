"""Front-quality metrics, run statistics and the Wilcoxon signed-rank test."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.cluster.hierarchy import linkage
from scipy.stats import norm, rankdata

from .schedule import dominates

TICK = 0.01


class MetricWarning(UserWarning):
    """A metric hit a degenerate input and substituted a guard value."""


@dataclass(frozen=True)
class FrontSet:
    label: str
    points: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        pts = tuple(tuple(float(x) for x in p) for p in self.points)
        if not pts:
            raise ValueError(f"front {self.label!r} is empty")
        if not np.all(np.isfinite(np.asarray(pts))):
            raise ValueError(f"front {self.label!r} has non-finite components")
        object.__setattr__(self, "points", pts)


def _points(front: FrontSet | Sequence[Sequence[float]]) -> list[tuple[float, ...]]:
    if isinstance(front, FrontSet):
        return list(front.points)
    return [tuple(float(x) for x in p) for p in front]


# -- accuracy --------------------------------------------------------------------


def rpd(values: Sequence[float], best: float) -> list[float]:
    """Relative percentage deviation of each value from ``best``.

    A zero ``best`` is replaced by one tick (0.01) and a :class:`MetricWarning` is issued.
    """
    if best <= 0:
        warnings.warn("best value is 0; substituting one tick for RPD", MetricWarning, stacklevel=2)
        best = TICK
    return [(v - best) / best * 100.0 for v in values]


# -- front comparison ----------------------------------------------------------


def nondominated(points: Sequence[Sequence[float]]) -> list[tuple[float, ...]]:
    pts = list(dict.fromkeys(tuple(p) for p in points))
    return [p for p in pts if not any(dominates(q, p) for q in pts)]


def nondominance_ratio(b: FrontSet | Sequence, c: FrontSet | Sequence) -> tuple[float, float]:
    """Share of the combined non-dominated set contributed by each front."""
    pb = list(dict.fromkeys(_points(b)))
    pc = list(dict.fromkeys(_points(c)))
    front = set(nondominated(pb + pc))
    if not front:
        return 0.0, 0.0
    return (
        sum(p in front for p in pb) / len(front),
        sum(p in front for p in pc) / len(front),
    )


def _hv2d(points: list[tuple[float, float]], ref: tuple[float, float]) -> float:
    area = 0.0
    best_y = ref[1]
    for x, y in sorted(points):
        if y < best_y:
            area += (ref[0] - x) * (best_y - y)
            best_y = y
    return area


def hypervolume(front: FrontSet | Sequence, reference: Sequence[float]) -> float:
    """Exact volume dominated by a 3-objective front up to ``reference`` (slab sweep on f3).

    Points not below the reference in every component are dropped with a warning.
    """
    ref = tuple(float(r) for r in reference)
    pts = _points(front)
    kept = [p for p in pts if all(x <= r for x, r in zip(p, ref))]
    if len(kept) < len(pts):
        warnings.warn(f"{len(pts) - len(kept)} point(s) beyond the reference were clipped", MetricWarning,
                      stacklevel=2)
    if not kept:
        return 0.0
    kept.sort(key=lambda p: p[2])
    volume = 0.0
    for i, p in enumerate(kept):
        top = kept[i + 1][2] if i + 1 < len(kept) else ref[2]
        depth = top - p[2]
        if depth > 0:
            volume += depth * _hv2d([(q[0], q[1]) for q in kept[: i + 1]], (ref[0], ref[1]))
    return volume


def minmax_normalize(fronts: Sequence[Sequence[Sequence[float]]]) -> list[list[tuple[float, ...]]]:
    """Scale several fronts jointly to [0, 1] per objective; constant objectives map to 0."""
    allpts = np.asarray([p for f in fronts for p in f], dtype=float)
    lo = allpts.min(axis=0)
    span = allpts.max(axis=0) - lo
    span[span == 0] = 1.0
    return [[tuple(float(x) for x in (np.asarray(p) - lo) / span) for p in f] for f in fronts]


def normalized_hypervolumes(fronts: Sequence[Sequence[Sequence[float]]], ref: float = 1.1) -> list[float]:
    return [hypervolume(f, (ref, ref, ref)) for f in minmax_normalize(fronts)]


def hcc(front: FrontSet | Sequence) -> float:
    """Sum of single-linkage merge distances over min-max normalized objectives."""
    pts = _points(front)
    if len(pts) < 2:
        return 0.0
    (scaled,) = minmax_normalize([pts])
    merges = linkage(np.asarray(scaled), method="single", metric="euclidean")
    return float(merges[:, 2].sum())


# -- statistics ------------------------------------------------------------------


class WilcoxonResult(NamedTuple):
    statistic: float
    p: float
    verdict: str
    n: int
    degenerate: bool = False


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float], alpha: float = 0.05) -> WilcoxonResult:
    """Two-sided paired test, normal approximation with tie and continuity corrections.

    Lower values are better: a significant result where ``a`` tends to exceed
    ``b`` yields ``"B_wins"``. Fewer than 6 non-zero differences give a
    degenerate ``"tie"``.
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape:
        raise ValueError("paired samples must have equal length")
    d = x - y
    d = d[d != 0]
    n = int(d.size)
    if n < 6:
        return WilcoxonResult(0.0, 1.0, "tie", n, True)
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    mean = n * (n + 1) / 4.0
    _, counts = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float((counts**3 - counts).sum()) / 48.0
    if var <= 0:
        return WilcoxonResult(min(w_plus, w_minus), 1.0, "tie", n, True)
    z = max(abs(w_plus - mean) - 0.5, 0.0) / np.sqrt(var)
    p = float(min(1.0, 2.0 * norm.sf(z)))
    if p < alpha and w_plus != w_minus:
        verdict = "B_wins" if w_plus > w_minus else "A_wins"
    else:
        verdict = "tie"
    return WilcoxonResult(min(w_plus, w_minus), p, verdict, n)


@dataclass(frozen=True)
class DominanceMatrix:
    names: tuple[str, ...]
    zeta: np.ndarray
    wins: tuple[int, ...]
    ratios: tuple[float, ...]

    def filtered(self, threshold: float = 0.4) -> list[str]:
        return [n for n, z in zip(self.names, self.ratios) if z >= threshold]

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "zeta": self.zeta.astype(int).tolist(),
            "wins": list(self.wins),
            "ratios": list(self.ratios),
        }


def dominance_matrix(samples: Mapping[str, Sequence], alpha: float = 0.05) -> DominanceMatrix:
    """Pairwise Wilcoxon dominance between operators.

    Each sample is either a 1-D list (one objective) or rows of objective
    vectors in priority order; pairs tied on an objective are retested on the
    next one. Ratios divide win counts by the number of operators ``n``.
    """
    names = tuple(samples)
    n = len(names)
    if n < 2:
        raise ValueError("dominance matrix needs at least two operators")
    arrays = []
    for name in names:
        arr = np.asarray(samples[name], dtype=float)
        arrays.append(arr.reshape(-1, 1) if arr.ndim == 1 else arr)
    zeta = np.zeros((n, n), dtype=int)
    for i in range(n):
        for j in range(i + 1, n):
            if arrays[i].shape != arrays[j].shape:
                raise ValueError(f"samples of {names[i]!r} and {names[j]!r} are not paired")
            outcome = 0
            for col in range(arrays[i].shape[1]):
                verdict = wilcoxon_signed_rank(arrays[i][:, col], arrays[j][:, col], alpha).verdict
                if verdict != "tie":
                    outcome = 1 if verdict == "A_wins" else -1
                    break
            zeta[i, j] = outcome
            zeta[j, i] = -outcome
    wins = tuple(int((zeta[i] == 1).sum()) for i in range(n))
    return DominanceMatrix(names, zeta, wins, tuple(c / n for c in wins))


def relative_improvement(global_improvement: Mapping[int, float], successes: Mapping[int, int]) -> dict[int, float]:
    """Each action's mean improvement per success as a percentage of the total."""
    avg = {a: (global_improvement[a] / successes[a] if successes.get(a, 0) > 0 else 0.0) for a in global_improvement}
    total = sum(avg.values())
    if total <= 0:
        warnings.warn("no action produced an improvement", MetricWarning, stacklevel=2)
        return {a: 0.0 for a in avg}
    return {a: v / total * 100.0 for a, v in avg.items()}


def mean_utilization(per_dock: Sequence[float]) -> float:
    return float(np.mean(per_dock)) if len(per_dock) else 0.0
