"""Box-counting dimension of Weierstrass graphs.

Two counters are provided.

``range`` (d = 1)
    A continuous real function maps each level-n column onto an interval,
    so the graph meets exactly ``floor(b^n max) - floor(b^n min) + 1`` cells
    of that column.  Column extrema are taken over the b-adic grid
    ``{i / b^K}`` with spacing matched to the Hoelder exponent
    ``log_b(1/lam)``.  On that grid ``W`` is a finite sum (the orbit of
    ``i / b^K`` reaches 0 after K steps), so no truncation error enters.
    Counts converge from below as K grows.

``points`` (any d)
    Occupied cells of ``o * b^n * ceil(b^{n theta})`` stratified samples
    with ``theta = D - 1``, D the predicted dimension.  The sample count
    scales like the number of occupied cells, so the captured fraction of
    cells is the same at every level and the regression slope is unbiased
    even when the counts themselves are not converged.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import stats

from .core import (
    KernelFunction,
    Params,
    SymbolStream,
    TruncationBudget,
    eval_W,
)
from .criterion import compute_q, predicted_dimension
from .entropy import entropy_dimension, sample_flow_projection

__all__ = [
    "ResourceGuardError",
    "BoxCount",
    "box_count",
    "box_counts",
    "estimate_box_dimension",
    "ReportOptions",
    "DimensionReport",
    "full_report",
    "grid_values",
    "MAX_CELLS",
]

MAX_CELLS = 10**8
MAX_GRID_POINTS = 3 * 10**9
STABILITY_TOL = 0.02
DEFAULT_OVERSAMPLE = 8
_CHUNK = 1 << 21
_TABLE_BITS = 21
_GOLDEN = (math.sqrt(5) - 1) / 2

GraphFn = Callable[[np.ndarray], np.ndarray]


class ResourceGuardError(RuntimeError):
    """A count would need more memory or time than the configured guard allows."""


class BoxCount(NamedTuple):
    level: int
    count: int
    coarse: int  # same count with half (points) or 1/b (range) the samples
    stable: bool
    samples: int


def _relative_change(fine: int, coarse: int) -> float:
    return abs(fine - coarse) / max(fine, 1)


# ---------------------------------------------------------------------------
# exact values on the b-adic grid


def _grid_table(p: Params, k: KernelFunction, K: int) -> np.ndarray:
    """``W(i / b^K)`` for all ``i < b^K`` by ``W_K[i] = phi(i/b^K) + lam W_{K-1}[i mod b^{K-1}]``."""
    W = k(np.zeros(1)) / (1 - p.lam)
    for L in range(1, K + 1):
        x = np.arange(p.b**L, dtype=float) / p.b**L
        W = k(x) + p.lam * np.tile(W, (p.b, 1))
    return W


def grid_values(p: Params, k: KernelFunction, K: int, start: int, stop: int, table=None) -> np.ndarray:
    """``W(i / b^K)`` for ``start <= i < stop``, exact up to rounding.

    The first ``K - K0`` terms are summed directly and the remainder is read
    from a table on the level-``K0`` grid.
    """
    if p.b**K > 2**53:
        raise ResourceGuardError(f"grid b^{K} exceeds exactly representable range")
    if table is None:
        table = _grid_table(p, k, min(K, _table_level(p.b)))
    K0 = round(math.log(table.shape[0], p.b))
    i = np.arange(start, stop, dtype=np.int64)
    out = np.zeros((i.size, k.d))
    for n in range(K - K0):
        mod = p.b ** (K - n)
        out += p.lam**n * k((i % mod).astype(float) / mod)
    out += p.lam ** (K - K0) * table[i % p.b**K0]
    return out


def _table_level(b: int) -> int:
    return max(1, int(_TABLE_BITS / math.log2(b)))


# ---------------------------------------------------------------------------
# counters


def _theta(p: Params, k: KernelFunction | None, d: int, q: int | None) -> float:
    if k is None:
        return 0.0
    if q is None:
        q = compute_q(p, k).q_prime
    return min(max(predicted_dimension(p, d, q).value - 1, 0.0), float(d))


def _stratified(N: int, seed: int) -> np.ndarray:
    i = np.arange(N, dtype=float)
    jitter = (0.5 + seed * _GOLDEN + i * _GOLDEN) % 1.0
    return (i + jitter) / N


def _count_points(values_fn, n: int, b: int, N: int, d: int, radius: float, seed: int) -> int:
    scale = float(b) ** n
    # shift keeps y >= 0 and puts y = 0 at distance >= 1/(b+1) of a cell boundary
    shift = math.ceil(radius) + 1.0 / (b + 1)
    width = int(math.ceil((2 * radius + 2) * scale)) + 2
    radices = [b**n] + [width] * d
    packable = math.log2(b**n) + d * math.log2(width) < 62
    x = _stratified(N, seed)
    parts = []
    for s in range(0, N, _CHUNK):
        xs = x[s : s + _CHUNK]
        y = values_fn(xs)
        cells = np.floor(np.concatenate([xs[:, None], y + shift], axis=1) * scale).astype(np.int64)
        if np.any(cells[:, 1:] < 0) or np.any(cells[:, 1:] >= width):
            raise ValueError("graph leaves the declared radius")
        if packable:
            key = cells[:, 0].copy()
            for c in range(1, d + 1):
                key = key * radices[c] + cells[:, c]
            parts.append(np.unique(key))
        else:
            parts.append(np.unique(cells, axis=0))
    if packable:
        return int(np.unique(np.concatenate(parts)).size)
    return int(np.unique(np.concatenate(parts), axis=0).shape[0])


def _range_levels(values_chunk, levels: Sequence[int], b: int, K: int) -> dict:
    """Per-level column ranges at grid K and at its every-b-th subsample."""
    n_max = max(levels)
    cols = b**n_max
    per_col = b ** (K - n_max)
    big = np.inf
    stats_ = {
        "lo": np.full(cols, big),
        "hi": np.full(cols, -big),
        "lo_c": np.full(cols, big),
        "hi_c": np.full(cols, -big),
    }
    # value at each column's right end (the next column's first sample): the
    # graph over a half-open column approaches it without attaining it
    closer = np.empty(cols)
    total = b**K
    step = max(per_col, (_CHUNK // per_col) * per_col)
    for s in range(0, total, step):
        e = min(total, s + step)
        yy = values_chunk(s, e + 1)[:, 0]
        y = yy[:-1].reshape(-1, per_col)
        c0 = s // per_col
        sl = slice(c0, c0 + y.shape[0])
        closer[sl] = yy[per_col::per_col]
        stats_["lo"][sl] = y.min(axis=1)
        stats_["hi"][sl] = y.max(axis=1)
        yc = y[:, ::b]
        stats_["lo_c"][sl] = yc.min(axis=1)
        stats_["hi_c"][sl] = yc.max(axis=1)
    out = {}
    for n in sorted(levels, reverse=True):
        group = b ** (n_max - n)
        scale = float(b) ** n
        end = closer[group - 1 :: group] * scale
        res = []
        for lo_key, hi_key in (("lo", "hi"), ("lo_c", "hi_c")):
            lo = np.floor(stats_[lo_key].reshape(-1, group).min(axis=1) * scale)
            hi = np.floor(stats_[hi_key].reshape(-1, group).max(axis=1) * scale)
            lo = np.minimum(lo, np.floor(end))
            hi = np.maximum(hi, np.ceil(end) - 1)
            res.append(int(np.sum(hi - lo + 1)))
        out[n] = tuple(res)
    return out


def _grid_level(p: Params, n: int, oversample: int, kappa: float) -> int:
    return int(math.ceil(n * kappa - 1e-9)) + int(math.ceil(math.log(oversample, p.b) - 1e-9))


def _kappa(p: Params, q: int | None, d: int) -> float:
    """Grid exponent for the range counter.

    A graph of Hoelder exponent ``a = log_b(1/lam)`` moves about
    ``delta^a`` over a step ``delta``; resolving level-n cells needs
    ``delta <= b^{-n/a}``.  Lipschitz graphs (q = d) need only ``b^{-n}``.
    """
    if q is not None and q == d:
        return 1.0
    return max(1.0, math.log(p.b) / -math.log(p.lam))


def box_counts(
    p: Params,
    k: KernelFunction | None,
    levels: Sequence[int],
    oversample: int = DEFAULT_OVERSAMPLE,
    tb: TruncationBudget | None = None,
    *,
    method: str = "auto",
    graph: GraphFn | None = None,
    d: int | None = None,
    q: int | None = None,
    theta: float | None = None,
    radius: float | None = None,
    seed: int = 1,
    max_cells: int = MAX_CELLS,
) -> list[BoxCount]:
    """Box counts of a graph at several levels.

    Parameters
    ----------
    p, k
        Parameters and kernel.  ``k`` may be None when ``graph`` is given.
    levels
        Levels ``n >= 1``.
    oversample
        Sample-density multiplier, ``>= 4``.
    method
        ``"range"`` (d = 1 only), ``"points"`` or ``"auto"`` (range when d = 1).
    graph
        Optional callable ``x -> (N, d)`` replacing ``W``; it is sampled at
        the same abscissae as ``W`` would be.
    q
        Degeneracy index used for the sampling exponent; computed if omitted.
    theta, radius
        Overrides for the points counter (per-column exponent and a bound on
        ``|y|``).

    Raises
    ------
    ResourceGuardError
        If the estimated number of occupied cells exceeds ``max_cells`` or
        the grid would be too large.
    """
    levels = sorted(int(n) for n in levels)
    if not levels or levels[0] < 1:
        raise ValueError("levels must be >= 1")
    if oversample < 4:
        raise ValueError("oversample must be >= 4")
    if graph is None and k is None:
        raise ValueError("need a kernel or a graph function")
    if d is None:
        d = k.d if graph is None else int(np.asarray(graph(np.zeros(1))).reshape(1, -1).shape[1])
    if method == "auto":
        method = "range" if d == 1 else "points"
    if method not in ("range", "points"):
        raise ValueError(f"unknown method {method!r}")
    if method == "range" and d != 1:
        raise ValueError("range counting needs d = 1")
    if graph is None and q is None:
        q = compute_q(p, k).q_prime
    if theta is None:
        theta = _theta(p, k, d, q) if graph is None else 0.0
    b = p.b

    est = max(b**n * math.ceil(b ** (n * theta)) for n in levels)
    if est > max_cells:
        raise ResourceGuardError(
            f"about {est:.3g} occupied cells at level {levels[-1]} exceed the guard of {max_cells:.3g}; "
            "lower the finest level"
        )

    if method == "range":
        kappa = _kappa(p, q, d) if graph is None else 1.0
        # the table is built at level _table_level anyway, so coarser grids save nothing
        K = max(_grid_level(p, levels[-1], oversample, kappa), levels[-1] + 1, _table_level(b))
        if b**K > MAX_GRID_POINTS:
            raise ResourceGuardError(
                f"range counting needs b^{K} = {b**K:.3g} grid points; lower the finest level or the oversample"
            )
        if graph is None:
            table = _grid_table(p, k, min(K, _table_level(b)))
            fn = lambda s, e: grid_values(p, k, K, s, e, table)  # noqa: E731
        else:
            fn = lambda s, e: np.asarray(graph(np.arange(s, e) / float(b) ** K), dtype=float).reshape(e - s, 1)  # noqa: E731
        res = _range_levels(fn, levels, b, K)
        return [
            BoxCount(n, res[n][0], res[n][1], _relative_change(*res[n]) < STABILITY_TOL, b**K)
            for n in levels
        ]

    if radius is None:
        if graph is None:
            radius = float(np.linalg.norm(k.sup_bounds()[0])) / (1 - p.lam)
        else:
            radius = 1.0
    if graph is None:
        def fn_at(n):
            tb_n = tb or TruncationBudget.for_kernel(p, k, tol=1e-4 * float(b) ** -n)
            return lambda x: eval_W(p, k, x, tb_n)
    else:
        def fn_at(n):
            return lambda x: np.asarray(graph(x), dtype=float).reshape(x.size, d)
    out = []
    for n in levels:
        N = oversample * b**n * math.ceil(b ** (n * theta))
        fine = _count_points(fn_at(n), n, b, N, d, radius, seed)
        coarse = _count_points(fn_at(n), n, b, N // 2, d, radius, seed)
        out.append(BoxCount(n, fine, coarse, _relative_change(fine, coarse) < STABILITY_TOL, N))
    return out


def box_count(p: Params, k: KernelFunction | None, n: int, oversample: int = DEFAULT_OVERSAMPLE, tb=None, **kw) -> int:
    """Number of level-n b-adic cells of R^{1+d} met by the graph."""
    return box_counts(p, k, [n], oversample, tb, **kw)[0].count


def estimate_box_dimension(counts, fit_range: tuple[int, int] | None = None, b: int = 2) -> tuple[float, float]:
    """Least-squares slope of ``log_b N_n`` against ``n`` and its standard error.

    ``counts`` is a sequence of ``(n, N_n)``; ``fit_range = (n0, n1)``
    restricts the fit to ``n0 <= n <= n1``.
    """
    pts = [(int(n), int(N)) for n, N in counts]
    if fit_range is not None:
        pts = [(n, N) for n, N in pts if fit_range[0] <= n <= fit_range[1]]
    if len(pts) < 3:
        raise ValueError("need at least 3 levels to fit")
    if any(N < 1 for _, N in pts):
        raise ValueError("counts must be positive")
    n = np.array([t[0] for t in pts], dtype=float)
    y = np.log(np.array([t[1] for t in pts], dtype=float)) / math.log(b)
    fit = stats.linregress(n, y)
    return float(fit.slope), float(fit.stderr)


# ---------------------------------------------------------------------------
# report


@dataclass
class ReportOptions:
    levels: tuple[int, int] = (2, 8)
    fit_drop: int = 2
    oversample: int = DEFAULT_OVERSAMPLE
    method: str = "auto"
    box: bool = True
    entropy: bool = False
    samples: int = 10**5
    entropy_levels: tuple[int, int] = (2, 12)
    seed: int = 1
    stream_length: int = 64
    rank_tol: float = 1e-8


@dataclass
class DimensionReport:
    b: int
    lam: float
    d: int
    predicted: float
    branch: str
    q: int
    levels: list = field(default_factory=list)
    counts: list = field(default_factory=list)
    stable: list = field(default_factory=list)
    fit_levels: list = field(default_factory=list)
    slope: float | None = None
    stderr: float | None = None
    alpha: tuple | None = None
    ly_dim: float | None = None
    method: str = ""
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["alpha"] = list(self.alpha) if self.alpha is not None else None
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def counts_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "N_n", "stable"])
        for n, N, s in zip(self.levels, self.counts, self.stable):
            w.writerow([n, N, int(s)])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"predicted={self.predicted:.6f} branch={self.branch} q={self.q}"]
        if self.slope is not None:
            lines.append(f"box_slope={self.slope:.4f} stderr={self.stderr:.4f} levels={self.fit_levels}")
        if self.alpha is not None:
            lines.append(f"alpha={self.alpha[0]:.4f} stderr={self.alpha[1]:.4f} ly_dim={self.ly_dim:.4f} (consistency check)")
        lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines)


def _check_invariants(b: int, d: int, counts: list[BoxCount]) -> list[str]:
    warn = []
    for a, c in zip(counts, counts[1:]):
        if c.level == a.level + 1:
            if c.count < a.count:
                warn.append(f"count decreased from level {a.level} to {c.level}")
            if c.count > b ** (1 + d) * a.count:
                warn.append(f"count grew by more than b^(1+d) from level {a.level} to {c.level}")
    return warn


def fit_counts(counts: list[BoxCount], fit_range: tuple[int, int], b: int):
    """Regression over stable levels in ``fit_range``; falls back to all levels there."""
    inside = [c for c in counts if fit_range[0] <= c.level <= fit_range[1]]
    use = [c for c in inside if c.stable]
    warn = []
    dropped = [c.level for c in inside if not c.stable]
    if len(use) < 3:
        use = inside
        if dropped:
            warn.append(f"oversample-unstable levels {dropped}; fit uses all levels in range")
    elif dropped:
        warn.append(f"dropped oversample-unstable levels {dropped}")
    slope, stderr = estimate_box_dimension([(c.level, c.count) for c in use], b=b)
    return slope, stderr, [c.level for c in use], warn


def full_report(p: Params, k: KernelFunction, options: ReportOptions | None = None) -> DimensionReport:
    """Predicted dimension, box-counting estimate and the entropy cross-check."""
    opt = options or ReportOptions()
    crit = compute_q(p, k, rank_tol=opt.rank_tol)
    q = crit.q_prime
    pred = predicted_dimension(p, k.d, q)
    rep = DimensionReport(p.b, p.lam, k.d, pred.value, pred.branch, q)
    if pred.branch == "critical":
        rep.warnings.append("critical case: both branches of the formula agree")
    if opt.box:
        n0, n1 = opt.levels
        if not 1 <= n0 <= n1:
            raise ValueError("levels must be ascending and >= 1")
        counts = box_counts(p, k, range(n0, n1 + 1), opt.oversample, method=opt.method, q=q, seed=opt.seed)
        rep.method = opt.method if opt.method != "auto" else ("range" if k.d == 1 else "points")
        rep.levels = [c.level for c in counts]
        rep.counts = [c.count for c in counts]
        rep.stable = [bool(c.stable) for c in counts]
        rep.warnings.extend(_check_invariants(p.b, k.d, counts))
        fit_range = (n0 + opt.fit_drop, n1)
        if fit_range[1] - fit_range[0] >= 2:
            rep.slope, rep.stderr, rep.fit_levels, w = fit_counts(counts, fit_range, p.b)
            rep.warnings.extend(w)
        else:
            rep.warnings.append("fewer than 3 levels after dropping coarse levels; no fit")
    if opt.entropy:
        rng = np.random.default_rng(opt.seed)
        j = SymbolStream.random(p.b, opt.stream_length, rng)
        w = sample_flow_projection(p, k, j, opt.samples, seed=opt.seed)
        fit = entropy_dimension(w, opt.entropy_levels)
        rep.alpha = (fit.slope, fit.stderr)
        rep.ly_dim = 1 + (1 + math.log(p.lam) / math.log(p.b)) * fit.slope
        if fit.warning:
            rep.warnings.append("entropy: " + fit.warning)
    return rep
