"""Entropy of measures on b-adic partitions.

Two kinds of measure share one interface:

`EmpiricalMeasure`
    a weighted point cloud; cell masses are found by flooring ``b^n x``.
`DigitProductMeasure`
    the law of ``corner + b^{-s} sum_k X_k b^{-k}`` with i.i.d. digits
    ``X_k`` drawn coordinatewise from fixed digit distributions (uniform and
    Bernoulli measures on cubes).  Cell masses are known in closed form at
    every level and are enumerated by digit type class, so identities can be
    checked at levels far beyond what a point cloud could resolve.

Logarithms are base ``b`` throughout.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .core import (
    KernelFunction,
    Params,
    SymbolStream,
    TruncationBudget,
    check_orthonormal,
    eval_Gamma,
    eval_W,
)

__all__ = [
    "EmpiricalMeasure",
    "DigitProductMeasure",
    "entropy",
    "conditional_entropy",
    "component_entropy_average",
    "component",
    "decomposition_residual",
    "decomposition_bound",
    "project",
    "orthogonal_complement",
    "join_entropy",
    "is_concentrated",
    "is_saturated",
    "sample_mu",
    "sample_flow_projection",
    "EntropyFit",
    "entropy_dimension",
    "save_measure_csv",
    "load_measure_csv",
    "mixture",
]

UNDERSAMPLING_RATIO = 50


def _xlogx_sum(masses: np.ndarray, mult: np.ndarray | None, b: int) -> float:
    m = np.asarray(masses, dtype=float)
    keep = m > 0
    m = m[keep]
    terms = -m * np.log(m) / math.log(b)
    if mult is not None:
        terms = terms * np.asarray(mult, dtype=float)[keep]
    # a lone cell of mass 1 - eps would otherwise give a tiny negative value
    return max(0.0, float(np.sum(terms)))


def _cell_keys(cells: np.ndarray) -> np.ndarray:
    """Row-unique integer ids for an (M, k) integer cell array."""
    if cells.shape[1] == 0:
        return np.zeros(cells.shape[0], dtype=np.int64)
    if cells.shape[1] == 1:
        return cells[:, 0]
    _, inv = np.unique(cells, axis=0, return_inverse=True)
    return inv.reshape(-1)


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Weighted point cloud in R^k with b-adic cell operations."""

    points: np.ndarray
    weights: np.ndarray
    b: int = 2
    radius: float | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.size != pts.shape[0]:
            raise ValueError("one weight per point required")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        r = float(np.max(np.linalg.norm(pts, axis=1))) if pts.size else 0.0
        if self.radius is None:
            radius = r
        else:
            radius = float(self.radius)
            if r > radius * (1 + 1e-12) + 1e-12:
                raise ValueError(f"points reach radius {r}, beyond declared {radius}")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "radius", radius)

    @classmethod
    def uniform_weights(cls, points, b: int = 2, radius: float | None = None) -> "EmpiricalMeasure":
        pts = np.asarray(points, dtype=float)
        n = pts.shape[0]
        return cls(pts, np.full(n, 1.0 / n), b, radius)

    @classmethod
    def point_mass(cls, x, b: int = 2) -> "EmpiricalMeasure":
        return cls(np.atleast_2d(np.asarray(x, dtype=float)), np.ones(1), b)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def cells(self, n: int) -> np.ndarray:
        return np.floor(self.points * float(self.b) ** n).astype(np.int64)

    def cell_masses(self, n: int):
        keys = _cell_keys(self.cells(n))
        _, inv = np.unique(keys, return_inverse=True)
        masses = np.bincount(inv.reshape(-1), weights=self.weights)
        return masses, None

    def occupied(self, n: int) -> int:
        return int(np.unique(_cell_keys(self.cells(n))).size)

    def entropy(self, n: int) -> float:
        masses, mult = self.cell_masses(n)
        return _xlogx_sum(masses, mult, self.b)

    def component_entropy_average(self, n_coarse: int, n_fine: int) -> float:
        """``sum_D w(D) H(w_D, L_fine)`` computed component by component."""
        coarse = _cell_keys(self.cells(n_coarse))
        fine = _cell_keys(np.concatenate([self.cells(n_coarse), self.cells(n_fine)], axis=1))
        _, ci = np.unique(coarse, return_inverse=True)
        _, fi = np.unique(fine, return_inverse=True)
        ci, fi = ci.reshape(-1), fi.reshape(-1)
        fine_mass = np.bincount(fi, weights=self.weights)
        coarse_mass = np.bincount(ci, weights=self.weights)
        parent = np.zeros(fine_mass.size, dtype=np.int64)
        parent[fi] = ci
        rel = fine_mass / coarse_mass[parent]
        keep = fine_mass > 0
        h = np.zeros(fine_mass.size)
        h[keep] = -rel[keep] * np.log(rel[keep]) / math.log(self.b)
        per_parent = np.bincount(parent, weights=h, minlength=coarse_mass.size)
        return float(np.sum(coarse_mass * per_parent))

    def component(self, level: int, index: Sequence[int]) -> "EmpiricalMeasure":
        idx = np.asarray(index, dtype=np.int64)
        mask = np.all(self.cells(level) == idx, axis=1)
        mass = self.weights[mask].sum()
        if mass <= 0:
            raise ValueError("cell has zero mass")
        return EmpiricalMeasure(self.points[mask], self.weights[mask] / mass, self.b, self.radius)

    def components(self, n: int):
        cells = self.cells(n)
        keys = _cell_keys(cells)
        uniq, first = np.unique(keys, return_index=True)
        out = []
        for i in first:
            c = self.component(n, cells[i])
            out.append((float(self.weights[np.all(cells == cells[i], axis=1)].sum()), c))
        return out


@dataclass(frozen=True, eq=False)
class DigitProductMeasure:
    """Product measure with i.i.d. b-ary digits, one digit law per coordinate.

    ``digit_probs[c]`` is the distribution of every digit of coordinate
    ``c``.  The measure lives on ``corner + b^{-offset} [0, 1)^k``.
    ``digit_probs = [[1/b]*b]*k`` is Lebesgue measure on the unit cube;
    ``[[1 - p, p]]`` with ``b = 2`` is the Bernoulli(p) measure.
    """

    digit_probs: tuple
    b: int = 2
    offset: int = 0
    corner: tuple = ()

    def __post_init__(self):
        probs = tuple(tuple(float(v) for v in row) for row in self.digit_probs)
        for row in probs:
            if len(row) != self.b:
                raise ValueError(f"each digit law needs {self.b} probabilities")
            if any(v < 0 for v in row) or abs(sum(row) - 1) > 1e-12:
                raise ValueError("digit law must be a probability vector")
        object.__setattr__(self, "digit_probs", probs)
        corner = tuple(self.corner) if self.corner else (0,) * len(probs)
        object.__setattr__(self, "corner", tuple(int(c) for c in corner))

    @classmethod
    def uniform(cls, dim: int, b: int = 2) -> "DigitProductMeasure":
        return cls(((1.0 / b,) * b,) * dim, b)

    @classmethod
    def bernoulli(cls, p: float, b: int = 2) -> "DigitProductMeasure":
        """Digits equal to 1 with probability ``p`` (b = 2), on [0, 1)."""
        if b != 2:
            raise ValueError("Bernoulli measure is defined for b = 2")
        return cls(((1 - p, p),), 2)

    @property
    def dim(self) -> int:
        return len(self.digit_probs)

    @property
    def radius(self) -> float:
        scale = float(self.b) ** -self.offset
        far = [abs(c * scale) + scale for c in self.corner]
        return float(math.sqrt(sum(f * f for f in far)))

    def digit_entropy(self) -> float:
        return sum(_xlogx_sum(np.array(row), None, self.b) for row in self.digit_probs)

    def _type_classes(self, n: int):
        """Distinct cell masses at ``n`` free digits per coordinate, with multiplicities."""
        per_coord = []
        for row in self.digit_probs:
            support = [i for i, v in enumerate(row) if v > 0]
            logp = np.log([row[i] for i in support])
            masses, mults = [], []
            for counts in _compositions(n, len(support)):
                c = np.asarray(counts)
                masses.append(float(c @ logp))
                mults.append(float(gammaln(n + 1) - np.sum(gammaln(c + 1))))
            per_coord.append((np.array(masses), np.array(mults)))
        logm, logc = per_coord[0]
        for lm, lc in per_coord[1:]:
            logm = np.add.outer(logm, lm).ravel()
            logc = np.add.outer(logc, lc).ravel()
        return logm, logc

    def cell_masses(self, n: int):
        free = n - self.offset
        if free <= 0:
            return np.ones(1), None
        logm, logc = self._type_classes(free)
        return np.exp(logm), np.exp(logc)

    def entropy(self, n: int) -> float:
        free = n - self.offset
        if free <= 0:
            return 0.0
        logm, logc = self._type_classes(free)
        # sum over classes of count * (-m log_b m), kept in log space for the counts
        return float(np.sum(np.exp(logc + logm) * (-logm)) / math.log(self.b))

    def occupied(self, n: int) -> int:
        free = max(0, n - self.offset)
        out = 1
        for row in self.digit_probs:
            out *= sum(1 for v in row if v > 0) ** free
        return out

    def component(self, level: int, index: Sequence[int]) -> "DigitProductMeasure":
        idx = tuple(int(i) for i in index)
        if level <= self.offset:
            lift = self.b ** (self.offset - level)
            if tuple(c // lift for c in self.corner) != idx:
                raise ValueError("cell has zero mass")
            return self
        free = level - self.offset
        lift = self.b**free
        for c, i, row in zip(self.corner, idx, self.digit_probs):
            rel = i - c * lift
            if not 0 <= rel < lift:
                raise ValueError("cell has zero mass")
            for k in range(free):
                if row[(rel // self.b ** (free - 1 - k)) % self.b] == 0:
                    raise ValueError("cell has zero mass")
        return DigitProductMeasure(self.digit_probs, self.b, level, idx)

    def components(self, n: int):
        """All level-n components are lattice translates of one another.

        Translating by a multiple of ``b^{-n}`` leaves every partition of
        level ``>= n`` invariant, so one representative of total mass 1
        stands for all of them.
        """
        if n <= self.offset:
            return [(1.0, self)]
        return [(1.0, DigitProductMeasure(self.digit_probs, self.b, n, (0,) * self.dim))]

    def component_entropy_average(self, n_coarse: int, n_fine: int) -> float:
        return float(sum(w * c.entropy(n_fine) for w, c in self.components(n_coarse)))

    def to_empirical(self, level: int) -> EmpiricalMeasure:
        """Cell masses at ``level`` placed on the cell centres."""
        free = level - self.offset
        if free < 0:
            raise ValueError("level must be >= offset")
        scale = float(self.b) ** -level
        axes = []
        for c, row in zip(self.corner, self.digit_probs):
            idx = np.array([0])
            w = np.array([1.0])
            for _ in range(free):
                idx = (idx[:, None] * self.b + np.arange(self.b)[None, :]).ravel()
                w = (w[:, None] * np.asarray(row)[None, :]).ravel()
            keep = w > 0
            axes.append(((c * self.b**free + idx[keep] + 0.5) * scale, w[keep]))
        pts = np.array(list(itertools.product(*[a[0] for a in axes])))
        wts = np.array([np.prod(t) for t in itertools.product(*[a[1] for a in axes])])
        return EmpiricalMeasure(pts.reshape(len(wts), self.dim), wts / wts.sum(), self.b)


def _compositions(n: int, parts: int):
    if parts == 1:
        yield (n,)
        return
    for i in range(n + 1):
        for rest in _compositions(n - i, parts - 1):
            yield (i,) + rest


# ---------------------------------------------------------------------------
# module-level operations


def entropy(w, n: int) -> float:
    """``H(w, L_n)`` in base-b units."""
    if n < 0:
        raise ValueError("level must be nonnegative")
    return w.entropy(n)


def conditional_entropy(w, n_fine: int, n_coarse: int) -> float:
    """``H(w, L_fine | L_coarse) = H(w, L_fine) - H(w, L_coarse)``."""
    if n_fine < n_coarse:
        raise ValueError("n_fine must be >= n_coarse")
    return w.entropy(n_fine) - w.entropy(n_coarse)


def component_entropy_average(w, n_fine: int, n_coarse: int) -> float:
    """Conditional entropy as the weighted average of component entropies."""
    if n_fine < n_coarse:
        raise ValueError("n_fine must be >= n_coarse")
    return w.component_entropy_average(n_coarse, n_fine)


def component(w, level: int, index: Sequence[int]):
    """The conditional measure of ``w`` on the level-``level`` cell ``index``."""
    return w.component(level, index)


def decomposition_residual(w, n: int, m: int) -> float:
    """``|H(w, L_n)/n - mean_{0<=i<n} E[H(w_{y,i}, L_{i+m})]/m|``.

    The expectation is computed from the components themselves, not from
    entropy differences.  For a measure on R^k of radius ``R`` the residual
    is ``O(k (2m + log_b(2R + 2) + 1) / n)``.
    """
    if not 1 <= m <= n:
        raise ValueError("need n >= m >= 1")
    avg = sum(w.component_entropy_average(i, i + m) for i in range(n)) / (n * m)
    return abs(w.entropy(n) / n - avg)


def decomposition_bound(w, n: int, m: int) -> float:
    R = max(float(w.radius), 0.0)
    return w.dim * (2 * m + math.log(2 * R + 2, w.b) + 1) / n


def orthogonal_complement(basis, k: int) -> np.ndarray:
    """Orthonormal rows spanning the complement of the row space of ``basis``."""
    B = check_orthonormal(basis, k)
    if B.shape[0] == 0:
        return np.eye(k)
    _, s, vt = np.linalg.svd(B, full_matrices=True)
    return vt[B.shape[0] :].copy()


def project(w: EmpiricalMeasure, basis) -> EmpiricalMeasure:
    """Push ``w`` forward under the orthogonal projection onto span(basis).

    The image is written in the coordinates of ``basis``; projecting onto the
    zero space gives a point mass in R^0.
    """
    B = check_orthonormal(basis, w.dim)
    pts = w.points @ B.T
    return EmpiricalMeasure(pts.reshape(w.size, B.shape[0]), w.weights, w.b, w.radius)


def join_entropy(w: EmpiricalMeasure, basis, n: int) -> float:
    """Entropy of the join of the level-n partitions along V and along V-perp."""
    B = check_orthonormal(basis, w.dim)
    P = np.concatenate([B, orthogonal_complement(B, w.dim)], axis=0)
    return EmpiricalMeasure(w.points @ P.T, w.weights, w.b, w.radius).entropy(n)


def _weighted_median(v: np.ndarray, w: np.ndarray) -> float:
    order = np.argsort(v)
    cw = np.cumsum(w[order])
    return float(v[order][np.searchsorted(cw, 0.5 * cw[-1])])


def is_concentrated(w: EmpiricalMeasure, basis, eps: float) -> bool:
    """Whether mass ``>= 1 - eps`` lies within ``eps`` of a translate ``V + y``.

    The translate is the coordinatewise weighted median of the V-perp
    components.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    perp = orthogonal_complement(basis, w.dim)
    if perp.shape[0] == 0:
        return True
    c = w.points @ perp.T
    y = np.array([_weighted_median(c[:, i], w.weights) for i in range(c.shape[1])])
    near = np.linalg.norm(c - y, axis=1) <= eps
    return bool(w.weights[near].sum() >= 1 - eps - 1e-12)


def is_saturated(w: EmpiricalMeasure, basis, eps: float, m: int) -> bool:
    """``H(w, L_m)/m >= H(pi_{V-perp} w, L_m)/m + dim V - eps``."""
    if eps <= 0 or m < 1:
        raise ValueError("need eps > 0 and m >= 1")
    B = check_orthonormal(basis, w.dim)
    perp = orthogonal_complement(B, w.dim)
    lhs = w.entropy(m) / m
    rhs = project(w, perp).entropy(m) / m + B.shape[0] - eps
    return bool(lhs >= rhs)


def mixture(w1: EmpiricalMeasure, w2: EmpiricalMeasure, t: float) -> EmpiricalMeasure:
    """``t w1 + (1 - t) w2``."""
    pts = np.concatenate([w1.points, w2.points])
    wts = np.concatenate([t * w1.weights, (1 - t) * w2.weights])
    return EmpiricalMeasure(pts, wts / wts.sum(), w1.b, max(w1.radius, w2.radius))


# ---------------------------------------------------------------------------
# samplers


def _stratified(M: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return (np.arange(M) + rng.random(M)) / M


def sample_mu(p: Params, k: KernelFunction, M: int, tb: TruncationBudget | None = None, seed: int = 1) -> EmpiricalMeasure:
    """``M`` stratified samples ``(x_i, W(x_i))`` of the graph measure."""
    if M < 1:
        raise ValueError("M must be >= 1")
    x = _stratified(M, seed)
    W = eval_W(p, k, x, tb)
    bound = np.sqrt(np.sum((k.sup_bounds()[0] / (1 - p.lam)) ** 2))
    pts = np.concatenate([x[:, None], W], axis=1)
    return EmpiricalMeasure(pts, np.full(M, 1.0 / M), p.b, 1.0 + float(bound))


def sample_flow_projection(
    p: Params,
    k: KernelFunction,
    j: SymbolStream,
    M: int,
    tb: TruncationBudget | None = None,
    seed: int = 1,
    mu: EmpiricalMeasure | None = None,
) -> EmpiricalMeasure:
    """Samples of ``pi_j mu`` in R^d, ``pi_j(x, W(x)) = W(x) - Gamma_j(x)``."""
    if mu is None:
        mu = sample_mu(p, k, M, tb, seed)
    x, y = mu.points[:, 0], mu.points[:, 1:]
    pts = y - eval_Gamma(p, k, x, j, tb)
    s0, s1 = k.sup_bounds()
    bound = np.sqrt(np.sum((s0 / (1 - p.lam) + s1 * p.gamma / (1 - p.gamma)) ** 2))
    return EmpiricalMeasure(pts, mu.weights, p.b, float(bound) + 1e-9)


class EntropyFit(NamedTuple):
    slope: float
    stderr: float
    levels: tuple
    entropies: tuple
    undersampled: tuple
    warning: str


def entropy_dimension(w, levels: tuple[int, int], ratio: int = UNDERSAMPLING_RATIO) -> EntropyFit:
    """Least-squares slope of ``H(w, L_n)`` against ``n`` for ``n0 <= n <= n1``.

    For point clouds, levels with at least ``size / ratio`` occupied cells
    are undersampled and left out of the fit; if fewer than two levels
    survive, all levels are used and a warning is recorded.
    """
    n0, n1 = levels
    if not n1 > n0 >= 1:
        raise ValueError("need n1 > n0 >= 1")
    ns = list(range(n0, n1 + 1))
    H = [w.entropy(n) for n in ns]
    under = []
    if isinstance(w, EmpiricalMeasure):
        under = [n for n in ns if w.occupied(n) * ratio >= w.size]
    use = [i for i, n in enumerate(ns) if n not in under]
    warning = ""
    if len(use) < 2:
        use = list(range(len(ns)))
        warning = f"undersampled at levels {under}; fit uses all levels"
    elif under:
        warning = f"dropped undersampled levels {under}"
    slope, stderr = _linfit([ns[i] for i in use], [H[i] for i in use])
    return EntropyFit(slope, stderr, tuple(ns[i] for i in use), tuple(H), tuple(under), warning)


def _linfit(x, y) -> tuple[float, float]:
    if len(x) == 2:
        return float((y[1] - y[0]) / (x[1] - x[0])), 0.0
    fit = stats.linregress(x, y)
    return float(fit.slope), float(fit.stderr)


# ---------------------------------------------------------------------------
# CSV dump / restore


def save_measure_csv(w: EmpiricalMeasure, path=None) -> str:
    """Header ``# dim=k points=M radius=R`` then rows ``x_1,..,x_k,weight``."""
    buf = io.StringIO()
    buf.write(f"# dim={w.dim} points={w.size} radius={w.radius:.17g}\n")
    writer = csv.writer(buf, lineterminator="\n")
    for pt, wt in zip(w.points, w.weights):
        writer.writerow([f"{v:.17g}" for v in pt] + [f"{wt:.17g}"])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def load_measure_csv(source, b: int = 2) -> EmpiricalMeasure:
    """Inverse of `save_measure_csv`; ``source`` is a path or the CSV text."""
    if "\n" in str(source):
        text = str(source)
    else:
        with open(source) as fh:
            text = fh.read()
    lines = text.splitlines()
    header = dict(tok.split("=") for tok in lines[0].lstrip("#").split())
    k, M, R = int(header["dim"]), int(header["points"]), float(header["radius"])
    rows = [list(map(float, r)) for r in csv.reader(lines[1:]) if r]
    if len(rows) != M:
        raise ValueError(f"header says {M} points, found {len(rows)}")
    arr = np.array(rows, dtype=float).reshape(M, k + 1)
    return EmpiricalMeasure(arr[:, :k], arr[:, k], b, R)
