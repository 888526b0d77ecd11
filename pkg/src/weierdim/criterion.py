"""Fourier criterion for degenerate directions of the kernel.

For each positive ``t`` not divisible by ``b`` the lacunary sums

    S_t(lam) = sum_{n >= 0} a_{t b^n}(phi_j) lam^{-n}

vanish for every ``t`` exactly when ``phi_j`` is a coboundary
``lam psi(b x) - psi(x) + const``.  Stacking real and imaginary parts of
``S_{t_1} .. S_{t_m}`` for every coordinate gives the d x 2m matrix
``A_{lam, m}``; the dimension of its left null space, once it stops
shrinking in ``m``, is the degeneracy index ``q'``.

For trigonometric polynomials every ``S_t`` is a finite sum, so the index is
computed exactly up to floating point rounding.  Kernels ingested from
samples carry an explicit error bound that is added to the rank threshold.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import optimize

from .core import InvalidKernelError, KernelFunction, Params

__all__ = [
    "lacunary_indices",
    "fourier_coeff",
    "ingest_sampled",
    "LacunarySum",
    "series_S",
    "CriterionMatrix",
    "build_matrix",
    "kernel_space",
    "CriterionReport",
    "compute_q",
    "minor_sum_L",
    "compute_D",
    "ScanResult",
    "DegenerateLambda",
    "scan_degenerate",
    "PsiResult",
    "reconstruct_psi",
    "perturb_to_generic",
    "PredictedDimension",
    "predicted_dimension",
]

DEFAULT_RANK_TOL = 1e-8
DEFAULT_M_STABLE = 3
DEFAULT_M_CAP = 64

# sum_{l != 0} |m + l N|^{-3} <= 14 zeta(3) / N^3 for |m| <= N/2
_ALIAS_CONST = 14 * 1.2020569031595942


def lacunary_indices(b: int, count: int) -> list[int]:
    """The first ``count`` positive integers not divisible by ``b``, ascending."""
    out = []
    t = 1
    while len(out) < count:
        if t % b:
            out.append(t)
        t += 1
    return out


def _lacunary_support_count(b: int, max_freq: int) -> int:
    """How many lacunary indices are ``<= max_freq``."""
    return max_freq - max_freq // b


def fourier_coeff(k: KernelFunction, j: int, m: int) -> complex:
    """``a_m(phi_j)`` for the 1-based coordinate ``j``."""
    if not 1 <= j <= k.d:
        raise ValueError(f"coordinate index must be in [1, {k.d}]")
    return k.coefficient(j - 1, m)


def ingest_sampled(values, derivative_bound: float | None = None) -> KernelFunction:
    """Kernel from ``2**K`` uniform samples on ``[0, 1)`` per coordinate.

    ``values`` has shape ``(N,)`` or ``(N, d)``.  Coefficients are the DFT up
    to the Nyquist frequency.  When ``derivative_bound`` (a bound on
    ``sup |phi'''|``) is given, every stored coefficient carries the aliasing
    bound ``C * 14 zeta(3) / ((2 pi)^3 N^3)`` and unstored frequencies obey
    ``|a_m| <= C / (2 pi m)^3``.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    n = v.shape[0]
    if n < 64 or n & (n - 1):
        raise ValueError(f"sample count must be a power of two >= 64, got {n}")
    c = np.fft.rfft(v, axis=0) / n  # frequencies 0 .. n/2
    c[-1] /= 2  # Nyquist term is shared with -n/2
    freqs = np.arange(c.shape[0])
    err = 0.0
    if derivative_bound is not None:
        err = derivative_bound * _ALIAS_CONST / ((2 * np.pi) ** 3 * n**3)
    return KernelFunction(freqs, c.T, coeff_error=err, decay_bound=derivative_bound)


class LacunarySum(NamedTuple):
    value: complex
    tail: float


def _levels(b: int, t: int, max_freq: int) -> int:
    """Number of ``n >= 0`` with ``t b^n <= max_freq``."""
    n = 0
    f = t
    while f <= max_freq:
        n += 1
        f *= b
    return n


def _decay_tail(k: KernelFunction, b: int, lam: float, t: int, start: int) -> float:
    """Bound on ``sum_{n >= start} |a_{t b^n}| lam^{-n}`` from the decay bound."""
    if k.decay_bound is None:
        return 0.0
    ratio = 1.0 / (lam * b**3)
    first = k.decay_bound / (2 * np.pi * t) ** 3 * (1.0 / (lam * b**3)) ** start
    return first / (1 - ratio)


def series_S(p: Params, k: KernelFunction, j: int, t: int) -> LacunarySum:
    """Lacunary sum ``sum_n a_{t b^n}(phi_j) lam^{-n}`` for 1-based coordinate ``j``."""
    if t <= 0 or t % p.b == 0:
        raise ValueError(f"t must be a positive integer not divisible by b={p.b}")
    if not 1 <= j <= k.d:
        raise ValueError(f"coordinate index must be in [1, {k.d}]")
    top = int(k.freqs[-1]) if k.freqs.size else 0
    N = _levels(p.b, t, top)
    value = 0j
    for n in range(N - 1, -1, -1):
        value += k.coefficient(j - 1, t * p.b**n) * p.lam ** (-n)
    tail = k.coeff_error * sum(p.lam ** (-n) for n in range(N))
    tail += _decay_tail(k, p.b, p.lam, t, N)
    return LacunarySum(value, tail)


# ---------------------------------------------------------------------------
# coefficient tables shared by the single-lambda and batched paths


@dataclass(frozen=True)
class _Table:
    b: int
    ts: tuple
    coeffs: np.ndarray  # (d, m, L) complex, a_{t_c b^n}(phi_j)
    levels: np.ndarray  # (m,) number of stored levels per t
    coeff_error: float
    decay_bound: float | None

    def sums(self, lams: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
        """S values (n_lam, d, m) and absolute-term sums (n_lam, d, m)."""
        L = self.coeffs.shape[2]
        pw = np.power.outer(1.0 / lams, np.arange(L))  # (n_lam, L)
        C = self.coeffs[:, :m, :]
        # descending n is not needed for accuracy here: terms are few and exact
        S = np.einsum("jcn,ln->ljc", C, pw)
        A = np.einsum("jcn,ln->ljc", np.abs(C), pw)
        return S, A

    def tails(self, lams: np.ndarray, m: int) -> np.ndarray:
        """Per-entry error bounds (n_lam, m) for sampled kernels."""
        out = np.zeros((lams.size, m))
        if self.coeff_error == 0 and self.decay_bound is None:
            return out
        for c in range(m):
            n_lev = int(self.levels[c])
            geo = np.array([np.sum(lam ** -np.arange(n_lev)) for lam in lams])
            out[:, c] = self.coeff_error * geo
            if self.decay_bound is not None:
                t = self.ts[c]
                ratio = 1.0 / (lams * self.b**3)
                out[:, c] += self.decay_bound / (2 * np.pi * t) ** 3 * ratio**n_lev / (1 - ratio)
        return out


def _table(k: KernelFunction, b: int, m: int) -> _Table:
    ts = lacunary_indices(b, m)
    top = int(k.freqs[-1]) if k.freqs.size else 0
    levels = np.array([_levels(b, t, top) for t in ts], dtype=int)
    L = max(1, int(levels.max()) if levels.size else 1)
    pos = {int(f): i for i, f in enumerate(k.freqs)}
    coeffs = np.zeros((k.d, m, L), dtype=np.complex128)
    for c, t in enumerate(ts):
        f = t
        for n in range(levels[c]):
            i = pos.get(f)
            if i is not None:
                coeffs[:, c, n] = k.amps[:, i]
            f *= b
    return _Table(b, tuple(ts), coeffs, levels, k.coeff_error, k.decay_bound)


@dataclass(frozen=True)
class CriterionMatrix:
    """``A_{lam, m}``: columns ``[R_1 .. R_m, I_1 .. I_m]``, one row per coordinate.

    ``scale`` is the spectral-norm bound of the matrix of absolute term sums
    and ``tail`` a Frobenius bound on the entrywise error (zero for
    trigonometric polynomials); both feed the rank threshold.
    """

    lam: float
    m: int
    entries: np.ndarray
    scale: float = 0.0
    tail: float = 0.0


def _matrices(table: _Table, lams: np.ndarray, m: int):
    S, A = table.sums(lams, m)
    entries = np.concatenate([S.real, S.imag], axis=2)  # (n_lam, d, 2m)
    absmat = np.concatenate([A, A], axis=2)
    scale = np.linalg.norm(absmat, ord=2, axis=(1, 2)) if absmat.size else np.zeros(lams.size)
    tails = table.tails(lams, m)
    d = entries.shape[1]
    tail = np.sqrt(2 * d) * np.linalg.norm(tails, axis=1)
    return entries, scale, tail


def build_matrix(p: Params, k: KernelFunction, m: int) -> CriterionMatrix:
    if m < 1:
        raise ValueError("m must be >= 1")
    entries, scale, tail = _matrices(_table(k, p.b, m), np.array([p.lam]), m)
    return CriterionMatrix(p.lam, m, entries[0], float(scale[0]), float(tail[0]))


def _threshold(sigma_max, scale, tail, rank_tol):
    return np.maximum(rank_tol * np.maximum(sigma_max, scale), tail)


def _left_svd(entries: np.ndarray):
    """Left singular vectors and singular values padded to length d."""
    d = entries.shape[-2]
    U, s, _ = np.linalg.svd(entries, full_matrices=True)
    if s.shape[-1] < d:
        pad = np.zeros(s.shape[:-1] + (d - s.shape[-1],))
        s = np.concatenate([s, pad], axis=-1)
    return U, s


def kernel_space(M: CriterionMatrix | np.ndarray, rank_tol: float = DEFAULT_RANK_TOL):
    """Left null space ``{y : y A = 0}`` as ``(dim, basis rows)``.

    Singular values below ``rank_tol * max(sigma_max, scale)`` (or below the
    matrix error bound ``tail``) count as zero.  A zero matrix gives the
    whole space with the standard basis.
    """
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    if isinstance(M, CriterionMatrix):
        entries, scale, tail = M.entries, M.scale, M.tail
    else:
        entries, scale, tail = np.atleast_2d(np.asarray(M, dtype=float)), 0.0, 0.0
    d = entries.shape[0]
    U, s = _left_svd(entries)
    if s.size == 0 or s[0] == 0 and scale == 0:
        return d, np.eye(d)
    thr = _threshold(s[0], scale, tail, rank_tol)
    rank = int(np.sum(s > thr))
    basis = U[:, rank:].T.copy()
    return d - rank, basis


@dataclass
class CriterionReport:
    q_prime: int
    kernel_basis: np.ndarray
    singular_values: np.ndarray
    m_used: int
    sigma_gap: float
    threshold: float
    lam: float
    certified: bool = True
    cap_hit: bool = False
    dims: list = field(default_factory=list)

    def summary(self) -> str:
        return f"q={self.q_prime} sigma_gap={_fmt_gap(self.sigma_gap)} m={self.m_used}"

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "q": self.q_prime,
            "kernel_basis": [[float(v) for v in row] for row in self.kernel_basis],
            "singular_values": [float(v) for v in self.singular_values],
            "m_used": self.m_used,
            "sigma_gap": _json_float(self.sigma_gap),
            "threshold": float(self.threshold),
            "certified": self.certified,
            "cap_hit": self.cap_hit,
            "dims": list(self.dims),
        }


def _fmt_gap(g: float) -> str:
    return "inf" if math.isinf(g) else f"{g:.6g}"


def _json_float(v: float):
    return "inf" if math.isinf(v) else float(v)


def _sigma_gap(s: np.ndarray, rank: int) -> float:
    # sigma_rank / sigma_{rank+1}, 1-based; infinite at either end or on exact zeros
    if rank == 0 or rank >= s.size or s[rank] == 0:
        return math.inf
    return float(s[rank - 1] / s[rank])


def _batch_criterion(k: KernelFunction, b: int, lams: np.ndarray, rank_tol: float, m_stable: int, m_cap: int):
    """Run the stabilisation loop for many lambdas at once.

    Returns per-lambda ``(q, m_used, U, s, thr, dims, cap_hit)`` lists and the
    largest ``m`` examined.
    """
    d = k.d
    base = d + m_stable - 1
    if k.is_trig_polynomial:
        # columns past the support are exactly zero: run through the support
        support = _lacunary_support_count(b, k.max_freq)
        m_end = max(base, support)
    else:
        support = 0
        m_end = max(base, m_cap)
    table = _table(k, b, m_end)
    n = lams.size
    dims = np.zeros((n, m_end - d + 1), dtype=int)
    store = []
    for mi, m in enumerate(range(d, m_end + 1)):
        entries, scale, tail = _matrices(table, lams, m)
        U, s = _left_svd(entries)
        thr = _threshold(s[:, 0], scale, tail, rank_tol)
        rank = np.sum(s > thr[:, None], axis=1)
        allzero = (s[:, 0] == 0) & (scale == 0)
        rank[allzero] = 0
        dims[:, mi] = d - rank
        store.append((U, s, thr))
    results = []
    for i in range(n):
        chosen = None
        for mi, m in enumerate(range(d, m_end + 1)):
            if mi + 1 < m_stable or m < support:
                continue
            window = dims[i, mi - m_stable + 1 : mi + 1]
            if np.all(window == window[-1]):
                chosen = mi
                break
        cap_hit = chosen is None
        if cap_hit:
            chosen = dims.shape[1] - 1
        U, s, thr = store[chosen]
        results.append((int(dims[i, chosen]), d + chosen, U[i], s[i], float(thr[i]), dims[i, : chosen + 1].tolist(), cap_hit))
    return results, m_end, table


def compute_q(
    p: Params,
    k: KernelFunction,
    rank_tol: float = DEFAULT_RANK_TOL,
    m_stable: int = DEFAULT_M_STABLE,
    m_cap: int = DEFAULT_M_CAP,
) -> CriterionReport:
    """Degeneracy index ``q'`` at one ``lambda``.

    ``m`` runs from ``d`` upward until the kernel dimension has been constant
    for ``m_stable`` consecutive values.  For trigonometric polynomials the
    loop also runs at least until every lacunary index in the kernel's
    support has been included, after which all further columns are exactly
    zero and the answer is final.
    """
    if m_stable < 2:
        raise ValueError("m_stable must be >= 2")
    (res,), _, _ = _batch_criterion(k, p.b, np.array([p.lam]), rank_tol, m_stable, m_cap)
    q, m_used, U, s, thr, dims, cap_hit = res
    rank = k.d - q
    return CriterionReport(
        q_prime=q,
        kernel_basis=U[:, rank:].T.copy(),
        singular_values=s[: k.d].copy(),
        m_used=m_used,
        sigma_gap=_sigma_gap(s[: k.d], rank),
        threshold=thr,
        lam=p.lam,
        certified=k.is_trig_polynomial and not cap_hit,
        cap_hit=cap_hit,
        dims=dims,
    )


def minor_sum_L(M, k: int) -> float:
    """Sum of squared ``k x k`` minors over all row and column subsets."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rows, cols = M.shape
    if not 1 <= k <= min(rows, cols):
        raise ValueError(f"k must be in [1, {min(rows, cols)}]")
    total = 0.0
    for I in itertools.combinations(range(rows), k):
        sub = M[list(I), :]
        for J in itertools.combinations(range(cols), k):
            total += np.linalg.det(sub[:, list(J)]) ** 2
    return float(total)


def compute_D(p: Params, k: KernelFunction, j: int, m: int) -> float:
    """The ``m``-th entry ``L_j(A_{lam, m})`` of the sequence ``D_j(lam)``."""
    if not 1 <= j <= k.d:
        raise ValueError(f"j must be in [1, {k.d}]")
    A = build_matrix(p, k, m).entries
    if j > min(A.shape):
        return 0.0
    return minor_sum_L(A, j)


# ---------------------------------------------------------------------------
# lambda scan


@dataclass(frozen=True)
class DegenerateLambda:
    lam: float
    q_prime: int
    width: float
    sigma: float


@dataclass
class ScanResult:
    b: int
    p_prime: int
    degenerate: list
    grid: np.ndarray
    q_grid: np.ndarray
    sigma_grid: np.ndarray
    m_scan: int
    rank_tol: float
    refine_tol: float

    @property
    def degenerate_lambdas(self) -> list[float]:
        return [e.lam for e in self.degenerate]

    def to_dict(self) -> dict:
        return {
            "b": self.b,
            "p_prime": self.p_prime,
            "grid_n": int(self.grid.size),
            "grid_lo": float(self.grid[0]),
            "grid_hi": float(self.grid[-1]),
            "m_scan": self.m_scan,
            "rank_tol": self.rank_tol,
            "refine_tol": self.refine_tol,
            "degenerate": [
                {"lambda": e.lam, "q": e.q_prime, "width": e.width, "sigma": e.sigma}
                for e in self.degenerate
            ],
        }


def _surrogate(table: _Table, lams: np.ndarray, m: int, r: int, rank_tol: float):
    """``r``-th singular value (1-based) and rank threshold at each lambda."""
    entries, scale, tail = _matrices(table, lams, m)
    _, s = _left_svd(entries)
    thr = _threshold(s[:, 0], scale, tail, rank_tol)
    return s[:, r - 1], thr


def _refine(f, lo: float, hi: float, refine_tol: float):
    """Minimise the surrogate on ``[lo, hi]`` with bounded Brent iteration.

    The tolerance is pushed well below ``refine_tol`` so that at a true root
    the surrogate falls under its rank threshold; the returned width is the
    location tolerance actually requested.
    """
    xatol = min(refine_tol, 1e-13)
    res = optimize.minimize_scalar(lambda lam: f(lam)[0], bounds=(lo, hi), method="bounded",
                                   options={"xatol": xatol, "maxiter": 500})
    s, t = f(float(res.x))
    return float(res.x), s, t, xatol


def scan_degenerate(
    k: KernelFunction,
    b: int,
    grid_n: int = 10_000,
    refine_tol: float = 1e-6,
    rank_tol: float = DEFAULT_RANK_TOL,
    m_stable: int = DEFAULT_M_STABLE,
    m_cap: int = DEFAULT_M_CAP,
    lam_range: tuple[float, float] | None = None,
) -> ScanResult:
    """Locate the finitely many ``lambda`` where ``q'`` exceeds its generic value.

    ``q'`` is evaluated on ``grid_n`` interior points of ``(1/b, 1)`` (or of
    ``lam_range``); ``p'`` is the smallest value seen.  The smallest relevant
    singular value, ``sigma_{d - p'}`` of ``A_{lam, m}``, vanishes exactly at
    the degenerate parameters; its strict local minima on the grid are
    refined by bounded scalar minimisation and kept when the refined value falls
    below the rank threshold.
    """
    if grid_n < 100:
        raise ValueError("grid_n must be >= 100")
    if k.is_constant():
        raise InvalidKernelError("kernel must be non-constant")
    lo, hi = (1.0 / b, 1.0) if lam_range is None else lam_range
    if not (1.0 / b <= lo < hi <= 1.0):
        raise ValueError("lambda range must lie inside (1/b, 1)")
    grid = lo + (hi - lo) * np.arange(1, grid_n + 1) / (grid_n + 1)
    results, m_end, table = _batch_criterion(k, b, grid, rank_tol, m_stable, m_cap)
    q_grid = np.array([r[0] for r in results])
    m_scan = max(r[1] for r in results)
    p_prime = int(q_grid.min())
    r = k.d - p_prime
    sig, thr = _surrogate(table, grid, m_scan, r, rank_tol)

    def f(lam):
        s, t = _surrogate(table, np.array([lam]), m_scan, r, rank_tol)
        return float(s[0]), float(t[0])

    cands = []
    for i in range(grid_n):
        left = sig[i - 1] if i > 0 else math.inf
        right = sig[i + 1] if i + 1 < grid_n else math.inf
        if sig[i] < left and sig[i] < right or q_grid[i] > p_prime:
            cands.append(i)
    cands.sort(key=lambda i: sig[i])
    found: list[DegenerateLambda] = []
    step = grid[1] - grid[0]
    for i in cands[:200]:
        a = grid[i - 1] if i > 0 else max(lo, 1.0 / b + 1e-15)
        c = grid[i + 1] if i + 1 < grid_n else min(hi, 1.0 - 1e-15)
        lam_star, s_star, t_star, width = _refine(f, a, c, refine_tol)
        if s_star > t_star:
            continue
        if any(abs(lam_star - e.lam) < 2 * step for e in found):
            continue
        if not (1.0 / b < lam_star < 1.0):
            continue
        rep = compute_q(Params(b, lam_star), k, rank_tol, m_stable, m_cap)
        if rep.q_prime > p_prime:
            found.append(DegenerateLambda(lam_star, rep.q_prime, width, s_star))
    found.sort(key=lambda e: e.lam)
    return ScanResult(b, p_prime, found, grid, q_grid, sig, m_scan, rank_tol, refine_tol)


# ---------------------------------------------------------------------------
# psi reconstruction and perturbation


@dataclass
class PsiResult:
    success: bool
    psi: KernelFunction | None
    residual: float
    constant: np.ndarray
    residual_kernel: KernelFunction
    candidate: KernelFunction  # the coefficientwise solution, kept on failure too

    @property
    def failure(self) -> bool:
        return not self.success


def reconstruct_psi(p: Params, k: KernelFunction, residual_tol: float = 1e-9) -> PsiResult:
    """Solve ``phi(x) = lam psi(b x) - psi(x) + c`` coefficientwise.

    ``d_{t b^n} = -(a_{t b^n} + a_{t b^{n-1}} lam + ... + a_t lam^n)`` for
    every lacunary ``t`` and every level ``n`` inside the kernel's support;
    ``psi`` has zero mean.  With ``N`` levels of ``t`` in the support, the
    leftover ``phi - (lam psi(b.) - psi + c)`` is the trigonometric
    polynomial with coefficient ``lam^N S(t)`` at frequency ``t b^N``; its l1
    norm bounds the sup-norm residual and decides success.  A failure
    therefore reports a nonzero lacunary sum.
    """
    top = k.max_freq
    psi_maps: list[dict[int, complex]] = [dict() for _ in range(k.d)]
    res_maps: list[dict[int, complex]] = [dict() for _ in range(k.d)]
    for t in range(1, top + 1):
        if t % p.b == 0:
            continue
        N = _levels(p.b, t, top)
        for j in range(k.d):
            partial = 0j
            f = t
            for n in range(N):
                partial = partial * p.lam + k.coefficient(j, f)
                if partial != 0:
                    psi_maps[j][f] = -partial
                f *= p.b
            if partial != 0:
                res_maps[j][f] = p.lam * partial
    psi = KernelFunction.from_coefficients(psi_maps) if any(psi_maps) else KernelFunction.zero(k.d)
    residual_kernel = (
        KernelFunction.from_coefficients(res_maps) if any(res_maps) else KernelFunction.zero(k.d)
    )
    residual = residual_kernel.sup_norm()
    # sampled kernels: the tail of unstored frequencies is not represented by psi
    if not k.is_trig_polynomial:
        residual += k.coeff_error * 2 * k.freqs.size
        if k.decay_bound is not None:
            residual += 2 * k.decay_bound / (2 * np.pi) ** 3 / (2 * max(top, 1) ** 2)
    constant = np.array([k.coefficient(j, 0).real for j in range(k.d)])
    ok = residual <= residual_tol
    return PsiResult(ok, psi if ok else None, float(residual), constant, residual_kernel, psi)


def perturb_to_generic(k: KernelFunction, b: int, r: float, count: int | None = None) -> KernelFunction:
    """Subtract ``2 r cos(2 pi t_j x)`` from coordinate ``j`` for ``j = 1..d``."""
    count = k.d if count is None else count
    if count != k.d:
        raise ValueError(f"count must equal d={k.d}")
    ts = lacunary_indices(b, count)
    maps = k.coefficient_maps()
    for j, t in enumerate(ts):
        maps[j][t] = maps[j].get(t, 0) - r
    return KernelFunction.from_coefficients(maps)


class PredictedDimension(NamedTuple):
    value: float
    branch: str  # "contraction", "affine" or "critical"


def predicted_dimension(p: Params, d: int, q: int) -> PredictedDimension:
    """``min{log_{1/lam} b, 1 + (d - q)(1 + log_b lam)}`` and the active branch."""
    if not 0 <= q <= d:
        raise ValueError("need 0 <= q <= d")
    contraction = math.log(p.b) / -math.log(p.lam)
    affine = 1 + (d - q) * (1 + math.log(p.lam) / math.log(p.b))
    if math.isclose(contraction, affine, rel_tol=1e-12, abs_tol=0.0):
        return PredictedDimension(affine, "critical")
    if affine < contraction:
        return PredictedDimension(affine, "affine")
    return PredictedDimension(contraction, "contraction")
