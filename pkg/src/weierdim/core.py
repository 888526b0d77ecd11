"""Parameters, symbol streams, kernel functions and the series-defined maps.

Everything here evaluates truncations of infinite series in double precision.
Truncation lengths come from explicit geometric tail bounds, so each
evaluation carries a known absolute error budget (see `TruncationBudget`).

Conventions
-----------
* A kernel ``phi`` is a Z-periodic map R -> R^d stored as a finite Fourier
  series per coordinate.  Vector-valued results have a trailing axis of
  length ``d``.
* Arguments ``b**n * x`` are reduced mod 1 exactly: ``x`` is first rounded to
  the grid ``2**-53`` and the orbit is computed with wrapping uint64
  arithmetic, so no precision is lost however large ``n`` gets.
* Series are summed smallest term first (``n`` descending).
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "InvalidKernelError",
    "Params",
    "TruncationBudget",
    "Word",
    "SymbolStream",
    "KernelFunction",
    "hat_level",
    "eval_phi",
    "eval_phi_deriv",
    "eval_W",
    "eval_Y",
    "eval_Gamma",
    "eval_flow_projection",
    "g_apply",
    "T_apply",
    "transform_residual",
    "flatten_graph",
    "frac_orbit",
    "check_orthonormal",
    "ConfigError",
    "KernelConfig",
    "parse_kernel_config",
    "format_kernel_config",
    "kernel_config",
]

_GRID_BITS = 53
_GRID = float(2**_GRID_BITS)
_GRID_MASK = np.uint64(2**_GRID_BITS - 1)
_IMAG_TOL = 1e-12
_CHUNK = 1 << 15


class InvalidKernelError(ValueError):
    """Raised when coefficients do not describe a real-valued periodic kernel."""


@dataclass(frozen=True)
class Params:
    """Base ``b`` and contraction ``lam`` of the Weierstrass series."""

    b: int
    lam: float

    def __post_init__(self):
        if int(self.b) != self.b or self.b < 2:
            raise ValueError(f"b must be an integer >= 2, got {self.b!r}")
        object.__setattr__(self, "b", int(self.b))
        object.__setattr__(self, "lam", float(self.lam))
        if not (1.0 / self.b < self.lam < 1.0):
            raise ValueError(f"lambda must lie in (1/b, 1) = ({1 / self.b}, 1), got {self.lam!r}")

    @property
    def gamma(self) -> float:
        return 1.0 / (self.b * self.lam)


def hat_level(p: Params, n: int) -> int:
    """Return the unique integer ``m`` with ``lam**m <= b**-n < lam**(m-1)``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 0
    # log-space first guess, then fix up against the defining inequalities
    m = math.ceil(n * math.log(p.b) / -math.log(p.lam))
    target = float(p.b) ** (-n)
    while p.lam**m > target:
        m += 1
    while m > 0 and p.lam ** (m - 1) <= target:
        m -= 1
    return m


class Word(tuple):
    """Finite word over the digit alphabet ``{0, ..., b-1}``."""

    def __new__(cls, digits: Iterable[int] = ()):
        digits = tuple(int(i) for i in digits)
        if any(i < 0 for i in digits):
            raise ValueError("digits must be nonnegative")
        return super().__new__(cls, digits)

    def star(self) -> "Word":
        """The reversed word ``i_n ... i_1``."""
        return Word(reversed(self))

    def check(self, b: int) -> None:
        if any(i >= b for i in self):
            raise ValueError(f"word {tuple(self)} has digits outside [0, {b})")


def _primitive_cycle(cycle: tuple) -> tuple:
    n = len(cycle)
    for p in range(1, n + 1):
        if n % p == 0 and cycle[:p] * (n // p) == cycle:
            return cycle[:p]
    return cycle


@dataclass(frozen=True)
class SymbolStream:
    """Eventually periodic element ``prefix + cycle + cycle + ...`` of Sigma.

    Stored in canonical form (primitive cycle, shortest prefix) so that
    equality of the dataclass fields is digitwise equality of the streams.
    """

    prefix: tuple = ()
    cycle: tuple = (0,)

    def __post_init__(self):
        prefix = tuple(int(i) for i in self.prefix)
        cycle = tuple(int(i) for i in self.cycle)
        if not cycle:
            raise ValueError("cycle must be nonempty")
        if any(i < 0 for i in prefix + cycle):
            raise ValueError("digits must be nonnegative")
        cycle = _primitive_cycle(cycle)
        while prefix and prefix[-1] == cycle[-1]:
            prefix = prefix[:-1]
            cycle = cycle[-1:] + cycle[:-1]
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "cycle", cycle)

    def digits(self, n: int) -> np.ndarray:
        """First ``n`` digits ``j_1 .. j_n`` as an int array."""
        p = len(self.prefix)
        if n <= p:
            return np.asarray(self.prefix[:n], dtype=np.int64)
        reps = -(-(n - p) // len(self.cycle))
        out = self.prefix + self.cycle * reps
        return np.asarray(out[:n], dtype=np.int64)

    def prepend(self, word: Sequence[int]) -> "SymbolStream":
        """The concatenation ``word + self``."""
        return SymbolStream(tuple(word) + self.prefix, self.cycle)

    def check(self, b: int) -> None:
        if any(i >= b for i in self.prefix + self.cycle):
            raise ValueError(f"stream has digits outside [0, {b})")

    @classmethod
    def random(cls, b: int, length: int, rng: np.random.Generator) -> "SymbolStream":
        """Uniform random prefix of ``length`` digits padded with zeros."""
        return cls(tuple(int(i) for i in rng.integers(0, b, size=length)), (0,))


@dataclass(frozen=True, eq=False)
class KernelFunction:
    """Z-periodic kernel ``phi: R -> R^d`` given by a finite Fourier series.

    Only the nonnegative frequencies are stored; ``a_{-m} = conj(a_m)`` is
    implied.  ``amps[j, i]`` is the coefficient of coordinate ``j`` at
    frequency ``freqs[i]``.

    ``coeff_error`` and ``decay_bound`` are set for kernels ingested from
    samples: the former bounds the error of every stored coefficient, the
    latter is a bound ``C`` with ``|a_m| <= C / (2 pi |m|)**3`` used for the
    unstored high frequencies.  Both are zero / ``None`` for exact
    trigonometric polynomials.
    """

    freqs: np.ndarray
    amps: np.ndarray
    coeff_error: float = 0.0
    decay_bound: float | None = None
    _l1: tuple = field(init=False, repr=False)

    def __post_init__(self):
        freqs = np.array(self.freqs, dtype=np.int64).reshape(-1)
        amps = np.array(self.amps, dtype=np.complex128)
        if amps.ndim != 2 or amps.shape[1] != freqs.size:
            raise ValueError("amps must have shape (d, len(freqs))")
        if amps.shape[0] < 1:
            raise ValueError("kernel needs at least one coordinate")
        if np.any(freqs < 0) or np.unique(freqs).size != freqs.size:
            raise ValueError("freqs must be distinct nonnegative integers")
        order = np.argsort(freqs)
        freqs, amps = freqs[order], amps[:, order]
        if freqs.size and freqs[0] == 0:
            if np.any(np.abs(amps[:, 0].imag) > _IMAG_TOL):
                raise InvalidKernelError("a_0 must be real for a real-valued kernel")
            amps[:, 0] = amps[:, 0].real
        freqs.setflags(write=False)
        amps.setflags(write=False)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "amps", amps)
        object.__setattr__(self, "_l1", None)

    # construction -------------------------------------------------------

    @classmethod
    def from_coefficients(cls, coeffs: Sequence[Mapping[int, complex]], **kw) -> "KernelFunction":
        """Build a kernel from per-coordinate maps ``frequency -> a_m``.

        Negative frequencies may be supplied; they must then be the complex
        conjugates of their positive partners.
        """
        d = len(coeffs)
        merged: list[dict[int, complex]] = []
        for j, cmap in enumerate(coeffs):
            pos: dict[int, complex] = {}
            for m, a in cmap.items():
                m, a = int(m), complex(a)
                if m == 0 and abs(a.imag) > _IMAG_TOL:
                    raise InvalidKernelError(f"coordinate {j + 1}: a_0 = {a} is not real")
                if m >= 0:
                    pos[m] = pos.get(m, 0) + a
            for m, a in cmap.items():
                m, a = int(m), complex(a)
                if m < 0:
                    partner = pos.get(-m)
                    if partner is None:
                        pos[-m] = a.conjugate()
                    elif abs(partner - a.conjugate()) > _IMAG_TOL * max(1.0, abs(a)):
                        raise InvalidKernelError(
                            f"coordinate {j + 1}: a_{m} is not the conjugate of a_{-m}"
                        )
            merged.append(pos)
        freqs = sorted(set().union(*[set(c) for c in merged])) if d else []
        amps = np.zeros((d, len(freqs)), dtype=np.complex128)
        for j, pos in enumerate(merged):
            for i, m in enumerate(freqs):
                amps[j, i] = pos.get(m, 0.0)
        return cls(np.asarray(freqs, dtype=np.int64), amps, **kw)

    @classmethod
    def cosine(cls, amplitude: float = 1.0, freq: int = 1) -> "KernelFunction":
        """``amplitude * cos(2 pi freq x)``, d = 1."""
        return cls.from_coefficients([{freq: amplitude / 2}])

    @classmethod
    def zero(cls, d: int = 1) -> "KernelFunction":
        return cls(np.zeros(0, dtype=np.int64), np.zeros((d, 0)))

    @classmethod
    def complex_exponential(cls) -> "KernelFunction":
        """``e^{2 pi i x}`` viewed as ``(cos 2 pi x, sin 2 pi x)``."""
        return cls.from_coefficients([{1: 0.5}, {1: -0.5j}])

    # basic properties ---------------------------------------------------

    @property
    def d(self) -> int:
        return self.amps.shape[0]

    @property
    def max_freq(self) -> int:
        nz = np.flatnonzero(np.any(self.amps != 0, axis=0))
        return int(self.freqs[nz[-1]]) if nz.size else 0

    @property
    def is_trig_polynomial(self) -> bool:
        return self.coeff_error == 0.0 and self.decay_bound is None

    def coefficient(self, j: int, m: int) -> complex:
        """``a_m(phi_j)`` for 0-based coordinate ``j`` and any integer ``m``."""
        hit = np.flatnonzero(self.freqs == abs(m))
        if not hit.size:
            return 0j
        a = complex(self.amps[j, hit[0]])
        return a.conjugate() if m < 0 else a

    def coefficient_maps(self) -> list[dict[int, complex]]:
        """Nonzero coefficients per coordinate, nonnegative frequencies only."""
        return [
            {int(m): complex(a) for m, a in zip(self.freqs, row) if a != 0}
            for row in self.amps
        ]

    def is_constant(self) -> bool:
        mask = self.freqs != 0
        return not np.any(self.amps[:, mask] != 0)

    def sup_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-coordinate l1 bounds on ``|phi_j|`` and ``|phi_j'|``."""
        if self._l1 is None:
            absa = np.abs(self.amps)
            w = np.where(self.freqs == 0, 1.0, 2.0)
            s0 = absa @ w
            s1 = absa @ (w * 2 * np.pi * self.freqs)
            object.__setattr__(self, "_l1", (s0, s1))
        return self._l1

    def sup_norm(self) -> float:
        return float(np.max(self.sup_bounds()[0])) if self.d else 0.0

    def deriv_sup_norm(self) -> float:
        return float(np.max(self.sup_bounds()[1])) if self.d else 0.0

    # transformations ----------------------------------------------------

    def linear_map(self, M: np.ndarray) -> "KernelFunction":
        """The kernel ``x -> M @ phi(x)`` for a real matrix ``M`` (rows = new coords)."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.shape[1] != self.d:
            raise ValueError(f"matrix has {M.shape[1]} columns, kernel has d={self.d}")
        return KernelFunction(self.freqs, M @ self.amps, self.coeff_error, self.decay_bound)

    def __add__(self, other: "KernelFunction") -> "KernelFunction":
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        maps = self.coefficient_maps()
        for j, cmap in enumerate(other.coefficient_maps()):
            for m, a in cmap.items():
                maps[j][m] = maps[j].get(m, 0) + a
        return KernelFunction.from_coefficients(maps)

    def scaled(self, c: float) -> "KernelFunction":
        return self.linear_map(c * np.eye(self.d))

    def dilated(self, k: int) -> "KernelFunction":
        """The kernel ``x -> phi(k x)`` for a positive integer ``k``."""
        return KernelFunction(self.freqs * int(k), self.amps, self.coeff_error, self.decay_bound)

    # evaluation -----------------------------------------------------------

    def _synth(self, u: np.ndarray, amps: np.ndarray) -> np.ndarray:
        """Real part of ``sum_m c_m e^{2 pi i m u}`` with the conjugate half folded in."""
        u = np.asarray(u, dtype=float)
        flat = u.reshape(-1)
        out = np.empty((flat.size, self.d))
        w = np.where(self.freqs == 0, 1.0, 2.0)
        for s in range(0, flat.size, _CHUNK):
            x = flat[s : s + _CHUNK]
            # reduce m*x mod 1 before multiplying by 2 pi
            ang = np.multiply.outer(x, self.freqs.astype(float))
            ang -= np.floor(ang)
            ang *= 2 * np.pi
            c, sn = np.cos(ang), np.sin(ang)
            out[s : s + _CHUNK] = c @ (w * amps.real).T - sn @ (w * amps.imag).T
        return out.reshape(u.shape + (self.d,))

    def __call__(self, x) -> np.ndarray:
        return self._synth(x, self.amps)

    def derivative(self, x, order: int = 1) -> np.ndarray:
        factor = (2j * np.pi * self.freqs) ** order
        return self._synth(x, self.amps * factor)

    def increment(self, u, delta) -> np.ndarray:
        """``phi(u + delta) - phi(u)`` without cancellation for small ``delta``.

        Uses ``e^{i t} - 1 = 2 i sin(t/2) e^{i t / 2}`` termwise, so the result
        has small relative error even when ``delta`` is tiny.
        """
        u, delta = np.broadcast_arrays(np.asarray(u, float), np.asarray(delta, float))
        shape = u.shape
        u, delta = u.reshape(-1), delta.reshape(-1)
        out = np.empty((u.size, self.d))
        w = np.where(self.freqs == 0, 0.0, 2.0)
        fr = self.freqs.astype(float)
        for s in range(0, u.size, _CHUNK):
            uu, dd = u[s : s + _CHUNK], delta[s : s + _CHUNK]
            mid = np.multiply.outer(uu + dd / 2, fr)
            mid -= np.floor(mid)
            half = np.sin(np.pi * np.multiply.outer(dd, fr))
            # 2 i sin(pi m delta) e^{2 pi i m mid}
            re = -2 * half * np.sin(2 * np.pi * mid)
            im = 2 * half * np.cos(2 * np.pi * mid)
            out[s : s + _CHUNK] = re @ (w * self.amps.real).T - im @ (w * self.amps.imag).T
        return out.reshape(shape + (self.d,))


@dataclass(frozen=True)
class TruncationBudget:
    """Term counts for the W and Y/Gamma series and the tolerance they meet."""

    n_W: int
    n_Y: int
    tol: float

    @classmethod
    def for_kernel(cls, p: Params, k: KernelFunction, tol: float = 1e-10) -> "TruncationBudget":
        if tol <= 0:
            raise ValueError("tol must be positive")
        return cls(
            _tail_terms(k.sup_norm(), p.lam, tol),
            _tail_terms(k.deriv_sup_norm(), p.gamma, tol),
            float(tol),
        )

    def satisfies(self, p: Params, k: KernelFunction) -> bool:
        w_tail = k.sup_norm() * p.lam ** (self.n_W + 1) / (1 - p.lam)
        y_tail = k.deriv_sup_norm() * p.gamma ** (self.n_Y + 1) / (1 - p.gamma)
        return w_tail <= self.tol and y_tail <= self.tol

    def doubled(self) -> "TruncationBudget":
        return TruncationBudget(2 * self.n_W, 2 * self.n_Y, self.tol)


def _tail_terms(norm: float, rate: float, tol: float) -> int:
    """Smallest ``n >= 0`` with ``norm * rate**(n+1) / (1 - rate) <= tol``."""
    if norm == 0:
        return 0
    n = max(0, math.ceil(math.log(tol * (1 - rate) / norm) / math.log(rate)) - 1)
    while norm * rate ** (n + 1) / (1 - rate) > tol:
        n += 1
    return n


def _budget(p: Params, k: KernelFunction, tb: TruncationBudget | None) -> TruncationBudget:
    return tb if tb is not None else TruncationBudget.for_kernel(p, k)


def frac_orbit(x, b: int, n: int) -> np.ndarray:
    """``b**n * x mod 1`` computed exactly on the ``2**-53`` grid."""
    x = np.asarray(x, dtype=float)
    r = x - np.floor(x)
    m0 = np.round(r * _GRID).astype(np.uint64)
    bn = np.uint64(pow(int(b), int(n), 1 << 64))
    with np.errstate(over="ignore"):
        prod = np.multiply(m0, bn, dtype=np.uint64)
    return (prod & _GRID_MASK).astype(float) / _GRID


def _as_points(point):
    x, y = point
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return x, y


# ---------------------------------------------------------------------------
# series evaluations


def eval_phi(k: KernelFunction, x) -> np.ndarray:
    return k(x)


def eval_phi_deriv(k: KernelFunction, x, order: int = 1) -> np.ndarray:
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return k.derivative(x, order)


def eval_W(p: Params, k: KernelFunction, x, tb: TruncationBudget | None = None) -> np.ndarray:
    """Truncated Weierstrass sum ``sum_{n <= n_W} lam**n phi(b**n x)``."""
    tb = _budget(p, k, tb)
    x = np.asarray(x, dtype=float)
    acc = np.zeros(x.shape + (k.d,))
    for n in range(tb.n_W, -1, -1):
        acc += p.lam**n * k(frac_orbit(x, p.b, n))
    return acc


def _stream_anchors(p: Params, j: SymbolStream, n: int) -> np.ndarray:
    """``u_k = (j_1 + j_2 b + ... + j_k b^{k-1}) / b^k`` for k = 1..n."""
    j.check(p.b)
    digits = j.digits(n)
    out = np.empty(n)
    u = 0.0
    for i, jd in enumerate(digits):
        u = (u + jd) / p.b
        out[i] = u
    return out


def eval_Y(p: Params, k: KernelFunction, x, j: SymbolStream, tb: TruncationBudget | None = None) -> np.ndarray:
    """Stable slope field ``Y(x, j) = -sum_{n>=1} gamma^n phi'((x + c_n) / b^n)``."""
    tb = _budget(p, k, tb)
    x = np.asarray(x, dtype=float)
    anchors = _stream_anchors(p, j, tb.n_Y)
    acc = np.zeros(x.shape + (k.d,))
    for n in range(tb.n_Y, 0, -1):
        acc += p.gamma**n * k.derivative(anchors[n - 1] + x * float(p.b) ** (-n))
    return -acc


def eval_Gamma(p: Params, k: KernelFunction, x, j: SymbolStream, tb: TruncationBudget | None = None) -> np.ndarray:
    """Integral curve ``Gamma_j(x) = int_0^x Y(t, j) dt``.

    Summed termwise in closed form:
    ``Gamma_j(x) = -sum_n lam^{-n} [phi(u_n + x/b^n) - phi(u_n)]`` with the
    stream anchors ``u_n``; the bracket is evaluated by `KernelFunction.increment`.
    """
    tb = _budget(p, k, tb)
    x = np.asarray(x, dtype=float)
    anchors = _stream_anchors(p, j, tb.n_Y)
    acc = np.zeros(x.shape + (k.d,))
    for n in range(tb.n_Y, 0, -1):
        acc += p.lam ** (-n) * k.increment(anchors[n - 1], x * float(p.b) ** (-n))
    return -acc


def eval_flow_projection(p: Params, k: KernelFunction, j: SymbolStream, point, tb: TruncationBudget | None = None) -> np.ndarray:
    """Flow projection ``pi_j(x, y) = y - Gamma_j(x)``."""
    x, y = _as_points(point)
    return y - eval_Gamma(p, k, x, j, tb)


def g_apply(p: Params, k: KernelFunction, w: Sequence[int], point):
    """Apply ``g_w = g_{w_1} o ... o g_{w_n}`` (last digit acts first)."""
    w = Word(w)
    w.check(p.b)
    x, y = _as_points(point)
    for i in reversed(w):
        x = (x + i) / p.b
        y = p.lam * y + k(x)
    return x, y


def T_apply(p: Params, k: KernelFunction, point):
    """Expanding map ``T(x, y) = (b x mod 1, (y - phi(x)) / lam)``."""
    x, y = _as_points(point)
    xn = np.mod(p.b * x, 1.0)
    xn = np.where(xn >= 1.0, 0.0, xn)
    return xn, (y - k(x)) / p.lam


def transform_residual(p: Params, k: KernelFunction, w: Sequence[int], j: SymbolStream, samples, tb: TruncationBudget | None = None) -> float:
    """Max violation of ``pi_j g_w(x,y) = lam^|w| pi_{w* j}(x,y) + pi_j g_w(0,0)``."""
    tb = _budget(p, k, tb)
    w = Word(w)
    x, y = _as_points(samples)
    if y.ndim == x.ndim:
        y = y[..., None]
    lhs = eval_flow_projection(p, k, j, g_apply(p, k, w, (x, y)), tb)
    origin = g_apply(p, k, w, (np.zeros(1), np.zeros((1, k.d))))
    shift = eval_flow_projection(p, k, j, origin, tb)[0]
    rhs = p.lam ** len(w) * eval_flow_projection(p, k, j.prepend(w.star()), (x, y), tb) + shift
    return float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0


def check_orthonormal(basis, d: int, atol: float = 1e-10) -> np.ndarray:
    """Validate and return ``basis`` as a (q, d) array with orthonormal rows."""
    B = np.asarray(basis, dtype=float)
    if B.size == 0:
        return np.zeros((0, d))
    B = np.atleast_2d(B)
    if B.shape[1] != d:
        raise ValueError(f"basis vectors must have length {d}")
    if not np.allclose(B @ B.T, np.eye(B.shape[0]), atol=atol):
        raise ValueError("basis rows are not orthonormal")
    return B


def flatten_graph(p: Params, k: KernelFunction, V_basis, x, tb: TruncationBudget | None = None) -> np.ndarray:
    """``F(x, W(x)) = (x, W^phi(x) - W^{pi_V phi}(x))`` as points in R^{1+d}.

    ``W^{pi_V phi}`` is evaluated as its own Weierstrass series with the
    projected kernel, not by projecting ``W^phi``.
    """
    B = check_orthonormal(V_basis, k.d)
    tb = _budget(p, k, tb)
    x = np.asarray(x, dtype=float)
    kv = k.linear_map(B.T @ B)
    tbv = TruncationBudget(max(tb.n_W, TruncationBudget.for_kernel(p, kv, tb.tol).n_W), tb.n_Y, tb.tol)
    y = eval_W(p, k, x, tb) - eval_W(p, kv, x, tbv)
    return np.concatenate([x[..., None], y], axis=-1)


# ---------------------------------------------------------------------------
# kernel config text format


class ConfigError(ValueError):
    """Malformed kernel config text; the message names the offending line."""


@dataclass(frozen=True)
class KernelConfig:
    """Parsed kernel config: dimension, base, optional lambda and coefficients."""

    d: int
    b: int
    coeffs: tuple  # per coordinate: tuple of (m, complex a_m), m >= 0, sorted
    lam: float | None = None

    def kernel(self) -> KernelFunction:
        return KernelFunction.from_coefficients([dict(c) for c in self.coeffs])

    def params(self, lam: float | None = None) -> Params:
        lam = self.lam if lam is None else lam
        if lam is None:
            raise ConfigError("no lambda given in config or on the command line")
        return Params(self.b, float(lam))

    def coefficient_maps(self) -> list[dict[int, complex]]:
        return [dict(c) for c in self.coeffs]


def _number(tok: str, lineno: int) -> float:
    try:
        return float(Fraction(tok))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"line {lineno}: cannot read number {tok!r}") from None


def _int(tok: str, lineno: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ConfigError(f"line {lineno}: {what} must be an integer, got {tok!r}") from None


def parse_kernel_config(text: str) -> KernelConfig:
    """Read the kernel config format.

    Lines are ``d=<int>``, ``b=<int>``, an optional ``lambda=<number>``, and
    ``coeff <coord j >= 1> <freq m >= 0> <re> <im>``.  ``#`` starts a comment.
    Numbers may be decimals or rationals ``p/q``.

    Raises
    ------
    ConfigError
        For any malformed line, with its line number.
    InvalidKernelError
        For a parsable config that does not define a real kernel.
    """
    head: dict[str, str] = {}
    entries: list[tuple[int, int, int, complex]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line and not line.startswith("coeff"):
            key, _, val = (s.strip() for s in line.partition("="))
            if key not in ("d", "b", "lambda"):
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in head:
                raise ConfigError(f"line {lineno}: {key} given twice")
            head[key] = (val, lineno)
            continue
        tok = line.split()
        if tok[0] != "coeff" or len(tok) != 5:
            raise ConfigError(f"line {lineno}: expected 'coeff <j> <m> <re> <im>', got {raw.strip()!r}")
        j = _int(tok[1], lineno, "coordinate")
        m = _int(tok[2], lineno, "frequency")
        if m < 0:
            raise ConfigError(f"line {lineno}: only frequencies m >= 0 are stored")
        a = complex(_number(tok[3], lineno), _number(tok[4], lineno))
        entries.append((lineno, j, m, a))
    for key in ("d", "b"):
        if key not in head:
            raise ConfigError(f"missing '{key}=' line")
    d = _int(head["d"][0], head["d"][1], "d")
    b = _int(head["b"][0], head["b"][1], "b")
    if d < 1:
        raise ConfigError(f"line {head['d'][1]}: d must be >= 1")
    if b < 2:
        raise ConfigError(f"line {head['b'][1]}: b must be >= 2")
    lam = _number(*head["lambda"]) if "lambda" in head else None
    maps: list[dict[int, complex]] = [{} for _ in range(d)]
    for lineno, j, m, a in entries:
        if not 1 <= j <= d:
            raise ConfigError(f"line {lineno}: coordinate {j} outside 1..{d}")
        if m in maps[j - 1]:
            raise ConfigError(f"line {lineno}: coefficient ({j}, {m}) given twice")
        if m == 0 and abs(a.imag) > _IMAG_TOL:
            raise InvalidKernelError(f"line {lineno}: a_0 of coordinate {j} must be real")
        maps[j - 1][m] = a
    coeffs = tuple(tuple(sorted((m, a) for m, a in c.items() if a != 0)) for c in maps)
    return KernelConfig(d, b, coeffs, lam)


def format_kernel_config(cfg: KernelConfig) -> str:
    """Inverse of `parse_kernel_config` (17 significant digits)."""
    lines = [f"d={cfg.d}", f"b={cfg.b}"]
    if cfg.lam is not None:
        lines.append(f"lambda={cfg.lam!r}")
    for j, cmap in enumerate(cfg.coeffs, start=1):
        for m, a in cmap:
            lines.append(f"coeff {j} {m} {a.real!r} {a.imag!r}")
    return "\n".join(lines) + "\n"


def kernel_config(k: KernelFunction, b: int, lam: float | None = None) -> KernelConfig:
    coeffs = tuple(tuple(sorted(c.items())) for c in k.coefficient_maps())
    return KernelConfig(k.d, b, coeffs, lam)
