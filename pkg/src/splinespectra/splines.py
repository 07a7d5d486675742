"""B-spline knot vectors and basis evaluation for variable-continuity meshes.

The three mesh families used throughout the package are built from a single
block layout abstraction:

* classical ``C^0`` finite elements -- every interior knot repeated ``p`` times
  (block size one),
* maximum-continuity isogeometric analysis -- all interior knots simple,
* refined isogeometric analysis (rIGA) -- ``C^{p-1}`` blocks of elements joined
  by lower-continuity separator knots of multiplicity ``p - c``.

All evaluation uses the Cox-de Boor recursion with the ``0/0 := 0`` convention
for repeated knots.  The parametric domain is fixed to ``[0, 1]`` and doubles
as the physical domain (identity geometry map).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "KnotVector",
    "BlockLayout",
    "make_open_uniform_knots",
    "make_block_knots",
    "eval_basis",
    "eval_basis_deriv",
    "greville_abscissae",
    "continuity_at",
]

_KNOT_TOL = 1e-12


@dataclass(frozen=True)
class KnotVector:
    """Non-decreasing knot sequence together with a polynomial degree.

    Parameters
    ----------
    p : int
        Polynomial degree, at least 1.
    knots : array_like
        Non-decreasing knot values.  Interior knots may be repeated up to
        multiplicity ``p``; an *open* knot vector repeats the first and last
        values ``p + 1`` times.

    Attributes
    ----------
    n : int
        Number of basis functions, ``len(knots) - p - 1``.
    """

    p: int
    knots: np.ndarray

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"degree must be >= 1, got {self.p}")
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        knots.flags.writeable = False
        if knots.ndim != 1 or knots.size < self.p + 2:
            raise ValueError("knot vector too short for the requested degree")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be non-decreasing")
        if self.n < 1:
            raise ValueError("knot vector defines an empty basis")
        for value, mult in zip(*self.unique_knots()):
            interior = knots[0] + _KNOT_TOL < value < knots[-1] - _KNOT_TOL
            if interior and mult > self.p:
                raise ValueError(
                    f"interior knot {value} has multiplicity {mult} > degree {self.p}"
                )

    @property
    def n(self) -> int:
        """Dimension of the spanned spline space."""
        return len(self.knots) - self.p - 1

    @property
    def is_open(self) -> bool:
        k = self.knots
        return bool(k[0] == k[self.p] and k[-self.p - 1] == k[-1])

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def unique_knots(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct knot values and their multiplicities."""
        values, counts = np.unique(self.knots, return_counts=True)
        return values, counts

    def spans(self) -> list[tuple[int, float, float]]:
        """Non-empty knot spans as ``(index, left, right)`` triples.

        Zero-width spans created by repeated knots carry no measure and are
        skipped.
        """
        k = self.knots
        return [
            (i, float(k[i]), float(k[i + 1]))
            for i in range(self.p, len(k) - self.p - 1)
            if k[i + 1] > k[i]
        ]

    def find_span(self, x: float) -> int:
        """Index ``i`` of the non-empty span with ``knots[i] <= x < knots[i+1]``.

        The right endpoint of the domain is clamped to the last non-empty
        span so that evaluation there returns left limits.
        """
        k = self.knots
        lo, hi = self.p, len(k) - self.p - 1
        if not (k[0] <= x <= k[-1]):
            raise ValueError(f"point {x} outside knot range [{k[0]}, {k[-1]}]")
        if x >= k[hi]:
            i = hi - 1
            while k[i + 1] <= k[i]:
                i -= 1
            return i
        i = int(np.searchsorted(k, x, side="right")) - 1
        return max(i, lo)


def _separator_positions(n_elements: int, block_size: int) -> list[int]:
    """Element indices after which a separator is inserted.

    The last block absorbs the remainder when ``block_size`` does not divide
    ``n_elements``.
    """
    n_blocks = math.ceil(n_elements / block_size)
    return [b * block_size for b in range(1, n_blocks)]


@dataclass(frozen=True)
class BlockLayout:
    """Uniform mesh of ``n_elements`` split into blocks by separator knots.

    ``separator_continuity`` is the continuity ``c`` retained at each
    separator; separators then carry knot multiplicity ``p - c``.  Choosing
    ``c = p - 1`` (or a block covering the whole mesh) reproduces plain IGA,
    while ``block_size = 1`` with ``c = 0`` reproduces ``C^0`` finite
    elements.
    """

    n_elements: int
    p: int
    block_size: int
    separator_continuity: int = 0
    bc: str = "dirichlet"

    def __post_init__(self):
        if self.n_elements < 1:
            raise ValueError("n_elements must be >= 1")
        if self.p < 1:
            raise ValueError("degree must be >= 1")
        if not 1 <= self.block_size <= self.n_elements:
            raise ValueError("block_size must lie in [1, n_elements]")
        c = self.separator_continuity
        if not 0 <= c <= self.p - 1:
            raise ValueError(
                f"separator continuity {c} outside [0, {self.p - 1}]"
            )
        if self.bc not in ("dirichlet", "neumann"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")

    @classmethod
    def iga(cls, n_elements: int, p: int, bc: str = "dirichlet") -> "BlockLayout":
        return cls(n_elements, p, block_size=n_elements,
                   separator_continuity=max(p - 1, 0) if p > 1 else 0, bc=bc)

    @classmethod
    def fea(cls, n_elements: int, p: int, bc: str = "dirichlet") -> "BlockLayout":
        return cls(n_elements, p, block_size=1, separator_continuity=0, bc=bc)

    @classmethod
    def riga(cls, n_elements: int, p: int, block_size: int,
             bc: str = "dirichlet") -> "BlockLayout":
        return cls(n_elements, p, block_size=block_size,
                   separator_continuity=0, bc=bc)

    @property
    def h(self) -> float:
        return 1.0 / self.n_elements

    @property
    def n_separators(self) -> int:
        return math.ceil(self.n_elements / self.block_size) - 1

    def separator_values(self) -> np.ndarray:
        pos = _separator_positions(self.n_elements, self.block_size)
        return np.array([p * self.h for p in pos])

    def block_bounds(self) -> list[tuple[float, float]]:
        """Block intervals ``[(a_0, b_0), ...]`` covering ``[0, 1]``."""
        edges = [0.0, *self.separator_values().tolist(), 1.0]
        return list(zip(edges[:-1], edges[1:]))

    @property
    def dim_before_bc(self) -> int:
        c = self.separator_continuity
        return self.n_elements + self.p + (self.p - 1 - c) * self.n_separators

    @property
    def n_dofs(self) -> int:
        """Basis dimension after strong boundary-condition elimination."""
        if self.bc == "dirichlet":
            return self.dim_before_bc - 2
        return self.dim_before_bc


def make_open_uniform_knots(n_elements: int, p: int) -> KnotVector:
    """Open uniform knot vector on ``[0, 1]`` with all interior knots simple.

    The resulting basis is ``C^{p-1}`` across every interior knot.
    """
    if n_elements < 1 or p < 1:
        raise ValueError("need n_elements >= 1 and p >= 1")
    interior = np.arange(1, n_elements) / n_elements
    knots = np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)])
    return KnotVector(p, knots)


def make_block_knots(layout: BlockLayout) -> KnotVector:
    """Open uniform knot vector with separator knots of multiplicity ``p - c``."""
    p = layout.p
    mult_sep = p - layout.separator_continuity
    sep = set(_separator_positions(layout.n_elements, layout.block_size))
    parts = [np.zeros(p + 1)]
    for i in range(1, layout.n_elements):
        mult = mult_sep if i in sep else 1
        parts.append(np.full(mult, i / layout.n_elements))
    parts.append(np.ones(p + 1))
    kv = KnotVector(p, np.concatenate(parts))
    assert kv.n == layout.dim_before_bc
    return kv


def _indicator(knots: np.ndarray, j: int, x: float, at_right_end: bool) -> float:
    if at_right_end:
        return 1.0 if knots[j] < x <= knots[j + 1] else 0.0
    return 1.0 if knots[j] <= x < knots[j + 1] else 0.0


def _cox_de_boor(knots: np.ndarray, i: int, degree: int, x: float) -> float:
    """Single basis value ``N_{i,degree}(x)`` for an arbitrary knot vector.

    Works at any point of ``[knots[0], knots[-1]]``; the global right
    endpoint returns the left limit.
    """
    at_end = x == knots[-1]
    vals = [_indicator(knots, j, x, at_end) for j in range(i, i + degree + 1)]
    for d in range(1, degree + 1):
        for r in range(degree - d + 1):
            j = i + r
            acc = 0.0
            den = knots[j + d] - knots[j]
            if den > 0.0:
                acc += (x - knots[j]) / den * vals[r]
            den = knots[j + d + 1] - knots[j + 1]
            if den > 0.0:
                acc += (knots[j + d + 1] - x) / den * vals[r + 1]
            vals[r] = acc
    return vals[0]


def eval_basis(kv: KnotVector, i: int, x: float) -> float:
    """Evaluate the basis function ``N_{i,p}`` at ``x``.

    Values are non-negative, vanish outside ``[knots[i], knots[i+p+1]]``, and
    the functions of an open knot vector sum to one everywhere on the domain.
    At the right endpoint the left limit is returned, so the last basis
    function of an open vector evaluates to 1 there.

    Raises
    ------
    IndexError
        If ``i`` is not a valid basis index.
    ValueError
        If ``x`` lies outside the knot range.
    """
    if not 0 <= i < kv.n:
        raise IndexError(f"basis index {i} outside [0, {kv.n})")
    if not (kv.knots[0] <= x <= kv.knots[-1]):
        raise ValueError(f"point {x} outside knot range")
    return _cox_de_boor(kv.knots, i, kv.p, x)


def eval_basis_deriv(kv: KnotVector, i: int, x: float) -> float:
    """First derivative ``dN_{i,p}/dx`` via the degree-reduction formula.

    At interior repeated knots the one-sided derivative from the right is
    returned (from the left at the final knot), matching the half-open-span
    convention of :func:`eval_basis`.
    """
    if not 0 <= i < kv.n:
        raise IndexError(f"basis index {i} outside [0, {kv.n})")
    if not (kv.knots[0] <= x <= kv.knots[-1]):
        raise ValueError(f"point {x} outside knot range")
    t, p = kv.knots, kv.p
    out = 0.0
    den = t[i + p] - t[i]
    if den > 0.0:
        out += p / den * _cox_de_boor(t, i, p - 1, x)
    den = t[i + p + 1] - t[i + 1]
    if den > 0.0:
        out -= p / den * _cox_de_boor(t, i + 1, p - 1, x)
    return out


def span_basis_rows(kv: KnotVector, span: int, xs: np.ndarray,
                    derivs: bool = False):
    """Values of the ``p + 1`` basis functions active on a span.

    Evaluates the polynomial pieces attached to ``span`` at all points
    ``xs`` (vectorized), which also yields correct one-sided values when a
    point sits exactly on the span boundary.  Returns ``(first, N)`` or
    ``(first, N, dN)`` where ``first = span - p`` is the index of the first
    active function and the arrays have shape ``(len(xs), p + 1)``.
    """
    t, p = kv.knots, kv.p
    xs = np.asarray(xs, dtype=float)
    m = xs.shape[0]
    N = np.zeros((m, p + 1))
    N[:, 0] = 1.0
    left = np.empty((m, p + 1))
    right = np.empty((m, p + 1))
    lower = None
    for j in range(1, p + 1):
        if derivs and j == p:
            lower = N[:, :p].copy()
        left[:, j] = xs - t[span + 1 - j]
        right[:, j] = t[span + j] - xs
        saved = np.zeros(m)
        for r in range(j):
            den = right[:, r + 1] + left[:, j - r]
            temp = N[:, r] / den
            N[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        N[:, j] = saved
    first = span - p
    if not derivs:
        return first, N
    dN = np.zeros((m, p + 1))
    if p >= 1:
        for r in range(p + 1):
            i = first + r
            if r >= 1:
                den = t[i + p] - t[i]
                if den > 0.0:
                    dN[:, r] += p / den * lower[:, r - 1]
            if r <= p - 1:
                den = t[i + p + 1] - t[i + 1]
                if den > 0.0:
                    dN[:, r] -= p / den * lower[:, r]
    return first, N, dN


def greville_abscissae(kv: KnotVector) -> np.ndarray:
    """Knot averages ``(knots[i+1] + ... + knots[i+p]) / p`` for each function.

    These locate the control points of the basis; clustering near the domain
    boundaries and separators is what makes the extra high-frequency modes
    appear there.
    """
    c = np.cumsum(np.concatenate([[0.0], kv.knots]))
    return (c[kv.p + 1:kv.p + 1 + kv.n] - c[1:kv.n + 1]) / kv.p


def knot_multiplicity(kv: KnotVector, value: float) -> int:
    return int(np.sum(np.abs(kv.knots - value) <= _KNOT_TOL))


def continuity_at(kv: KnotVector, value: float) -> int:
    """Continuity order ``p - m`` of the basis at a knot of multiplicity ``m``.

    Returns ``-1`` at open ends (multiplicity ``p + 1``), meaning the basis is
    discontinuous if extended past the domain.

    Raises
    ------
    ValueError
        If ``value`` is not a knot.
    """
    m = knot_multiplicity(kv, value)
    if m == 0:
        raise ValueError(f"{value} is not a knot of this vector")
    return kv.p - m
