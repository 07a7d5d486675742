"""Gauss-Legendre, Gauss-Lobatto, and blended quadrature rules.

Rules live on the reference interval ``[-1, 1]`` and are mapped affinely onto
mesh elements.  A blended rule combines Gauss and Lobatto with a parameter
``tau`` (the Lobatto fraction): ``tau = 0`` is plain Gauss, ``tau = 1`` plain
Lobatto, and values outside ``[0, 1]`` give non-convex blends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import eval_legendre, roots_jacobi

__all__ = [
    "Rule",
    "QuadratureSpec",
    "gauss_rule",
    "lobatto_rule",
    "blended_rule",
    "map_rule_to_element",
]

MAX_POINTS = 32


@dataclass(frozen=True)
class Rule:
    """Nodes and weights on the reference interval ``[-1, 1]``."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        nodes.flags.writeable = False
        weights.flags.writeable = False
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1d arrays of equal length")

    def integrate(self, f) -> float:
        return float(self.weights @ f(self.nodes))


def _symmetrized(nodes: np.ndarray, weights: np.ndarray) -> Rule:
    # enforce exact symmetry about 0 (kills last-bit asymmetry of the solvers)
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return Rule(nodes, weights)


def gauss_rule(n_points: int) -> Rule:
    """Gauss-Legendre rule, exact for polynomials of degree ``2 n - 1``."""
    if not 1 <= n_points <= MAX_POINTS:
        raise ValueError(f"unsupported Gauss order {n_points}")
    nodes, weights = np.polynomial.legendre.leggauss(n_points)
    return _symmetrized(nodes, weights)


def lobatto_rule(n_points: int) -> Rule:
    """Gauss-Lobatto rule with endpoint nodes, exact to degree ``2 n - 3``.

    Interior nodes are the roots of ``P'_{n-1}`` (a Jacobi(1, 1) polynomial);
    weights follow the classical formula ``2 / (n (n-1) P_{n-1}(x)^2)``.
    """
    if not 2 <= n_points <= MAX_POINTS:
        raise ValueError(f"unsupported Lobatto order {n_points}")
    n = n_points
    if n == 2:
        interior = np.empty(0)
    else:
        interior, _ = roots_jacobi(n - 2, 1.0, 1.0)
    nodes = np.concatenate([[-1.0], interior, [1.0]])
    weights = 2.0 / (n * (n - 1) * eval_legendre(n - 1, nodes) ** 2)
    return _symmetrized(nodes, weights)


def blended_rule(n_points: int, tau: float) -> Rule:
    """Affine Gauss/Lobatto combination with Lobatto fraction ``tau``.

    The node set is the union of both constituent rules with weights scaled
    by ``1 - tau`` (Gauss part) and ``tau`` (Lobatto part); shared nodes are
    kept as separate entries.  ``tau = 0`` and ``tau = 1`` return the plain
    constituent rules.  Any polynomial integral of the blend equals the same
    affine combination of the constituent integrals.
    """
    if tau == 0.0:
        return gauss_rule(n_points)
    if tau == 1.0:
        return lobatto_rule(n_points)
    g = gauss_rule(n_points)
    lo = lobatto_rule(n_points)
    nodes = np.concatenate([g.nodes, lo.nodes])
    weights = np.concatenate([(1.0 - tau) * g.weights, tau * lo.weights])
    order = np.argsort(nodes, kind="stable")
    return Rule(nodes[order], weights[order])


def map_rule_to_element(rule: Rule, a: float, b: float) -> Rule:
    """Affine image of a reference rule on ``[a, b]``; weights sum to ``b - a``."""
    if a >= b:
        raise ValueError(f"degenerate element [{a}, {b}]")
    half = 0.5 * (b - a)
    return Rule(a + half * (rule.nodes + 1.0), half * rule.weights)


@dataclass(frozen=True)
class QuadratureSpec:
    """Choice of per-element rule: ``gauss``, ``lobatto`` or ``blended``."""

    kind: str = "gauss"
    points_per_element: int | None = None
    tau: float | None = None

    def __post_init__(self):
        if self.kind not in ("gauss", "lobatto", "blended"):
            raise ValueError(f"unknown quadrature kind {self.kind!r}")
        if self.kind == "blended" and self.tau is None:
            raise ValueError("blended quadrature requires tau")

    def n_points(self, p: int) -> int:
        # default p + 1 points integrates both mass and stiffness exactly
        # with Gauss and keeps Gauss/Lobatto node counts matched in blends
        return self.points_per_element if self.points_per_element else p + 1

    def reference_rule(self, p: int) -> Rule:
        n = self.n_points(p)
        if self.kind == "gauss":
            return gauss_rule(n)
        if self.kind == "lobatto":
            return lobatto_rule(n)
        return blended_rule(n, float(self.tau))

    def label(self) -> str:
        if self.kind == "blended":
            return f"blended(tau={self.tau})"
        return self.kind
