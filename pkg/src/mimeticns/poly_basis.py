"""One-dimensional polynomial machinery.

Gauss-Lobatto-Legendre and Gauss node sets, nodal Lagrange polynomials and
the associated edge (histopolation) polynomials. Every two-dimensional
operator in the package is a tensor product of the objects defined here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GAUSS_LOBATTO = "gauss_lobatto"
GAUSS = "gauss"

_NEWTON_TOL = 1e-15
_NEWTON_MAXIT = 100


def legendre(n, x):
    """Return ``(L_n(x), L_n'(x))`` via the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p0 = np.ones_like(x)
    if n == 0:
        return p0, np.zeros_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    # derivative from L_n' = n (x L_n - L_{n-1}) / (x^2 - 1), valid off +-1
    with np.errstate(divide="ignore", invalid="ignore"):
        dp = n * (x * p1 - p0) / (x * x - 1.0)
    end = np.isclose(np.abs(x), 1.0, rtol=0.0, atol=1e-300)
    if np.any(end):
        dp = np.where(end, np.sign(x) ** (n + 1) * n * (n + 1) / 2.0, dp)
    return p1, dp


@dataclass(frozen=True)
class NodeSet:
    """Quadrature/interpolation nodes on the reference interval [-1, 1]."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def __len__(self):
        return len(self.nodes)


def _symmetrize(x):
    return 0.5 * (x - x[::-1])


def gll_nodes(p: int) -> NodeSet:
    """Gauss-Lobatto-Legendre nodes and weights for polynomial degree ``p``.

    The ``p + 1`` nodes are the roots of ``(1 - x**2) L_p'(x)``.
    """
    if int(p) != p or p < 1:
        raise ValueError(f"Gauss-Lobatto degree must be an integer >= 1, got {p!r}")
    p = int(p)
    x = -np.cos(np.pi * np.arange(p + 1) / p)
    if p > 1:
        xi = x[1:-1].copy()
        for _ in range(_NEWTON_MAXIT):
            lp, dlp = legendre(p, xi)
            # (1 - x^2) L'' = 2 x L' - p (p + 1) L
            d2lp = (2.0 * xi * dlp - p * (p + 1) * lp) / (1.0 - xi * xi)
            step = dlp / d2lp
            xi = xi - step
            if np.max(np.abs(step)) <= _NEWTON_TOL:
                break
        x[1:-1] = xi
    x[0], x[-1] = -1.0, 1.0
    x = _symmetrize(x)
    lp, _ = legendre(p, x)
    w = 2.0 / (p * (p + 1) * lp**2)
    return NodeSet(p, x, 0.5 * (w + w[::-1]), GAUSS_LOBATTO)


def gauss_nodes(q: int) -> NodeSet:
    """Gauss-Legendre rule with ``q`` points (roots of ``L_q``)."""
    if int(q) != q or q < 1:
        raise ValueError(f"Gauss point count must be an integer >= 1, got {q!r}")
    q = int(q)
    x = -np.cos(np.pi * (2 * np.arange(q) + 1) / (2 * q))
    for _ in range(_NEWTON_MAXIT):
        lq, dlq = legendre(q, x)
        step = lq / dlq
        x = x - step
        if np.max(np.abs(step)) <= _NEWTON_TOL:
            break
    x = _symmetrize(x)
    _, dlq = legendre(q, x)
    w = 2.0 / ((1.0 - x * x) * dlq**2)
    return NodeSet(q, x, 0.5 * (w + w[::-1]), GAUSS)


def extended_gauss_nodes(p: int) -> np.ndarray:
    """The ``p`` Gauss points of degree ``p`` with the endpoints +-1 appended.

    These are the dual-grid coordinates paired with a degree-``p``
    Gauss-Lobatto primal grid; the ``p + 1`` sub-intervals each contain
    exactly one Lobatto node.
    """
    g = gauss_nodes(p).nodes
    return np.concatenate(([-1.0], g, [1.0]))


def quadrature(f, rule: NodeSet) -> float:
    """Apply ``rule`` to ``f`` on [-1, 1]."""
    return float(np.dot(rule.weights, f(rule.nodes)))


def integrate_on(f, a, b, rule: NodeSet):
    """Integrate ``f`` over [a, b] with ``rule`` mapped affinely."""
    half = 0.5 * (b - a)
    x = a + half * (rule.nodes + 1.0)
    return half * np.dot(rule.weights, f(x))


@dataclass(frozen=True)
class Basis1D:
    """Nodal Lagrange and edge polynomials on an arbitrary ascending node set.

    ``h_i`` interpolates at the nodes; ``e_i = -sum_{k<i} h_k'`` has unit
    integral over the ``i``-th sub-interval and zero over the others.
    """

    nodes: np.ndarray
    node_set: NodeSet | None = None
    derivative_matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 2 or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be a strictly increasing 1D array of length >= 2")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "derivative_matrix", self.lagrange_derivative(nodes))

    @classmethod
    def from_node_set(cls, node_set: NodeSet) -> "Basis1D":
        return cls(np.array(node_set.nodes), node_set)

    @property
    def degree(self) -> int:
        return len(self.nodes) - 1

    def _ratios(self, x):
        # R[k, j, m] = (x_k - n_m) / (n_j - n_m) with R[:, j, j] = 1
        n = self.nodes
        diff = n[:, None] - n[None, :]
        np.fill_diagonal(diff, 1.0)
        num = x[:, None, None] - n[None, None, :]
        r = num / diff[None, :, :]
        idx = np.arange(len(n))
        r[:, idx, idx] = 1.0
        return r

    def lagrange(self, x) -> np.ndarray:
        """Values ``h_j(x_k)`` as an array of shape ``(len(x), p + 1)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        vals = np.prod(self._ratios(x), axis=2)
        # Kronecker shortcut at the nodes
        hit = x[:, None] == self.nodes[None, :]
        rows = np.any(hit, axis=1)
        if np.any(rows):
            vals[rows] = hit[rows].astype(float)
        return vals

    def lagrange_derivative(self, x) -> np.ndarray:
        """Values ``h_j'(x_k)``, shape ``(len(x), p + 1)``.

        Leave-one-out products avoid dividing by ``x - x_m``, so nodes need
        no special treatment.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        n = self.nodes
        npts, nb = len(x), len(n)
        r = self._ratios(x)
        diff = n[:, None] - n[None, :]
        np.fill_diagonal(diff, np.inf)
        inv = 1.0 / diff  # inv[j, m] = 1 / (n_j - n_m), zero on the diagonal
        ones = np.ones((npts, nb, 1))
        pre = np.concatenate([ones, np.cumprod(r, axis=2)[:, :, :-1]], axis=2)
        suf = np.concatenate([np.cumprod(r[:, :, ::-1], axis=2)[:, :, -2::-1], ones], axis=2)
        loo = pre * suf  # product over m != k
        return np.einsum("xjk,jk->xj", loo, inv)

    def edge(self, x) -> np.ndarray:
        """Values ``e_i(x_k)`` for ``i = 1..p``, shape ``(len(x), p)``."""
        dh = self.lagrange_derivative(x)
        return -np.cumsum(dh[:, :-1], axis=1)

    def lagrange_eval(self, i: int, xi: float) -> float:
        if not 0 <= i <= self.degree:
            raise IndexError(f"nodal index {i} outside 0..{self.degree}")
        return float(self.lagrange([xi])[0, i])

    def edge_eval(self, i: int, xi: float) -> float:
        """Edge polynomial ``e_i`` with the 1-based index ``i`` in ``1..p``."""
        if not 1 <= i <= self.degree:
            raise IndexError(f"edge index {i} outside 1..{self.degree}")
        return float(self.edge([xi])[0, i - 1])


def lagrange_eval(basis: Basis1D, i: int, xi: float) -> float:
    return basis.lagrange_eval(i, xi)


def edge_eval(basis: Basis1D, i: int, xi: float) -> float:
    return basis.edge_eval(i, xi)


def histopolation_matrix(basis: Basis1D, nquad: int | None = None) -> np.ndarray:
    """``A[k, i] = integral of e_(i+1) over sub-interval k``; the identity in exact arithmetic."""
    rule = gauss_nodes(nquad or basis.degree + 2)
    n = basis.nodes
    out = np.empty((basis.degree, basis.degree))
    for k in range(basis.degree):
        half = 0.5 * (n[k + 1] - n[k])
        x = n[k] + half * (rule.nodes + 1.0)
        out[k] = half * rule.weights @ basis.edge(x)
    return out
