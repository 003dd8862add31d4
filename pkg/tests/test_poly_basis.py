import math

import numpy as np
import pytest
import sympy as sym
from hypothesis import given, settings
from hypothesis import strategies as st

from mimeticns.poly_basis import (GAUSS, GAUSS_LOBATTO, Basis1D, edge_eval, extended_gauss_nodes,
                                  gauss_nodes, gll_nodes, histopolation_matrix, lagrange_eval,
                                  quadrature)


def sympy_gll(p, digits=30):
    """Independent oracle: roots of (1 - x^2) L_p'(x) in extended precision."""
    x = sym.Symbol("x")
    dl = sym.diff(sym.legendre(p, x), x)
    roots = sorted(sym.Poly(dl, x).nroots(n=digits)) if p > 1 else []
    nodes = [-1] + [sym.re(r) for r in roots] + [1]
    w = [2 / (p * (p + 1) * sym.legendre(p, r) ** 2) for r in nodes]
    return np.array([float(n) for n in nodes]), np.array([float(v) for v in w])


def test_gll_p1():
    ns = gll_nodes(1)
    np.testing.assert_array_equal(ns.nodes, [-1.0, 1.0])
    np.testing.assert_allclose(ns.weights, [1.0, 1.0], atol=1e-15)
    assert ns.kind == GAUSS_LOBATTO


def test_gll_p2_closed_form():
    ns = gll_nodes(2)
    np.testing.assert_allclose(ns.nodes, [-1.0, 0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(ns.weights, [1 / 3, 4 / 3, 1 / 3], atol=1e-15)


def test_gll_p3_closed_form():
    ns = gll_nodes(3)
    r = 1 / math.sqrt(5)
    np.testing.assert_allclose(ns.nodes, [-1, -r, r, 1], atol=1e-15)
    np.testing.assert_allclose(ns.weights, [1 / 6, 5 / 6, 5 / 6, 1 / 6], atol=1e-15)


@pytest.mark.parametrize("p", [4, 5, 8, 12, 16])
def test_gll_against_extended_precision(p):
    nodes, weights = sympy_gll(p)
    ns = gll_nodes(p)
    np.testing.assert_allclose(ns.nodes, nodes, atol=1e-14)
    np.testing.assert_allclose(ns.weights, weights, atol=1e-14)


def test_gll_rejects_zero():
    with pytest.raises(ValueError):
        gll_nodes(0)


@pytest.mark.parametrize("p", range(1, 21))
def test_gll_invariants(p):
    ns = gll_nodes(p)
    assert len(ns) == p + 1
    assert ns.nodes[0] == -1.0 and ns.nodes[-1] == 1.0
    assert np.all(np.diff(ns.nodes) > 0)
    np.testing.assert_allclose(ns.nodes, -ns.nodes[::-1], atol=1e-13)
    assert abs(ns.weights.sum() - 2.0) < 1e-13
    assert np.all(ns.weights > 0)


@pytest.mark.parametrize("q", range(1, 21))
def test_gauss_matches_numpy(q):
    x, w = np.polynomial.legendre.leggauss(q)
    ns = gauss_nodes(q)
    assert ns.kind == GAUSS
    np.testing.assert_allclose(ns.nodes, x, atol=1e-14)
    np.testing.assert_allclose(ns.weights, w, atol=1e-14)
    assert not np.any(np.abs(ns.nodes) == 1.0)
    assert abs(ns.weights.sum() - 2.0) < 1e-13


def test_gauss_closed_forms():
    np.testing.assert_allclose(gauss_nodes(1).nodes, [0.0])
    np.testing.assert_allclose(gauss_nodes(1).weights, [2.0])
    r = 1 / math.sqrt(3)
    np.testing.assert_allclose(gauss_nodes(2).nodes, [-r, r], atol=1e-15)
    np.testing.assert_allclose(gauss_nodes(2).weights, [1, 1], atol=1e-15)
    r = math.sqrt(3 / 5)
    np.testing.assert_allclose(gauss_nodes(3).nodes, [-r, 0, r], atol=1e-15)
    np.testing.assert_allclose(gauss_nodes(3).weights, [5 / 9, 8 / 9, 5 / 9], atol=1e-15)


def test_extended_gauss():
    x = extended_gauss_nodes(3)
    assert len(x) == 5 and x[0] == -1.0 and x[-1] == 1.0
    # each dual interval holds exactly one Lobatto node
    gll = gll_nodes(3).nodes
    counts = [np.sum((gll >= a) & (gll <= b)) for a, b in zip(x[:-1], x[1:])]
    assert counts == [1] * 4


def test_quadrature_examples():
    for rule in (gauss_nodes(3), gll_nodes(4)):
        assert quadrature(np.ones_like, rule) == pytest.approx(2.0, abs=1e-14)
        assert quadrature(lambda x: x**3, rule) == pytest.approx(0.0, abs=1e-15)
    assert quadrature(lambda x: x**2, gauss_nodes(2)) == pytest.approx(2 / 3, abs=1e-15)


@given(st.integers(1, 10), st.lists(st.floats(-1, 1), min_size=1, max_size=22))
@settings(max_examples=50, deadline=None)
def test_quadrature_exactness(n, coeffs):
    poly = np.polynomial.Polynomial(coeffs)
    exact = poly.integ()(1.0) - poly.integ()(-1.0)
    g = gauss_nodes(n)
    if len(coeffs) - 1 <= 2 * n - 1:
        assert quadrature(poly, g) == pytest.approx(exact, abs=1e-12)
    gl = gll_nodes(n)
    if len(coeffs) - 1 <= 2 * n - 1:
        assert quadrature(poly, gl) == pytest.approx(exact, abs=1e-12)


def test_lagrange_examples():
    b = Basis1D.from_node_set(gll_nodes(2))
    for j, xj in enumerate(b.nodes):
        for i in range(3):
            assert lagrange_eval(b, i, xj) == (1.0 if i == j else 0.0)
    assert lagrange_eval(b, 1, 0.5) == pytest.approx(0.75, abs=1e-15)
    with pytest.raises(IndexError):
        lagrange_eval(b, 3, 0.0)


@pytest.mark.parametrize("p", [1, 2, 5, 9, 16])
def test_interpolation_and_partition(p):
    b = Basis1D.from_node_set(gll_nodes(p))
    np.testing.assert_allclose(b.lagrange(b.nodes), np.eye(p + 1), atol=1e-13)
    x = np.random.default_rng(p).uniform(-1, 1, 100)
    np.testing.assert_allclose(b.lagrange(x).sum(axis=1), 1.0, atol=1e-12)
    assert sum(lagrange_eval(b, i, 0.3) for i in range(p + 1)) == pytest.approx(1.0, abs=1e-12)


def test_lagrange_against_sympy():
    x = sym.Symbol("x")
    nodes = [sym.Integer(-1), -1 / sym.sqrt(5), 1 / sym.sqrt(5), sym.Integer(1)]
    b = Basis1D.from_node_set(gll_nodes(3))
    pts = np.linspace(-1, 1, 7)
    for i, ni in enumerate(nodes):
        h = sym.prod([(x - nj) / (ni - nj) for j, nj in enumerate(nodes) if j != i])
        dh = sym.diff(h, x)
        for xv in pts:
            assert b.lagrange([xv])[0, i] == pytest.approx(float(h.subs(x, xv)), abs=1e-14)
            assert b.lagrange_derivative([xv])[0, i] == pytest.approx(float(dh.subs(x, xv)),
                                                                      abs=1e-13)


@pytest.mark.parametrize("p", [1, 3, 6, 10])
def test_derivative_consistency(p):
    b = Basis1D.from_node_set(gll_nodes(p))
    x = np.linspace(-1, 1, 13)
    for k in range(p + 1):
        interp = b.lagrange_derivative(x) @ b.nodes**k
        expected = k * x ** (k - 1) if k else np.zeros_like(x)
        np.testing.assert_allclose(interp, expected, atol=1e-11)
    np.testing.assert_allclose(b.derivative_matrix, b.lagrange_derivative(b.nodes))


def test_edge_p1_is_half():
    b = Basis1D.from_node_set(gll_nodes(1))
    for xi in (-1.0, -0.3, 0.0, 0.9):
        assert edge_eval(b, 1, xi) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(IndexError):
        edge_eval(b, 0, 0.0)
    with pytest.raises(IndexError):
        edge_eval(b, 2, 0.0)


def test_edge_p3_subinterval_integrals():
    b = Basis1D.from_node_set(gll_nodes(3))
    A = histopolation_matrix(b)
    np.testing.assert_allclose(A, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(A.sum(axis=0), 1.0, atol=1e-14)


@pytest.mark.parametrize("p", [2, 4, 8, 12, 16])
def test_histopolation_duality(p):
    b = Basis1D.from_node_set(gll_nodes(p))
    np.testing.assert_allclose(histopolation_matrix(b, p + 2), np.eye(p), atol=1e-11)


def test_edge_basis_on_dual_nodes():
    # the same construction works on the extended Gauss grid
    b = Basis1D(extended_gauss_nodes(4))
    np.testing.assert_allclose(histopolation_matrix(b), np.eye(b.degree), atol=1e-12)


def test_basis_rejects_bad_nodes():
    with pytest.raises(ValueError):
        Basis1D(np.array([0.0, 0.0, 1.0]))
    with pytest.raises(ValueError):
        Basis1D(np.array([1.0]))
