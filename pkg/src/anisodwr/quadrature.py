"""Quadrature rules and 1D Lagrange tabulation on the unit interval.

All rules live on [0, 1]; tensor rules are ordered lexicographically with the
first coordinate varying fastest, matching the node ordering of the reference
elements.
"""
from __future__ import annotations

import numpy as np


def gauss_legendre(n: int):
    """n-point Gauss-Legendre rule on [0,1]; exact for degree 2n-1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_lobatto_nodes(n: int) -> np.ndarray:
    """n Gauss-Lobatto points on [0,1] (endpoints included for n >= 2).

    For n == 1 the single node sits at the midpoint so that degree-0
    elements have a well-defined nodal basis.
    """
    if n < 1:
        raise ValueError("need at least one node")
    if n == 1:
        return np.array([0.5])
    if n == 2:
        return np.array([0.0, 1.0])
    # interior nodes are the roots of P'_{n-1}
    coeffs = np.zeros(n)
    coeffs[n - 1] = 1.0
    interior = np.polynomial.legendre.legroots(np.polynomial.legendre.legder(coeffs))
    x = np.concatenate(([-1.0], np.sort(np.real(interior)), [1.0]))
    return 0.5 * (x + 1.0)


def tensor_gauss(nx: int, ny: int):
    """Tensor Gauss rule on the unit square; returns points (Q,2), weights (Q,)."""
    x1, w1 = gauss_legendre(nx)
    x2, w2 = gauss_legendre(ny)
    X1, X2 = np.meshgrid(x1, x2, indexing="xy")
    pts = np.column_stack([X1.ravel(), X2.ravel()])
    w = (w2[:, None] * w1[None, :]).ravel()
    return pts, w


def lagrange_1d(nodes: np.ndarray, x: np.ndarray):
    """Values, first and second derivatives of the Lagrange basis at points x.

    Returns three arrays of shape (len(x), len(nodes)).  Dimensions are tiny
    (degree <= 4 in practice) so plain products are used for stability at the
    nodes themselves.
    """
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(nodes)
    V = np.ones((len(x), n))
    D1 = np.zeros((len(x), n))
    D2 = np.zeros((len(x), n))
    for j in range(n):
        others = [k for k in range(n) if k != j]
        denom = np.prod([nodes[j] - nodes[k] for k in others]) if others else 1.0
        prod_all = np.ones_like(x)
        for k in others:
            prod_all *= x - nodes[k]
        V[:, j] = prod_all / denom
        for m in others:
            rest = np.ones_like(x)
            for k in others:
                if k != m:
                    rest *= x - nodes[k]
            D1[:, j] += rest / denom
        for m in others:
            for l in others:
                if l == m:
                    continue
                rest = np.ones_like(x)
                for k in others:
                    if k != m and k != l:
                        rest *= x - nodes[k]
                D2[:, j] += rest / denom
    return V, D1, D2
