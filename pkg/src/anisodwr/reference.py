"""Tensor-product Lagrange reference elements with per-direction degrees.

Shape functions are tensor products of 1D Lagrange polynomials at
Gauss-Lobatto nodes on the unit square.  Nodes are ordered lexicographically
with the x1 index varying fastest.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .quadrature import gauss_lobatto_nodes, lagrange_1d


class ReferenceElement:
    """Q_{p1,p2} element on [0,1]^2 with Gauss-Lobatto nodal basis."""

    def __init__(self, p1: int, p2: int):
        if p1 < 0 or p2 < 0:
            raise ValueError("polynomial degrees must be nonnegative")
        self.degrees = (p1, p2)
        self.nodes_1d = (gauss_lobatto_nodes(p1 + 1), gauss_lobatto_nodes(p2 + 1))
        X1, X2 = np.meshgrid(self.nodes_1d[0], self.nodes_1d[1], indexing="xy")
        self.nodes = np.column_stack([X1.ravel(), X2.ravel()])
        self.n_dofs = (p1 + 1) * (p2 + 1)

    def node_index(self, ix: int, iy: int) -> int:
        return iy * (self.degrees[0] + 1) + ix

    def tabulate(self, points, hessians=False):
        """Evaluate all shape functions at reference points.

        Returns (values, gradients) of shapes (Q, N) and (Q, N, 2); with
        hessians=True also (Q, N, 2, 2).
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        v1, d1, dd1 = lagrange_1d(self.nodes_1d[0], points[:, 0])
        v2, d2, dd2 = lagrange_1d(self.nodes_1d[1], points[:, 1])
        n1 = self.degrees[0] + 1
        n2 = self.degrees[1] + 1
        Q = points.shape[0]
        N = n1 * n2
        vals = np.empty((Q, N))
        grads = np.empty((Q, N, 2))
        hess = np.empty((Q, N, 2, 2)) if hessians else None
        for iy in range(n2):
            sl = slice(iy * n1, (iy + 1) * n1)
            vals[:, sl] = v1 * v2[:, iy : iy + 1]
            grads[:, sl, 0] = d1 * v2[:, iy : iy + 1]
            grads[:, sl, 1] = v1 * d2[:, iy : iy + 1]
            if hessians:
                hess[:, sl, 0, 0] = dd1 * v2[:, iy : iy + 1]
                hess[:, sl, 0, 1] = d1 * d2[:, iy : iy + 1]
                hess[:, sl, 1, 0] = hess[:, sl, 0, 1]
                hess[:, sl, 1, 1] = v1 * dd2[:, iy : iy + 1]
        if hessians:
            return vals, grads, hess
        return vals, grads


@lru_cache(maxsize=32)
def reference_element(p1: int, p2: int) -> ReferenceElement:
    return ReferenceElement(p1, p2)


def reference_shape_eval(elem: ReferenceElement, point):
    """Values and reference gradients of all shape functions at one point."""
    vals, grads = elem.tabulate(np.asarray(point, dtype=float).reshape(1, 2))
    return vals[0], grads[0]
