"""Problem data for the convection-diffusion-reaction equation.

Coefficients are vectorized callables of (x, t) with x of shape (N, 2);
scalars and constant vectors are wrapped automatically.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


def scalar_coefficient(c):
    if callable(c):
        return c
    val = float(c)
    return lambda x, t: np.full(len(x), val)


def vector_coefficient(c):
    if callable(c):
        return c
    vec = np.asarray(c, dtype=float).reshape(2)
    return lambda x, t: np.broadcast_to(vec, (len(x), 2))


def zero_scalar(x, t=0.0):
    return np.zeros(len(x))


@dataclass
class CdrProblem:
    """Coefficients, data and boundary partition of the transport equation
    du/dt - div(eps grad u) + b.grad u + alpha u = f."""

    epsilon: float
    b: Callable
    alpha: Callable
    f: Callable
    u0: Callable
    T: float
    dirichlet: dict = field(default_factory=dict)   # boundary id -> g(x, t)
    neumann: dict = field(default_factory=dict)     # boundary id -> u_N(x, t)
    time_dependent_coefficients: bool = False       # b or alpha vary in time

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise ValueError("epsilon must lie in (0, 1]")
        self.b = vector_coefficient(self.b)
        self.alpha = scalar_coefficient(self.alpha)
        self.f = scalar_coefficient(self.f)
        if not callable(self.u0):
            v0 = float(self.u0)
            self.u0 = lambda x: np.full(len(x), v0)
        self.dirichlet = {k: (v if callable(v) else scalar_coefficient(v))
                          for k, v in self.dirichlet.items()}
        self.neumann = {k: (v if callable(v) else scalar_coefficient(v))
                        for k, v in self.neumann.items()}

    def check_reaction_sign(self, x, t):
        a = self.alpha(x, t)
        if np.any(a < -1e-14):
            warnings.warn("reaction coefficient is negative at quadrature points",
                          RuntimeWarning)
        return a
