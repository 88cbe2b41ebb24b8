"""Quadrature grids representing a measure on an interval ``[a, b]``.

A :class:`Grid` is a finite set of nodes with strictly positive weights.  All
L2 computations in the package go through the discrete pairing
``sum_j w_j f(t_j) g(t_j)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import DegenerateMeasure, InvalidArgument, InvalidDensity

RULE_TAGS = ("uniform_midpoint", "gauss_legendre", "weighted")


@dataclass(frozen=True, eq=False)
class Grid:
    """Nodes and weights of a quadrature rule on ``[a, b]``.

    Attributes
    ----------
    a, b : float
        Interval endpoints, ``b > a``.
    nodes : ndarray of shape (n,)
        Strictly increasing nodes inside ``[a, b]``.
    weights : ndarray of shape (n,)
        Strictly positive weights.
    rule_tag : str
        One of ``uniform_midpoint``, ``gauss_legendre``, ``weighted``.
    """

    a: float
    b: float
    nodes: np.ndarray
    weights: np.ndarray
    rule_tag: str = "uniform_midpoint"

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float).ravel()
        weights = np.array(self.weights, dtype=float).ravel()
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b)) or b <= a:
            raise InvalidArgument(f"need finite endpoints with b > a, got [{a}, {b}]")
        if nodes.size == 0 or nodes.shape != weights.shape:
            raise InvalidArgument("nodes and weights must be nonempty and of equal length")
        if not np.all(np.isfinite(nodes)) or not np.all(np.isfinite(weights)):
            raise InvalidArgument("nodes and weights must be finite")
        if np.any(weights <= 0):
            raise InvalidArgument("weights must be strictly positive")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidArgument("nodes must be strictly increasing")
        if nodes[0] < a or nodes[-1] > b:
            raise InvalidArgument("nodes must lie inside [a, b]")
        if self.rule_tag not in RULE_TAGS:
            raise InvalidArgument(f"unknown rule_tag {self.rule_tag!r}")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.nodes.size

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.a == other.a
            and self.b == other.b
            and self.rule_tag == other.rule_tag
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None

    def node_index(self, t) -> np.ndarray:
        """Index of each ``t`` among the nodes, or -1 where ``t`` is not a node."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.nodes, t)
        idx = np.clip(idx, 0, self.n - 1)
        return np.where(self.nodes[idx] == t, idx, -1)

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "nodes": self.nodes.tolist(),
            "weights": self.weights.tolist(),
            "rule_tag": self.rule_tag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        try:
            return cls(d["a"], d["b"], d["nodes"], d["weights"], d.get("rule_tag", "weighted"))
        except KeyError as exc:
            raise InvalidArgument(f"grid JSON missing field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Grid":
        return cls.from_dict(json.loads(text))


def _check_interval(a, b, n):
    if not (math.isfinite(a) and math.isfinite(b)):
        raise InvalidArgument("endpoints must be finite")
    if b <= a:
        raise InvalidArgument(f"need b > a, got a={a}, b={b}")
    if int(n) != n or n < 1:
        raise InvalidArgument(f"need a positive number of nodes, got {n}")


def build_uniform(a: float, b: float, n: int) -> Grid:
    """Composite midpoint rule with ``n`` cells on ``[a, b]``."""
    _check_interval(a, b, n)
    n = int(n)
    h = (b - a) / n
    nodes = a + (np.arange(n) + 0.5) * h
    return Grid(a, b, nodes, np.full(n, h), "uniform_midpoint")


def legendre_nodes(n: int, tol: float = 1e-15, maxiter: int = 100):
    """Gauss-Legendre nodes and weights on ``[-1, 1]`` by Newton iteration.

    Roots of the degree-``n`` Legendre polynomial are refined from the
    Tricomi initial guess using the three-term recurrence; weights are
    ``2 / ((1 - x^2) P_n'(x)^2)``.
    """
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))

    def p_and_dp(x):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        return p1, dp

    for _ in range(maxiter):
        p, dp = p_and_dp(x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < tol:
            break
    _, dp = p_and_dp(x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    return x[::-1].copy(), w[::-1].copy()


def build_gauss(a: float, b: float, n: int) -> Grid:
    """Gauss-Legendre rule with ``n`` nodes mapped affinely onto ``[a, b]``."""
    _check_interval(a, b, n)
    x, w = legendre_nodes(int(n))
    half = 0.5 * (b - a)
    return Grid(a, b, a + half * (x + 1.0), half * w, "gauss_legendre")


def reweight(grid: Grid, density: Callable[[np.ndarray], np.ndarray]) -> Grid:
    """Multiply the weights of ``grid`` by ``density`` evaluated at the nodes.

    Nodes whose resulting weight is zero are dropped.
    """
    dens = np.asarray(density(grid.nodes), dtype=float)
    dens = np.broadcast_to(dens, grid.nodes.shape)
    if not np.all(np.isfinite(dens)) or np.any(dens < 0):
        raise InvalidDensity("density must be finite and nonnegative at every node")
    w = grid.weights * dens
    keep = w > 0
    if not keep.any():
        raise DegenerateMeasure("density vanishes at every node")
    return Grid(grid.a, grid.b, grid.nodes[keep], w[keep], "weighted")


def inner(f_vals, g_vals, grid: Grid) -> float:
    """Discrete L2 pairing ``sum_j w_j f(t_j) g(t_j)``."""
    f = np.asarray(f_vals, dtype=float)
    g = np.asarray(g_vals, dtype=float)
    if f.shape != (grid.n,) or g.shape != (grid.n,):
        raise InvalidArgument(f"expected arrays of length {grid.n}, got {f.shape} and {g.shape}")
    return float(np.sum(grid.weights * f * g))


def from_config(cfg: dict) -> Grid:
    """Build a grid from ``{"rule", "a", "b", "n"}`` or an explicit grid dict."""
    if "nodes" in cfg:
        return Grid.from_dict(cfg)
    rule = cfg.get("rule", "uniform_midpoint")
    builders = {"uniform_midpoint": build_uniform, "uniform": build_uniform,
                "gauss_legendre": build_gauss, "gauss": build_gauss}
    if rule not in builders:
        raise InvalidArgument(f"unknown grid rule {rule!r}")
    return builders[rule](float(cfg.get("a", 0.0)), float(cfg.get("b", 1.0)), cfg["n"])
