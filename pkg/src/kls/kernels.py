"""Covariance kernels: pointwise evaluation, Gram matrices and trace integrals.

Every kernel is an immutable dataclass whose ``__call__`` broadcasts over
arrays of ``s`` and ``t``.  The catalog is closed; user data enters through
:class:`Tabulated`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import ClassVar

import numpy as np
from scipy import special

from .exceptions import GridMismatch, InvalidArgument, NumericError, UnsupportedPoint
from .grid import Grid

__all__ = [
    "KernelSpec",
    "BrownianMotion",
    "BrownianBridge",
    "OrnsteinUhlenbeck",
    "Matern",
    "Constant",
    "Tabulated",
    "evaluate",
    "gram",
    "trace_nu",
    "kernel_from_dict",
    "matern_scaled_bessel",
]


def _positive(name, value):
    if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value) and value > 0):
        raise InvalidArgument(f"{name} must be a positive finite number, got {value!r}")


class KernelSpec:
    """Common interface of the kernel catalog."""

    variant: ClassVar[str] = ""
    # whether the kernel can be evaluated away from a fixed set of nodes
    continuous: ClassVar[bool] = True

    def __call__(self, s, t):
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        self.check_domain(s)
        self.check_domain(t)
        return self._eval(s, t)

    def _eval(self, s, t):
        raise NotImplementedError

    def check_domain(self, t):
        pass

    def diag(self, t):
        t = np.asarray(t, dtype=float)
        return self(t, t)

    def scaled(self, c: float) -> "KernelSpec":
        """The kernel multiplied by ``c > 0``."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class BrownianMotion(KernelSpec):
    """``sigma2 * min(s, t)`` on ``[0, inf)``."""

    sigma2: float = 1.0
    variant: ClassVar[str] = "BrownianMotion"

    def __post_init__(self):
        _positive("sigma2", self.sigma2)

    def check_domain(self, t):
        if np.any(t < 0):
            raise InvalidArgument("Brownian motion is defined for t >= 0")

    def _eval(self, s, t):
        return self.sigma2 * np.minimum(s, t)

    def scaled(self, c):
        return replace(self, sigma2=self.sigma2 * c)

    def to_dict(self):
        return {"variant": self.variant, "sigma2": self.sigma2}


@dataclass(frozen=True)
class BrownianBridge(KernelSpec):
    """``sigma2 * (min(s, t) - s t)`` on ``[0, 1]``."""

    sigma2: float = 1.0
    variant: ClassVar[str] = "BrownianBridge"

    def __post_init__(self):
        _positive("sigma2", self.sigma2)

    def check_domain(self, t):
        if np.any((t < 0) | (t > 1)):
            raise InvalidArgument("Brownian bridge is defined on [0, 1]")

    def _eval(self, s, t):
        return self.sigma2 * (np.minimum(s, t) - s * t)

    def scaled(self, c):
        return replace(self, sigma2=self.sigma2 * c)

    def to_dict(self):
        return {"variant": self.variant, "sigma2": self.sigma2}


@dataclass(frozen=True)
class OrnsteinUhlenbeck(KernelSpec):
    """``a * exp(-sigma |s - t|)``."""

    a: float = 1.0
    sigma: float = 1.0
    variant: ClassVar[str] = "OrnsteinUhlenbeck"

    def __post_init__(self):
        _positive("a", self.a)
        _positive("sigma", self.sigma)

    def _eval(self, s, t):
        return self.a * np.exp(-self.sigma * np.abs(s - t))

    def scaled(self, c):
        return replace(self, a=self.a * c)

    def to_dict(self):
        return {"variant": self.variant, "a": self.a, "sigma": self.sigma}


def _half_integer_form(alpha: float, x: np.ndarray) -> np.ndarray:
    # x^alpha K_alpha(x) for alpha = k + 1/2:
    # sqrt(pi/2) e^{-x} sum_j (k+j)! / (j! (k-j)!) 2^{-j} x^{k-j}
    k = int(round(alpha - 0.5))
    acc = np.zeros_like(x)
    for j in range(k + 1):
        c = math.factorial(k + j) / (math.factorial(j) * math.factorial(k - j)) / 2.0**j
        acc = acc + c * x ** (k - j)
    return math.sqrt(math.pi / 2) * np.exp(-x) * acc


def matern_scaled_bessel(alpha: float, x) -> np.ndarray:
    """``x^alpha K_alpha(x)`` for ``x >= 0`` with its limit ``2^(alpha-1) Gamma(alpha)`` at 0.

    Half-integer orders use the closed form; other orders go through
    :func:`scipy.special.kve`.
    """
    x = np.asarray(x, dtype=float)
    if abs(alpha - 0.5 - round(alpha - 0.5)) < 1e-15 and alpha < 50:
        return _half_integer_form(alpha, x)
    out = np.empty_like(x)
    zero = x == 0
    out[zero] = 2.0 ** (alpha - 1) * math.gamma(alpha)
    xp = x[~zero]
    with np.errstate(over="ignore", invalid="ignore"):
        out[~zero] = np.exp(alpha * np.log(xp) - xp) * special.kve(alpha, xp)
    if not np.all(np.isfinite(out)):
        raise NumericError(f"Bessel evaluation overflowed for alpha={alpha}")
    return out


@dataclass(frozen=True)
class Matern(KernelSpec):
    """``a (sigma r)^alpha K_alpha(sigma r)`` with ``r = |s - t|``.

    This is the unnormalized form; the variance is ``a 2^(alpha-1) Gamma(alpha)``.
    ``d`` is the dimension of the underlying domain and only enters the
    smoothness certificates; evaluation is one-dimensional.
    """

    a: float = 1.0
    sigma: float = 1.0
    alpha: float = 0.5
    d: int = 1
    variant: ClassVar[str] = "Matern"

    def __post_init__(self):
        _positive("a", self.a)
        _positive("sigma", self.sigma)
        _positive("alpha", self.alpha)
        if int(self.d) != self.d or self.d < 1:
            raise InvalidArgument("d must be a positive integer")

    @property
    def variance(self) -> float:
        return self.a * 2.0 ** (self.alpha - 1) * math.gamma(self.alpha)

    def _eval(self, s, t):
        return self.a * matern_scaled_bessel(self.alpha, self.sigma * np.abs(s - t))

    def scaled(self, c):
        return replace(self, a=self.a * c)

    def to_dict(self):
        return {"variant": self.variant, "a": self.a, "sigma": self.sigma,
                "alpha": self.alpha, "d": int(self.d)}


@dataclass(frozen=True)
class Constant(KernelSpec):
    """``k(s, t) = c``; the covariance of a single random level."""

    c: float = 1.0
    variant: ClassVar[str] = "Constant"

    def __post_init__(self):
        _positive("c", self.c)

    def _eval(self, s, t):
        return np.full(s.shape, float(self.c))

    def scaled(self, c):
        return replace(self, c=self.c * c)

    def to_dict(self):
        return {"variant": self.variant, "c": self.c}


@dataclass(frozen=True, eq=False)
class Tabulated(KernelSpec):
    """A Gram matrix given on the nodes of a fixed grid.

    The input is symmetrized as ``(G + G.T) / 2``; a warning is emitted when
    the asymmetry exceeds ``1e-8`` relative to the largest entry.
    """

    grid: Grid = None
    gram: np.ndarray = field(default=None, repr=False)
    variant: ClassVar[str] = "Tabulated"
    continuous: ClassVar[bool] = False

    def __post_init__(self):
        if not isinstance(self.grid, Grid):
            raise InvalidArgument("Tabulated kernel needs a Grid")
        g = np.array(self.gram, dtype=float)
        n = self.grid.n
        if g.shape != (n, n):
            raise InvalidArgument(f"gram must be {n}x{n}, got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise InvalidArgument("gram entries must be finite")
        scale = max(np.max(np.abs(g)), np.finfo(float).tiny)
        asym = np.max(np.abs(g - g.T)) / scale
        if asym > 1e-8:
            warnings.warn(f"tabulated Gram matrix asymmetric by {asym:.3g}; symmetrizing", stacklevel=3)
        g = 0.5 * (g + g.T)
        g.setflags(write=False)
        object.__setattr__(self, "gram", g)

    def __call__(self, s, t):
        s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
        i = self.grid.node_index(s)
        j = self.grid.node_index(t)
        if np.any(i < 0) or np.any(j < 0):
            raise UnsupportedPoint("tabulated kernel can only be evaluated at its grid nodes")
        return self.gram[i, j]

    def scaled(self, c):
        return Tabulated(self.grid, self.gram * c)

    def to_dict(self):
        return {"variant": self.variant, "grid": self.grid.to_dict(), "gram": self.gram.tolist()}


_VARIANTS = {cls.variant: cls for cls in
             (BrownianMotion, BrownianBridge, OrnsteinUhlenbeck, Matern, Constant)}


def kernel_from_dict(d: dict) -> KernelSpec:
    """Inverse of ``KernelSpec.to_dict``."""
    d = dict(d)
    variant = d.pop("variant", None)
    if variant == "Tabulated":
        try:
            return Tabulated(Grid.from_dict(d["grid"]), np.asarray(d["gram"], dtype=float))
        except KeyError as exc:
            raise InvalidArgument(f"Tabulated kernel missing field {exc}") from None
    if variant not in _VARIANTS:
        raise InvalidArgument(f"unknown kernel variant {variant!r}")
    try:
        return _VARIANTS[variant](**d)
    except TypeError as exc:
        raise InvalidArgument(str(exc)) from None


def load_tabulated(gram_csv: str, grid_json: str) -> Tabulated:
    """Read a Gram matrix CSV and its grid JSON from disk."""
    with open(grid_json) as fh:
        grid = Grid.from_json(fh.read())
    g = np.loadtxt(gram_csv, delimiter=",", ndmin=2)
    return Tabulated(grid, g)


def evaluate(spec: KernelSpec, s, t):
    """Kernel value ``k(s, t)``; broadcasts over array arguments."""
    out = spec(s, t)
    return float(out) if np.ndim(out) == 0 else out


def gram(spec: KernelSpec, grid: Grid) -> np.ndarray:
    """The matrix ``[k(t_i, t_j)]`` over the grid nodes."""
    if isinstance(spec, Tabulated):
        if spec.grid != grid:
            raise GridMismatch("tabulated kernel was built on a different grid")
        return np.array(spec.gram)
    t = grid.nodes
    g = spec(t[:, None], t[None, :])
    # exact symmetry regardless of floating evaluation order
    return np.triu(g) + np.triu(g, 1).T


def trace_nu(spec: KernelSpec, grid: Grid) -> float:
    """Quadrature value of the trace integral of ``k(t, t)`` against the grid measure."""
    if isinstance(spec, Tabulated):
        if spec.grid != grid:
            raise GridMismatch("tabulated kernel was built on a different grid")
        return float(np.sum(grid.weights * np.diag(spec.gram)))
    return float(np.sum(grid.weights * spec.diag(grid.nodes)))
