"""Eigenpairs of the integral operator of a kernel, discretized on a grid.

The operator ``f -> int k(., t) f(t) dnu(t)`` is replaced by the quadrature
matrix ``G D`` with ``D = diag(weights)``.  Its eigenpairs are obtained from
the symmetric similarity transform ``B = D^(1/2) G D^(1/2)``: if
``B v = lam v`` then ``e = D^(-1/2) v`` satisfies ``G D e = lam e`` and the
rows ``e`` are orthonormal in the discrete L2 pairing.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import DegenerateKernel, InvalidArgument, NumericError, Unsupported
from .grid import Grid
from .kernels import KernelSpec, Tabulated, gram, trace_nu

# negative eigenvalues of B below -NEG_TOL * lam_max mean the kernel is not PSD
NEG_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Retained eigenvalues ``mu`` (descending) and eigenfunctions on the grid nodes.

    ``efuns[i, j]`` holds ``e_i(t_j)``.  A decomposition built by
    :meth:`from_spectrum` carries eigenvalues only (``grid`` and ``efuns``
    are ``None``); operations that need eigenfunctions reject it.
    """

    grid: Grid | None
    mu: np.ndarray
    efuns: np.ndarray | None
    kernel_tag: str = ""
    drop_tol: float = 1e-12
    trace: float | None = None

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        if self.efuns is not None:
            e = np.array(self.efuns, dtype=float)
            e.setflags(write=False)
            object.__setattr__(self, "efuns", e)

    @property
    def rank(self) -> int:
        return self.mu.size

    @property
    def n_nodes(self) -> int:
        """Grid size, or the rank for a spectrum-only decomposition."""
        return self.grid.n if self.grid is not None else self.rank

    @classmethod
    def from_spectrum(cls, mu, kernel_tag="synthetic") -> "SpectralDecomposition":
        """Eigenvalue-only decomposition, e.g. for a synthetic decay law."""
        mu = np.asarray(mu, dtype=float)
        if mu.ndim != 1 or mu.size == 0 or np.any(mu <= 0) or np.any(np.diff(mu) > 0):
            raise InvalidArgument("mu must be a nonempty, positive, nonincreasing array")
        return cls(None, mu, None, kernel_tag, 0.0, float(mu.sum()))

    def require_efuns(self):
        if self.efuns is None:
            raise Unsupported("this decomposition holds eigenvalues only")

    def truncate(self, m: int) -> "SpectralDecomposition":
        """The leading ``m`` eigenpairs."""
        if not 0 <= m <= self.rank:
            raise InvalidArgument(f"truncation {m} outside [0, {self.rank}]")
        return SpectralDecomposition(
            self.grid, self.mu[:m], None if self.efuns is None else self.efuns[:m],
            self.kernel_tag, self.drop_tol, self.trace,
        )

    # serialization: JSON metadata plus CSV matrices
    def metadata(self) -> dict:
        return {
            "kernel": self.kernel_tag,
            "rank": self.rank,
            "drop_tol": self.drop_tol,
            "trace_nu": self.trace,
            "sum_mu": float(self.mu.sum()),
            "grid": None if self.grid is None else self.grid.to_dict(),
        }

    def save(self, directory: str):
        from .io import atomic_write_text, format_matrix

        os.makedirs(directory, exist_ok=True)
        atomic_write_text(os.path.join(directory, "mu.csv"), format_matrix(self.mu[:, None]))
        if self.efuns is not None:
            atomic_write_text(os.path.join(directory, "efuns.csv"), format_matrix(self.efuns))
        atomic_write_text(os.path.join(directory, "decomposition.json"),
                          json.dumps(self.metadata(), indent=2) + "\n")

    @classmethod
    def load(cls, directory: str) -> "SpectralDecomposition":
        with open(os.path.join(directory, "decomposition.json")) as fh:
            meta = json.load(fh)
        mu = np.loadtxt(os.path.join(directory, "mu.csv"), delimiter=",", ndmin=1)
        efuns_path = os.path.join(directory, "efuns.csv")
        efuns = None
        if os.path.exists(efuns_path):
            efuns = np.loadtxt(efuns_path, delimiter=",", ndmin=2)
        grid = None if meta["grid"] is None else Grid.from_dict(meta["grid"])
        return cls(grid, np.atleast_1d(mu), efuns, meta["kernel"], meta["drop_tol"], meta["trace_nu"])


def symmetric_eigh(gram_matrix: np.ndarray, weights: np.ndarray):
    """Eigenpairs of ``D^(1/2) G D^(1/2)`` in descending order.

    Returns ``(lam, vecs)`` with eigenvectors in the columns of ``vecs``.
    """
    sw = np.sqrt(weights)
    b = sw[:, None] * gram_matrix * sw[None, :]
    b = 0.5 * (b + b.T)
    try:
        lam, vecs = linalg.eigh(b, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"symmetric eigensolver failed: {exc}") from exc
    return lam[::-1], vecs[:, ::-1]


def _apply_sign_convention(efuns: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each row positive; argmax picks the lowest index on ties
    if efuns.size == 0:
        return efuns
    idx = np.argmax(np.abs(efuns), axis=1)
    signs = np.sign(efuns[np.arange(efuns.shape[0]), idx])
    signs[signs == 0] = 1.0
    return efuns * signs[:, None]


def _kernel_tag(spec: KernelSpec) -> str:
    d = spec.to_dict()
    if d.get("variant") == "Tabulated":
        return "Tabulated"
    return json.dumps(d, sort_keys=True)


def decompose(spec: KernelSpec, grid: Grid, max_rank: int | None = None,
              drop_tol: float = 1e-12) -> SpectralDecomposition:
    """Eigendecomposition of the kernel's integral operator on ``grid``.

    Parameters
    ----------
    spec : KernelSpec
    grid : Grid
    max_rank : int, optional
        Keep at most this many eigenpairs.
    drop_tol : float
        Eigenvalues ``<= drop_tol * lam_max`` are discarded.

    Raises
    ------
    DegenerateKernel
        If no eigenvalue is positive.
    NumericError
        If the eigensolver fails or the Gram matrix has a negative eigenvalue
        below ``-1e-8 * lam_max``.
    """
    if drop_tol < 0:
        raise InvalidArgument("drop_tol must be nonnegative")
    if max_rank is not None and max_rank < 0:
        raise InvalidArgument("max_rank must be nonnegative")
    g = gram(spec, grid)
    lam, vecs = symmetric_eigh(g, grid.weights)
    lam_max = lam[0]
    if not lam_max > 0:
        raise DegenerateKernel("the kernel has no positive eigenvalue on this grid")
    if lam[-1] < -NEG_TOL * lam_max:
        raise NumericError(
            f"Gram matrix is not positive semi-definite: eigenvalue {lam[-1]:.3g} "
            f"vs largest {lam_max:.3g}"
        )
    keep = lam > drop_tol * lam_max
    if max_rank is not None:
        keep[max_rank:] = False
    mu = lam[keep]
    efuns = (vecs[:, keep] / np.sqrt(grid.weights)[:, None]).T
    efuns = _apply_sign_convention(efuns)
    return SpectralDecomposition(grid, mu, efuns, _kernel_tag(spec), drop_tol,
                                 trace_nu(spec, grid))


def nystrom_extend(dec: SpectralDecomposition, spec: KernelSpec, t) -> np.ndarray:
    """Eigenfunction values off the grid, ``e_i(t) = mu_i^-1 sum_j w_j k(t, t_j) e_i(t_j)``.

    A scalar ``t`` gives an array of length ``rank``; an array of ``p`` points
    gives shape ``(rank, p)``.
    """
    dec.require_efuns()
    if not spec.continuous:
        raise Unsupported("Nystrom extension needs a kernel that can be evaluated off the grid")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if not np.all(np.isfinite(t_arr)):
        raise InvalidArgument("evaluation points must be finite")
    k = spec(t_arr[:, None], dec.grid.nodes[None, :])
    vals = (k * dec.grid.weights) @ dec.efuns.T / dec.mu
    vals = vals.T
    return vals[:, 0] if np.ndim(t) == 0 else vals


def efun_values(dec: SpectralDecomposition, spec: KernelSpec | None, t) -> np.ndarray:
    """Eigenfunction values at ``t``: stored columns at nodes, Nystrom elsewhere.

    Returns shape ``(rank, p)`` for ``p`` points.
    """
    dec.require_efuns()
    t = np.atleast_1d(np.asarray(t, dtype=float))
    idx = dec.grid.node_index(t)
    out = np.empty((dec.rank, t.size))
    on = idx >= 0
    out[:, on] = dec.efuns[:, idx[on]]
    if np.any(~on):
        if spec is None:
            raise Unsupported("off-grid points need the source kernel")
        out[:, ~on] = nystrom_extend(dec, spec, t[~on])
    return out


def mercer_residual(dec: SpectralDecomposition, spec: KernelSpec, probes) -> dict:
    """Defect of the truncated Mercer sum ``k(s, t) - sum_i mu_i e_i(s) e_i(t)`` at probe pairs.

    Returns ``{"max_abs": ..., "max_rel_diag": ...}``; ``max_rel_diag`` is the
    largest diagonal defect relative to ``k(t, t)`` over probes with ``s == t``
    (0 when no diagonal probe is given).
    """
    probes = np.asarray(probes, dtype=float).reshape(-1, 2)
    s, t = probes[:, 0], probes[:, 1]
    es = efun_values(dec, spec, s)
    et = efun_values(dec, spec, t)
    recon = np.sum(dec.mu[:, None] * es * et, axis=0)
    k = np.asarray(spec(s, t), dtype=float)
    defect = k - recon
    diag = s == t
    rel = 0.0
    if diag.any():
        kd = k[diag]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(kd != 0, np.abs(defect[diag]) / np.abs(kd), np.abs(defect[diag]))
        rel = float(np.max(r))
    return {"max_abs": float(np.max(np.abs(defect))), "max_rel_diag": rel,
            "defect": defect}


def check_invariants(dec: SpectralDecomposition, spec: KernelSpec, orth_tol=1e-10,
                     eig_tol=1e-8) -> list[str]:
    """List of violated decomposition invariants (empty when all hold)."""
    problems = []
    if dec.rank == 0:
        return ["empty decomposition"]
    w = dec.grid.weights
    e = dec.efuns
    gm = e @ (w[:, None] * e.T)
    orth = np.max(np.abs(gm - np.eye(dec.rank)))
    if orth > orth_tol:
        problems.append(f"orthonormality defect {orth:.3g} > {orth_tol:g}")
    g = gram(spec, dec.grid)
    lhs = (g * w) @ e.T
    rel = np.max(np.abs(lhs - e.T * dec.mu)) / dec.mu[0]
    if rel > eig_tol:
        problems.append(f"eigen-relation defect {rel:.3g} mu_1 > {eig_tol:g} mu_1")
    if np.any(np.diff(dec.mu) > 0) or np.any(dec.mu <= 0):
        problems.append("eigenvalues not positive and descending")
    if dec.trace is not None and dec.mu.sum() > dec.trace * (1 + 1e-8):
        problems.append("sum of eigenvalues exceeds the trace integral")
    return problems

