"""Laplacian eigendecomposition, graph Fourier transform and spectral energy.

Signals may be a vector ``[N]`` or a matrix ``[N x C]``; for matrices the
energy at each frequency is summed over the columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateInputError, DimensionMismatchError
from .graph import EdgeSet, LaplacianMatrix, check_dense_capacity, laplacian

#: relative tolerance under which two eigenvector entries count as equal in
#: magnitude for the sign rule
_SIGN_TIE_RTOL = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    distribution: np.ndarray
    cumulative_ratio: np.ndarray
    high_freq_area: float
    split_index: int

    @property
    def eta_k(self) -> float:
        return float(self.cumulative_ratio[self.split_index - 1])


def default_split_index(n: int) -> int:
    """Low/high frequency split used by reports: ``ceil(N / 4)``."""
    return max(1, math.ceil(n / 4))


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is positive.

    Entries within a relative 1e-10 of the column maximum count as ties; the
    lowest such index decides.
    """
    vectors = np.array(vectors, dtype=np.float64)
    if vectors.size == 0:
        return vectors
    mag = np.abs(vectors)
    top = mag.max(axis=0)
    pivot = np.argmax(mag >= top * (1.0 - _SIGN_TIE_RTOL), axis=0)
    signs = np.sign(vectors[pivot, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _as_matrix(lap) -> np.ndarray:
    if isinstance(lap, LaplacianMatrix):
        return lap.matrix
    if isinstance(lap, EdgeSet):
        return laplacian(lap).matrix
    return np.asarray(lap, dtype=np.float64)


def eigendecompose(lap) -> SpectralDecomposition:
    """Ascending eigenpairs of a symmetric matrix with the sign rule applied."""
    m = _as_matrix(lap)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"Laplacian must be square, got {m.shape}")
    check_dense_capacity(m.shape[0])
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("matrix is not symmetric")
    w, u = np.linalg.eigh(m)
    return SpectralDecomposition(w, fix_signs(u))


def graph_fourier_transform(dec: SpectralDecomposition, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != dec.num_nodes:
        raise DimensionMismatchError(
            f"signal has {x.shape[0]} entries, decomposition has {dec.num_nodes} nodes"
        )
    return dec.eigenvectors.T @ x


def _energy(xhat) -> np.ndarray:
    xhat = np.asarray(xhat, dtype=np.float64)
    e = xhat**2
    if e.ndim == 2:
        e = e.sum(axis=1)
    return e


def energy_distribution(xhat) -> np.ndarray:
    """Share of the signal energy carried by each frequency."""
    e = _energy(xhat)
    total = e.sum()
    if total == 0:
        raise DegenerateInputError("energy distribution of the zero signal is undefined")
    return e / total


def energy_ratio(xhat, k: int) -> float:
    """Cumulative energy share of the ``k`` lowest frequencies."""
    e = _energy(xhat)
    if not 1 <= k <= len(e):
        raise ValueError(f"k must lie in [1, {len(e)}], got {k}")
    total = e.sum()
    if total == 0:
        raise DegenerateInputError("energy ratio of the zero signal is undefined")
    return float(e[:k].sum() / total)


def cumulative_ratio(xhat) -> np.ndarray:
    c = np.cumsum(energy_distribution(xhat))
    c = np.minimum(c, 1.0)
    c[-1] = 1.0
    return c


def high_freq_area(lap, x, method: str = "quadratic", decomposition=None) -> float:
    """Rayleigh quotient of ``x``: the energy-weighted mean eigenvalue.

    ``method="spectral"`` sums over the eigenpairs (computed unless
    ``decomposition`` is given); ``"quadratic"`` evaluates ``x'Lx / x'x``.
    """
    x = np.asarray(x, dtype=np.float64)
    m = _as_matrix(lap)
    if x.shape[0] != m.shape[0]:
        raise DimensionMismatchError(f"signal length {x.shape[0]} != {m.shape[0]} nodes")
    denom = float(np.sum(x * x))
    if denom == 0:
        raise DegenerateInputError("high-frequency area of the zero signal is undefined")
    if method == "quadratic":
        return float(np.sum(x * (m @ x)) / denom)
    if method == "spectral":
        dec = decomposition if decomposition is not None else eigendecompose(m)
        e = _energy(graph_fourier_transform(dec, x))
        return float(np.dot(dec.eigenvalues, e) / e.sum())
    raise ValueError(f"unknown method {method!r}")


def label_high_freq_area(e: EdgeSet, y) -> float:
    """High-frequency area of a label signal on the regular Laplacian.

    For 0/1 labels this is the number of edges with differing endpoint labels
    divided by the number of anomalies.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (e.num_nodes,):
        raise DimensionMismatchError(f"label vector must have length {e.num_nodes}")
    denom = float(y @ y)
    if denom == 0:
        raise DegenerateInputError("label signal has no nonzero entry")
    diff = y[e.edges[:, 0]] - y[e.edges[:, 1]]
    return float(diff @ diff / denom)


def spectrum_report(lap, x, k: int = None, decomposition=None) -> SpectrumReport:
    dec = decomposition if decomposition is not None else eigendecompose(lap)
    xhat = graph_fourier_transform(dec, x)
    dist = energy_distribution(xhat)
    k = default_split_index(dec.num_nodes) if k is None else int(k)
    if not 1 <= k <= dec.num_nodes:
        raise ValueError(f"k must lie in [1, {dec.num_nodes}], got {k}")
    s_high = float(np.dot(dec.eigenvalues, dist))
    return SpectrumReport(dec.eigenvalues, dist, cumulative_ratio(xhat), s_high, k)
