"""Monte-Carlo statistics, error metrics and density estimation."""

from dataclasses import dataclass, field

import numpy as np

from caerom.errors import ConfigurationError, DimensionError, MetricError


class RunningMoments:
    """One-pass entrywise mean and variance of a stream of equally shaped arrays.

    Uses Welford's update per sample and Chan's pairwise formula for
    :meth:`merge`, so partial accumulators from different workers combine
    associatively.
    """

    def __init__(self, shape=None):
        self.count = 0
        self.shape = None if shape is None else tuple(shape)
        self._mean = None
        self._m2 = None
        if self.shape is not None:
            self._mean = np.zeros(self.shape)
            self._m2 = np.zeros(self.shape)

    def push(self, x):
        x = np.asarray(x, dtype=float)
        if self.shape is None:
            self.shape = x.shape
            self._mean = np.zeros(x.shape)
            self._m2 = np.zeros(x.shape)
        elif x.shape != self.shape:
            raise DimensionError(f"sample {self.count} has shape {x.shape}, expected {self.shape}")
        self.count += 1
        delta = x - self._mean
        self._mean += delta / self.count
        self._m2 += delta * (x - self._mean)
        return self

    def push_batch(self, xs):
        """Add a stack of samples ``(B, *shape)`` at once, merged with Chan's formula."""
        xs = np.asarray(xs, dtype=float)
        if xs.shape[0] == 0:
            return self
        part = RunningMoments(xs.shape[1:])
        part.count = xs.shape[0]
        part._mean = xs.mean(axis=0)
        part._m2 = ((xs - part._mean) ** 2).sum(axis=0)
        return self.merge(part)

    def merge(self, other):
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.shape = other.count, other.shape
            self._mean, self._m2 = other._mean.copy(), other._m2.copy()
            return self
        if other.shape != self.shape:
            raise DimensionError(f"cannot merge shapes {self.shape} and {other.shape}")
        n = self.count + other.count
        delta = other._mean - self._mean
        self._mean = self._mean + delta * (other.count / n)
        self._m2 = self._m2 + other._m2 + delta**2 * (self.count * other.count / n)
        self.count = n
        return self

    @property
    def mean(self):
        if self.count == 0:
            raise ConfigurationError("no samples accumulated")
        return self._mean.copy()

    @property
    def variance(self):
        """Unbiased (``n - 1``) sample variance."""
        if self.count < 2:
            raise ConfigurationError("variance needs at least 2 samples")
        return np.maximum(self._m2 / (self.count - 1), 0.0)


def mc_statistics(solutions):
    """Entrywise sample mean and unbiased variance of an iterable of matrices, in one pass."""
    acc = RunningMoments()
    for U in solutions:
        acc.push(getattr(U, "values", U))
    if acc.count < 2:
        raise ConfigurationError(f"need at least 2 samples, got {acc.count}")
    return acc.mean, acc.variance


def normalized_error(U_ref, U_sur):
    """Frobenius-norm relative error ``||U_ref - U_sur|| / ||U_ref||``."""
    U_ref = np.asarray(getattr(U_ref, "values", U_ref), dtype=float)
    U_sur = np.asarray(getattr(U_sur, "values", U_sur), dtype=float)
    if U_ref.shape != U_sur.shape:
        raise DimensionError(f"shape mismatch {U_ref.shape} vs {U_sur.shape}")
    denom = np.linalg.norm(U_ref)
    if denom == 0.0:
        raise MetricError("normalized error undefined for a zero reference")
    return float(np.linalg.norm(U_ref - U_sur) / denom)


def average_normalized_error(refs, surs):
    refs, surs = list(refs), list(surs)
    if len(refs) != len(surs):
        raise DimensionError(f"{len(refs)} references vs {len(surs)} surrogates")
    if not refs:
        raise MetricError("average of an empty error list")
    return float(np.mean([normalized_error(r, s) for r, s in zip(refs, surs)]))


@dataclass
class PdfEstimate:
    grid: np.ndarray = None
    density: np.ndarray = None
    bandwidth: float = 0.0
    point_mass: bool = False
    location: float = None  # value of the point mass when ``point_mass`` is set


def silverman_bandwidth(samples):
    """Silverman's rule of thumb ``0.9 * min(sd, IQR / 1.34) * n^(-1/5)``."""
    x = np.asarray(samples, dtype=float)
    sd = x.std(ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * x.size ** (-0.2)


def pdf_estimate(samples, grid=None, n_grid=512, chunk=4096):
    """Gaussian kernel density estimate.

    Without ``grid`` the density is evaluated on ``n_grid`` points spanning
    the sample range widened by five bandwidths on each side, which holds
    essentially all of the kernel mass.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 100:
        raise ConfigurationError(f"density estimate needs >= 100 samples, got {x.size}")
    if np.ptp(x) == 0.0:
        return PdfEstimate(point_mass=True, location=float(x[0]))
    h = silverman_bandwidth(x)
    if grid is None:
        grid = np.linspace(x.min() - 5 * h, x.max() + 5 * h, n_grid)
    grid = np.asarray(grid, dtype=float)
    dens = np.zeros(grid.shape)
    for start in range(0, x.size, chunk):
        block = x[start : start + chunk]
        dens += np.exp(-0.5 * ((grid[:, None] - block[None, :]) / h) ** 2).sum(axis=1)
    dens /= x.size * h * np.sqrt(2 * np.pi)
    return PdfEstimate(grid=grid, density=dens, bandwidth=float(h))


@dataclass
class McReport:
    mean: np.ndarray
    variance: np.ndarray
    n_samples: int
    errors: dict = field(default_factory=dict)
    pdfs: dict = field(default_factory=dict)
    ledger: dict = field(default_factory=dict)
    histories: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
