"""Parameter-space sampling: uniform boxes, log-normal marginals and Latin hypercubes.

Every random draw goes through :func:`substream`, which derives an
independent Philox generator from ``(seed, *keys)``. Keying streams by sample
index or stage name keeps results reproducible regardless of how work is
split across threads.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from caerom.errors import ConfigurationError


def substream(seed, *keys):
    """Counter-based generator for the stream addressed by ``(seed, *keys)``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    entropy += [k if isinstance(k, int) else int.from_bytes(str(k).encode(), "little") for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigurationError(f"uniform range needs lo < hi, got [{self.lo}, {self.hi}]")

    def ppf(self, q):
        return self.lo + (self.hi - self.lo) * np.asarray(q)

    def contains(self, v):
        return bool(self.lo <= v <= self.hi)

    def to_dict(self):
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class LogNormal:
    """Log-normal law specified by its own mean and standard deviation."""

    mean: float
    sd: float

    def __post_init__(self):
        if self.mean <= 0 or self.sd <= 0:
            raise ConfigurationError("log-normal mean and sd must be > 0")

    @property
    def mu_ln(self):
        return lognormal_params(self.mean, self.sd)[0]

    @property
    def sigma_ln(self):
        return lognormal_params(self.mean, self.sd)[1]

    def ppf(self, q):
        return np.exp(self.mu_ln + self.sigma_ln * stats.norm.ppf(q))

    def contains(self, v):
        return bool(v > 0)

    def to_dict(self):
        return {"kind": "lognormal", "mean": self.mean, "sd": self.sd}


def distribution_from_dict(d):
    kind = d.get("kind")
    if kind == "uniform":
        return Uniform(float(d["lo"]), float(d["hi"]))
    if kind == "lognormal":
        return LogNormal(float(d["mean"]), float(d["sd"]))
    raise ConfigurationError(f"unknown distribution kind {kind!r}")


@dataclass
class ParameterVector:
    values: np.ndarray
    names: list = field(default_factory=list)
    distributions: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if self.values.ndim != 1 or self.values.size < 1:
            raise ConfigurationError("a parameter vector needs at least one entry")
        if not self.names:
            self.names = [f"theta{i}" for i in range(self.values.size)]
        if len(self.names) != self.values.size:
            raise ConfigurationError("one name per parameter entry required")

    def in_support(self):
        return all(dist.contains(v) for dist, v in zip(self.distributions, self.values))


def lognormal_params(mean, sd):
    """``(mu_ln, sigma_ln)`` of the normal underlying a log-normal with the given mean and sd."""
    if mean <= 0 or sd <= 0:
        raise ConfigurationError("log-normal mean and sd must be > 0")
    var_ln = np.log1p((sd / mean) ** 2)
    return float(np.log(mean) - 0.5 * var_ln), float(np.sqrt(var_ln))


def sample_lognormal(mean, sd, n, seed):
    mu, sigma = lognormal_params(mean, sd)
    return substream(seed, "lognormal").lognormal(mu, sigma, size=int(n))


def sample_uniform(n, ranges, seed):
    """Plain Monte-Carlo design: ``(n, dim)`` points uniform in the box."""
    lo, hi = _box(ranges)
    u = substream(seed, "uniform").random((int(n), lo.size))
    return lo + (hi - lo) * u


def lhs_unit(n, dim, seed):
    """Latin hypercube in ``[0, 1)^dim``: one point per stratum ``[k/n, (k+1)/n)`` in every column."""
    if n < 1 or dim < 1:
        raise ConfigurationError("need n >= 1 and dim >= 1")
    rng = substream(seed, "lhs")
    jitter = rng.random((n, dim))
    strata = np.column_stack([rng.permutation(n) for _ in range(dim)])
    return (strata + jitter) / n


def lhs_sample(n, ranges, seed):
    """Latin hypercube design of ``n`` points in the box given by ``[(lo, hi), ...]``."""
    lo, hi = _box(ranges)
    return lo + (hi - lo) * lhs_unit(n, lo.size, seed)


def sample_design(n, distributions, seed, method="random"):
    """``(n, dim)`` draws with the given marginals, by plain sampling or LHS in probability space."""
    dim = len(distributions)
    if method == "lhs":
        q = lhs_unit(n, dim, seed)
    elif method == "random":
        q = substream(seed, "design").random((n, dim))
    else:
        raise ConfigurationError(f"unknown sampling method {method!r}")
    return np.column_stack([dist.ppf(q[:, j]) for j, dist in enumerate(distributions)])


def _box(ranges):
    box = np.asarray(ranges, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] < 1:
        raise ConfigurationError("ranges must be a list of (lo, hi) pairs")
    if np.any(box[:, 0] >= box[:, 1]):
        raise ConfigurationError("every range needs lo < hi")
    return box[:, 0], box[:, 1]
