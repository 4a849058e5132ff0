"""One-dimensional probability densities used as targets, proposals and
test measures.

Every density exposes vectorized ``pdf``, ``log_pdf``, ``cdf``, a
``sample`` method taking an explicit numpy Generator, and a generic
``quantile`` found by bisection on the cdf.  Instances are immutable
after construction and safe to share across workers.
"""

from __future__ import annotations

import math
import re

import numpy as np
from scipy.special import gammainc, gammaln, ndtr

from .errors import InvalidParameter, NotAbsolutelyContinuous

__all__ = [
    "Density",
    "Normal",
    "Uniform",
    "Exponential",
    "Gamma",
    "Weibull",
    "MixtureDensity",
    "make_density",
    "radon_nikodym",
    "parse_density",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _as_output(x, out):
    """Return a scalar when the input was scalar, else the array."""
    if np.ndim(x) == 0:
        return float(out)
    return out


class Density:
    """Base class; subclasses set ``support`` and the evaluation methods."""

    support = (-np.inf, np.inf)

    def pdf(self, x):
        out = np.exp(self.log_pdf(np.asarray(x, dtype=float)))
        return _as_output(x, out)

    def log_pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def sample(self, rng, size=None):
        raise NotImplementedError

    def quantile(self, p):
        """Generalized inverse cdf by bisection (supports are expanded
        geometrically until the quantile is bracketed)."""
        if not 0.0 < p < 1.0:
            raise ValueError("quantile level must be in (0, 1)")
        lo, hi = self.support
        if not np.isfinite(lo):
            anchor = hi if np.isfinite(hi) else 0.0
            lo, step = anchor - 1.0, 1.0
            while self.cdf(lo) > p:
                step *= 2.0
                lo -= step
        if not np.isfinite(hi):
            anchor = self.support[0] if np.isfinite(self.support[0]) else 0.0
            hi, step = anchor + 1.0, 1.0
            while self.cdf(hi) < p:
                step *= 2.0
                hi += step
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if self.cdf(mid) < p:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


class Normal(Density):
    def __init__(self, mean, sd):
        if sd <= 0:
            raise InvalidParameter(f"normal sd must be positive, got {sd}")
        self.mean = float(mean)
        self.sd = float(sd)

    def log_pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sd
        out = -0.5 * z * z - math.log(self.sd) - _LOG_SQRT_2PI
        return _as_output(x, out)

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sd
        return _as_output(x, ndtr(z))

    def sample(self, rng, size=None):
        return self.mean + self.sd * rng.standard_normal(size)

    def __repr__(self):
        return f"Normal(mean={self.mean}, sd={self.sd})"


class Uniform(Density):
    def __init__(self, lo, hi):
        if not lo < hi:
            raise InvalidParameter(f"uniform needs lo < hi, got [{lo}, {hi}]")
        self.lo = float(lo)
        self.hi = float(hi)
        self.support = (self.lo, self.hi)
        self._log_h = -math.log(self.hi - self.lo)

    def log_pdf(self, x):
        xa = np.asarray(x, dtype=float)
        inside = (xa >= self.lo) & (xa <= self.hi)
        out = np.where(inside, self._log_h, -np.inf)
        return _as_output(x, out)

    def cdf(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.clip((xa - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        return _as_output(x, out)

    def sample(self, rng, size=None):
        return self.lo + (self.hi - self.lo) * rng.random(size)

    def __repr__(self):
        return f"Uniform({self.lo}, {self.hi})"


class Exponential(Density):
    support = (0.0, np.inf)

    def __init__(self, rate):
        if rate <= 0:
            raise InvalidParameter(f"exponential rate must be positive, got {rate}")
        self.rate = float(rate)

    def log_pdf(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.where(xa >= 0.0, math.log(self.rate) - self.rate * xa, -np.inf)
        return _as_output(x, out)

    def cdf(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.where(xa >= 0.0, -np.expm1(-self.rate * np.maximum(xa, 0.0)), 0.0)
        return _as_output(x, out)

    def sample(self, rng, size=None):
        return -np.log1p(-rng.random(size)) / self.rate

    def __repr__(self):
        return f"Exponential(rate={self.rate})"


class Gamma(Density):
    """Gamma in the shape-rate convention: pdf(x) ∝ x^(shape-1) e^(-rate x)."""

    support = (0.0, np.inf)

    def __init__(self, shape, rate):
        if shape <= 0 or rate <= 0:
            raise InvalidParameter(
                f"gamma shape and rate must be positive, got ({shape}, {rate})"
            )
        self.shape = float(shape)
        self.rate = float(rate)
        self._log_norm = self.shape * math.log(self.rate) - gammaln(self.shape)

    def log_pdf(self, x):
        xa = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            body = self._log_norm + (self.shape - 1.0) * np.log(xa) - self.rate * xa
        out = np.where(xa > 0.0, body, -np.inf)
        return _as_output(x, out)

    def cdf(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.where(xa > 0.0, gammainc(self.shape, self.rate * np.maximum(xa, 0.0)), 0.0)
        return _as_output(x, out)

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def __repr__(self):
        return f"Gamma(shape={self.shape}, rate={self.rate})"


class Weibull(Density):
    """Weibull in the shape-scale convention: cdf(x) = 1 - exp(-(x/scale)^shape)."""

    support = (0.0, np.inf)

    def __init__(self, shape, scale):
        if shape <= 0 or scale <= 0:
            raise InvalidParameter(
                f"weibull shape and scale must be positive, got ({shape}, {scale})"
            )
        self.shape = float(shape)
        self.scale = float(scale)

    def log_pdf(self, x):
        xa = np.asarray(x, dtype=float)
        z = xa / self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            body = (
                math.log(self.shape / self.scale)
                + (self.shape - 1.0) * np.log(z)
                - z ** self.shape
            )
        out = np.where(xa > 0.0, body, -np.inf)
        return _as_output(x, out)

    def cdf(self, x):
        xa = np.asarray(x, dtype=float)
        z = np.maximum(xa, 0.0) / self.scale
        out = np.where(xa > 0.0, -np.expm1(-(z ** self.shape)), 0.0)
        return _as_output(x, out)

    def sample(self, rng, size=None):
        u = rng.random(size)
        return self.scale * (-np.log1p(-u)) ** (1.0 / self.shape)

    def __repr__(self):
        return f"Weibull(shape={self.shape}, scale={self.scale})"


class MixtureDensity(Density):
    """Finite mixture; weights must sum to one within 1e-12."""

    def __init__(self, components):
        if not components:
            raise InvalidParameter("mixture needs at least one component")
        weights = np.array([w for w, _ in components], dtype=float)
        if np.any(weights < 0.0) or np.any(weights > 1.0):
            raise InvalidParameter("mixture weights must lie in [0, 1]")
        if abs(float(np.sum(weights)) - 1.0) > 1e-12:
            raise InvalidParameter(
                f"mixture weights sum to {float(np.sum(weights))!r}, expected 1"
            )
        self.weights = weights
        self.densities = [d for _, d in components]
        self.support = (
            min(d.support[0] for d in self.densities),
            max(d.support[1] for d in self.densities),
        )

    @property
    def components(self):
        return list(zip(self.weights.tolist(), self.densities))

    def pdf(self, x):
        xa = np.asarray(x, dtype=float)
        out = sum(w * d.pdf(xa) for w, d in zip(self.weights, self.densities))
        return _as_output(x, out)

    def log_pdf(self, x):
        xa = np.asarray(x, dtype=float)
        logs = np.stack(
            [np.log(w) + d.log_pdf(xa) for w, d in zip(self.weights, self.densities)]
        )
        top = np.max(logs, axis=0)
        safe_top = np.where(np.isfinite(top), top, 0.0)
        out = safe_top + np.log(np.sum(np.exp(logs - safe_top), axis=0))
        out = np.where(np.isfinite(top), out, -np.inf)
        return _as_output(x, out)

    def cdf(self, x):
        xa = np.asarray(x, dtype=float)
        out = sum(w * d.cdf(xa) for w, d in zip(self.weights, self.densities))
        return _as_output(x, out)

    def sample(self, rng, size=None):
        n = 1 if size is None else int(np.prod(size))
        idx = rng.choice(len(self.densities), size=n, p=self.weights)
        draws = np.empty(n)
        for k, d in enumerate(self.densities):
            mask = idx == k
            m = int(np.sum(mask))
            if m:
                draws[mask] = np.asarray(d.sample(rng, m))
        if size is None:
            return float(draws[0])
        return draws.reshape(size)

    def __repr__(self):
        parts = ", ".join(f"{w}*{d!r}" for w, d in self.components)
        return f"MixtureDensity({parts})"


_FAMILIES = {
    "normal": (Normal, 2),
    "uniform": (Uniform, 2),
    "exponential": (Exponential, 1),
    "gamma": (Gamma, 2),
    "weibull": (Weibull, 2),
}


def make_density(family, params):
    """Build a Density from a family name and a parameter vector.

    Parametrizations: normal(mean, sd), uniform(lo, hi),
    exponential(rate), gamma(shape, rate), weibull(shape, scale).
    For "mixture", params is a list of (weight, Density) pairs.
    """
    family = family.lower()
    if family == "mixture":
        return MixtureDensity(params)
    if family not in _FAMILIES:
        raise InvalidParameter(f"unknown density family {family!r}")
    cls, n_params = _FAMILIES[family]
    params = list(params)
    if len(params) != n_params:
        raise InvalidParameter(
            f"{family} expects {n_params} parameters, got {len(params)}"
        )
    return cls(*params)


# Alternative parameter conventions reachable from config strings only;
# converted to the canonical constructors above.
_SPEC_ALIASES = {
    "gamma_scale": lambda p: Gamma(p[0], 1.0 / p[1]),
    "weibull_rate": lambda p: Weibull(p[0], 1.0 / p[1]),
}

_MIX_SPLIT = re.compile(r"(?<![eE])\+")


def parse_density(spec):
    """Parse a density spec string such as ``normal:0,1`` or
    ``mixture:0.5*normal:5,2+0.5*normal:-3,1``."""
    spec = spec.strip()
    family, sep, rest = spec.partition(":")
    if not sep:
        raise InvalidParameter(f"malformed density spec {spec!r}")
    family = family.lower()
    if family == "mixture":
        components = []
        for part in _MIX_SPLIT.split(rest):
            weight_str, star, comp = part.partition("*")
            if not star:
                raise InvalidParameter(f"malformed mixture component {part!r}")
            components.append((float(weight_str), parse_density(comp)))
        return MixtureDensity(components)
    try:
        params = [float(tok) for tok in rest.split(",") if tok != ""]
    except ValueError as exc:
        raise InvalidParameter(f"bad numeric parameter in {spec!r}") from exc
    if family in _SPEC_ALIASES:
        if len(params) != 2:
            raise InvalidParameter(f"{family} expects 2 parameters")
        return _SPEC_ALIASES[family](params)
    return make_density(family, params)


def radon_nikodym(mu, pi):
    """Density ratio d(mu)/d(pi) as a vectorized function of x.

    Requires support(mu) contained in support(pi); the returned function
    is zero outside the support of mu and evaluates mu.pdf/pi.pdf
    elsewhere on the support of pi.
    """
    if mu.support[0] < pi.support[0] or mu.support[1] > pi.support[1]:
        raise NotAbsolutelyContinuous(
            f"support {mu.support} not contained in {pi.support}"
        )

    def ratio(x):
        num = np.asarray(mu.pdf(x), dtype=float)
        den = np.asarray(pi.pdf(x), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(den > 0.0, num / den, 0.0)
        return _as_output(x, out)

    return ratio
