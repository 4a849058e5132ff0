"""Rate-function bounds and large-deviation based tuning for
Metropolis-Hastings samplers."""

from .distributions import (
    Density,
    Exponential,
    Gamma,
    MixtureDensity,
    Normal,
    Uniform,
    Weibull,
    make_density,
    parse_density,
    radon_nikodym,
)
from .quadrature import (
    IntegralResult,
    QuadratureConfig,
    integrate_1d,
    integrate_2d,
    integrate_many,
    truncation_interval,
)

__version__ = "0.1.0"
