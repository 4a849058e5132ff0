"""Adaptive nested quadrature (Gauss-Kronrod 7-15) for 1d and 2d integrals.

All integrands must be numpy-vectorized: they receive arrays of evaluation
nodes and return arrays of the same trailing shape.  The embedded G7/K15
pair supplies the per-panel error estimate; panels whose error exceeds
their share of the tolerance budget are bisected until the budget is met
or ``max_subdivisions`` panels exist.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteIntegrand

__all__ = [
    "QuadratureConfig",
    "IntegralResult",
    "integrate_1d",
    "integrate_many",
    "integrate_2d",
    "truncation_interval",
]

# Kronrod-15 abscissae on [-1, 1] and weights; the embedded Gauss-7 rule
# uses the odd-indexed abscissae.  Values from the standard tables.
_XK = np.array([
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0,
    0.207784955007898, 0.405845151377397, 0.586087235467691,
    0.741531185599394, 0.864864423359769, 0.949107912342759,
    0.991455371120813,
])
_WK = np.array([
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
    0.204432940075298, 0.190350578064785, 0.169004726639267,
    0.140653259715525, 0.104790010322250, 0.063092092629979,
    0.022935322010529,
])
_WG = np.array([
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870,
])


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and limits shared by every integral in the package."""

    abs_tol: float = 1e-9
    rel_tol: float = 1e-7
    max_subdivisions: int = 2000
    tail_mass: float = 1e-12

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0 or self.tail_mass <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


@dataclass(frozen=True)
class IntegralResult:
    """Value of an integral plus its accumulated panel error estimate."""

    value: float
    error_estimate: float
    converged: bool


def _initial_edges(lo, hi, breakpoints, min_panels=8):
    """Panel edges: interval endpoints, interior breakpoints, then the
    longest segments bisected until at least ``min_panels`` panels exist."""
    pts = [lo, hi]
    for b in breakpoints:
        if lo < b < hi:
            pts.append(float(b))
    edges = sorted(set(pts))
    while len(edges) - 1 < min_panels:
        widths = np.diff(edges)
        i = int(np.argmax(widths))
        edges.insert(i + 1, 0.5 * (edges[i] + edges[i + 1]))
    return np.asarray(edges)


def _panel_rule(fmat, a, b, n_comp):
    """Apply G7/K15 to panels [a_i, b_i].

    Returns (values, errors) of shape (n_comp, n_panels).  ``fmat`` maps a
    flat node array to an (n_comp, n_nodes) matrix.
    """
    half = 0.5 * (b - a)
    center = 0.5 * (a + b)
    nodes = center[:, None] + half[:, None] * _XK[None, :]
    flat = nodes.reshape(-1)
    vals = np.asarray(fmat(flat), dtype=float)
    if vals.shape != (n_comp, flat.size):
        raise ValueError(
            f"integrand returned shape {vals.shape}, expected {(n_comp, flat.size)}"
        )
    if not np.all(np.isfinite(vals)):
        bad = flat[np.where(~np.isfinite(vals))[1][0]]
        raise NonFiniteIntegrand(f"integrand not finite near x={bad!r}")
    f = vals.reshape(n_comp, a.size, 15)
    resk = f @ _WK
    resg = f[:, :, 1::2] @ _WG
    values = half * resk
    # QUADPACK-style sharpened estimate from the nested-rule difference.
    mean = resk[:, :, None] * 0.5
    resasc = half * (np.abs(f - mean) @ _WK)
    raw = half * np.abs(resk - resg)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.minimum(1.0, (200.0 * raw / resasc) ** 1.5)
    errors = np.where(resasc > 0.0, resasc * scale, raw)
    return values, errors


def _adaptive(fmat, lo, hi, cfg, breakpoints, n_comp, n_aux=0):
    """Shared adaptive loop.

    Returns (values, errors, converged) with values/errors of shape
    (n_comp,).  The last ``n_aux`` components ride along passively: they
    are integrated on the shared mesh but do not drive refinement or the
    convergence test.  The reduction order is fixed (panels sorted by
    left edge) so results do not depend on refinement bookkeeping.
    """
    n_primary = n_comp - n_aux
    edges = _initial_edges(lo, hi, breakpoints)
    a = edges[:-1].copy()
    b = edges[1:].copy()
    vals, errs = _panel_rule(fmat, a, b, n_comp)

    while True:
        order = np.argsort(a, kind="stable")
        totals = np.sum(vals[:, order], axis=1)
        tol = np.maximum(
            cfg.abs_tol, cfg.rel_tol * np.abs(totals[:n_primary])
        )
        tot_err = np.sum(errs[:, order], axis=1)
        if np.all(tot_err[:n_primary] <= tol):
            return totals, tot_err, True
        n = a.size
        if n >= cfg.max_subdivisions:
            return totals, tot_err, False
        # Split every panel holding more than its share of some component's
        # budget; always at least the worst panel qualifies.
        score = np.max(errs[:n_primary] / tol[:, None], axis=0) * n
        split = score > 1.0
        if not np.any(split):
            split = score == np.max(score)
        n_new = int(np.sum(split))
        if n + n_new > cfg.max_subdivisions:
            keep_idx = np.argsort(score)[::-1][: cfg.max_subdivisions - n]
            split = np.zeros(n, dtype=bool)
            split[keep_idx] = True
        sa, sb = a[split], b[split]
        mid = 0.5 * (sa + sb)
        new_a = np.concatenate([sa, mid])
        new_b = np.concatenate([mid, sb])
        new_vals, new_errs = _panel_rule(fmat, new_a, new_b, n_comp)
        keep = ~split
        a = np.concatenate([a[keep], new_a])
        b = np.concatenate([b[keep], new_b])
        vals = np.concatenate([vals[:, keep], new_vals], axis=1)
        errs = np.concatenate([errs[:, keep], new_errs], axis=1)


def integrate_1d(f, interval, cfg=None, breakpoints=()):
    """Integrate a scalar function over [lo, hi].

    Parameters
    ----------
    f : callable
        Vectorized integrand; called with a 1d node array.
    interval : (float, float)
        Integration limits, lo < hi.
    cfg : QuadratureConfig, optional
    breakpoints : iterable of float, optional
        Known kink locations promoted to panel edges.
    """
    cfg = cfg or QuadratureConfig()
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")

    def fmat(x):
        out = np.asarray(f(x), dtype=float)
        return np.broadcast_to(out, (1, x.size))

    values, errors, converged = _adaptive(fmat, lo, hi, cfg, breakpoints, 1)
    return IntegralResult(float(values[0]), float(errors[0]), bool(converged))


def integrate_many(fmat, interval, cfg=None, breakpoints=(), n_comp=None, n_aux=0):
    """Integrate a vector-valued integrand component-wise on a shared
    adaptively refined mesh.

    ``fmat`` maps a node array of shape (n,) to an (n_comp, n) matrix.
    Returns (values, errors, converged) with arrays of shape (n_comp,).
    Each of the first n_comp - n_aux components meets its own tolerance
    when ``converged`` is True; trailing aux components are integrated
    passively (used for error-sensitivity bookkeeping).
    """
    cfg = cfg or QuadratureConfig()
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    if n_comp is None:
        probe = np.asarray(fmat(np.array([0.5 * (lo + hi)])), dtype=float)
        n_comp = probe.shape[0]
    return _adaptive(fmat, lo, hi, cfg, breakpoints, n_comp, n_aux)


def integrate_2d(f, region, cfg=None, breakpoints_x=(), breakpoints_y=()):
    """Iterated integral of f(x, y) over a rectangle.

    The outer x-integral is adaptive; at each batch of outer nodes the
    inner y-integrals run on one shared adaptive mesh (one component per
    outer node).  The reported error combines the outer nested-rule
    estimate with the integrated inner error estimates.
    """
    cfg = cfg or QuadratureConfig()
    (xlo, xhi), (ylo, yhi) = region
    xlo, xhi, ylo, yhi = float(xlo), float(xhi), float(ylo), float(yhi)
    if not (xlo < xhi and ylo < yhi):
        raise ValueError("empty integration rectangle")
    inner_cfg = QuadratureConfig(
        abs_tol=0.2 * cfg.abs_tol / (xhi - xlo),
        rel_tol=0.2 * cfg.rel_tol,
        max_subdivisions=cfg.max_subdivisions,
        tail_mass=cfg.tail_mass,
    )
    outer_cfg = QuadratureConfig(
        abs_tol=0.5 * cfg.abs_tol,
        rel_tol=0.5 * cfg.rel_tol,
        max_subdivisions=cfg.max_subdivisions,
        tail_mass=cfg.tail_mass,
    )
    inner_ok = True

    def outer_vals(x):
        nonlocal inner_ok

        def fy(y):
            return f(x[:, None], y[None, :])

        vals, errs, conv = integrate_many(
            fy, (ylo, yhi), inner_cfg, breakpoints_y, n_comp=x.size
        )
        inner_ok = inner_ok and conv
        return vals[None, :]

    values, errors, conv = _adaptive(
        outer_vals, xlo, xhi, outer_cfg, breakpoints_x, 1
    )
    value = float(values[0])
    # Converged inner integrals each meet err <= max(inner abs, inner rel
    # * |inner value|); integrating those targets over x bounds the inner
    # contribution without storing per-node estimates.
    inner_err = 0.2 * cfg.abs_tol + 0.2 * cfg.rel_tol * abs(value)
    err = float(errors[0]) + inner_err
    tol = max(cfg.abs_tol, cfg.rel_tol * abs(value))
    return IntegralResult(value, err, bool(conv and inner_ok and err <= tol))


def truncation_interval(densities, tail_mass):
    """Smallest interval holding >= 1 - tail_mass of every listed density.

    Finite support endpoints pass through unchanged; infinite ones are
    clipped at the tail_mass/2 and 1 - tail_mass/2 quantiles found by
    bisection on the cdf.
    """
    if not densities:
        raise ValueError("need at least one density")
    los, his = [], []
    for d in densities:
        lo, hi = d.support
        los.append(lo if np.isfinite(lo) else d.quantile(0.5 * tail_mass))
        his.append(hi if np.isfinite(hi) else d.quantile(1.0 - 0.5 * tail_mass))
    return (min(los), max(his))
