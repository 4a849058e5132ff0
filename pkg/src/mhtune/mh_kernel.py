"""Metropolis-Hastings transition kernels K(x,dy) = a(x,y)dy + r(x)delta_x.

Acceptance densities are evaluated in log space throughout: the Hastings
factor is applied as min(0, log-ratio), which keeps thin-tailed proposal
ratios (e.g. sd 0.2 proposals against a unit normal) from overflowing.
Rejection probabilities use the equivalent complement form
r(x) = integral of (1 - Hastings factor) J(y|x) dy, which is exact at
zero and keeps relative accuracy when r is tiny.
"""

from __future__ import annotations

import re

import numpy as np

from .distributions import make_density
from .errors import InvalidParameter, TargetZeroAtCurrentState
from .quadrature import QuadratureConfig, integrate_many, truncation_interval

__all__ = [
    "IndependentProposal",
    "RandomWalkProposal",
    "GeneralProposal",
    "ProposalFamily",
    "MhKernel",
    "parse_proposal",
]


class IndependentProposal:
    """Proposal that ignores the current state: J(y|x) = density(y)."""

    kind = "independent"

    def __init__(self, density):
        self.density = density

    def log_pdf(self, y, x):
        out = self.density.log_pdf(y)
        return np.broadcast_to(out, np.broadcast_shapes(np.shape(y), np.shape(x)))

    def sample(self, x, rng):
        return self.density.sample(rng)

    def truncation_densities(self):
        return [self.density]

    def expand_domain(self, interval, tail_mass):
        lo, hi = truncation_interval([self.density], tail_mass)
        return (min(interval[0], lo), max(interval[1], hi))

    def __repr__(self):
        return f"IndependentProposal({self.density!r})"


class RandomWalkProposal:
    """Additive-increment proposal: J(y|x) = increment_density(y - x)."""

    kind = "random_walk"

    def __init__(self, increment):
        self.increment = increment

    def log_pdf(self, y, x):
        return self.increment.log_pdf(np.asarray(y) - np.asarray(x))

    def sample(self, x, rng):
        return x + self.increment.sample(rng)

    def truncation_densities(self):
        return []

    def expand_domain(self, interval, tail_mass):
        lo, hi = truncation_interval([self.increment], tail_mass)
        return (interval[0] + min(lo, 0.0), interval[1] + max(hi, 0.0))

    def __repr__(self):
        return f"RandomWalkProposal({self.increment!r})"


class GeneralProposal:
    """Wrapper for arbitrary conditional densities supplied as callables."""

    kind = "general"

    def __init__(self, log_pdf_fn, sample_fn, trunc_densities=()):
        self._log_pdf = log_pdf_fn
        self._sample = sample_fn
        self._trunc = list(trunc_densities)

    def log_pdf(self, y, x):
        return self._log_pdf(y, x)

    def sample(self, x, rng):
        return self._sample(x, rng)

    def truncation_densities(self):
        return list(self._trunc)

    def expand_domain(self, interval, tail_mass):
        return interval


_NAME = re.compile(r"^[A-Za-z_]\w*$")

_KINDS = {"imh": "independent", "rwm": "random_walk"}


class ProposalFamily:
    """Family of proposals indexed by named hyperparameters.

    ``param_spec`` entries are numbers (fixed) or strings (hyperparameter
    names bindable to grid axes); ``at`` resolves the names and returns a
    concrete proposal.
    """

    def __init__(self, kind, density_family, param_spec):
        if kind not in ("independent", "random_walk"):
            raise InvalidParameter(f"unknown proposal kind {kind!r}")
        self.kind = kind
        self.density_family = density_family
        self.param_spec = tuple(param_spec)
        names = []
        for tok in self.param_spec:
            if isinstance(tok, str):
                if not _NAME.match(tok):
                    raise InvalidParameter(f"bad hyperparameter name {tok!r}")
                if tok not in names:
                    names.append(tok)
        self.hyperparameter_names = tuple(names)

    def at(self, values=None, **kwargs):
        """Bind hyperparameters; ``values`` maps name -> number."""
        binding = dict(values or {})
        binding.update(kwargs)
        unknown = set(binding) - set(self.hyperparameter_names)
        if unknown:
            raise InvalidParameter(f"unknown hyperparameters {sorted(unknown)}")
        params = []
        for tok in self.param_spec:
            if isinstance(tok, str):
                if tok not in binding:
                    raise InvalidParameter(f"hyperparameter {tok!r} not bound")
                params.append(float(binding[tok]))
            else:
                params.append(float(tok))
        density = make_density(self.density_family, params)
        if self.kind == "independent":
            return IndependentProposal(density)
        return RandomWalkProposal(density)

    def __repr__(self):
        spec = ",".join(str(t) for t in self.param_spec)
        return f"ProposalFamily({self.kind}, {self.density_family}:{spec})"


def parse_proposal(spec):
    """Parse a proposal spec such as ``imh:normal:m,s`` or
    ``rwm:normal:0,s``; bare names become bindable hyperparameters."""
    parts = spec.strip().split(":")
    if len(parts) != 3:
        raise InvalidParameter(f"malformed proposal spec {spec!r}")
    kind_tok, family, param_str = parts
    kind = _KINDS.get(kind_tok.lower())
    if kind is None:
        raise InvalidParameter(f"unknown proposal kind {kind_tok!r}")
    tokens = []
    for tok in param_str.split(","):
        tok = tok.strip()
        try:
            tokens.append(float(tok))
        except ValueError:
            tokens.append(tok)
    return ProposalFamily(kind, family.lower(), tokens)


class MhKernel:
    """Target + concrete proposal, with acceptance density, rejection
    probability and the action of the kernel on test functions.

    Rejection probabilities are memoized per evaluation point (keyed by
    the float value, i.e. the bit pattern, plus the integration interval)
    because the rate-bound outer integrals revisit the same nodes.
    """

    def __init__(self, target, proposal, domain=None, cfg=None, extra_densities=()):
        self.target = target
        self.proposal = proposal
        self.cfg = cfg or QuadratureConfig()
        if domain is None:
            dens = [target] + proposal.truncation_densities() + list(extra_densities)
            domain = truncation_interval(dens, self.cfg.tail_mass)
            domain = proposal.expand_domain(domain, self.cfg.tail_mass)
        self.domain = (float(domain[0]), float(domain[1]))
        bps = set()
        for d in [target] + proposal.truncation_densities() + list(extra_densities):
            for edge in d.support:
                if np.isfinite(edge) and self.domain[0] < edge < self.domain[1]:
                    bps.add(float(edge))
        self.breakpoints = tuple(sorted(bps))
        self._rej_memo = {}
        self._independent = proposal.kind == "independent"
        # Log densities stay finite on the whole domain when every
        # involved support covers it, letting the hot integrands skip
        # their NaN/-inf guards.
        cover = [target] + proposal.truncation_densities()
        self._guards_needed = any(
            d.support[0] > self.domain[0] or d.support[1] < self.domain[1]
            for d in cover
        )

    def _interval(self, interval):
        if interval is None:
            return self.domain, self.breakpoints
        lo, hi = float(interval[0]), float(interval[1])
        bps = tuple(b for b in self.breakpoints if lo < b < hi)
        return (lo, hi), bps

    # -- acceptance ---------------------------------------------------

    def _parts_factory(self, xs):
        """Build fn(y) -> (dmin, log_j_y) for a fixed batch of states,
        where dmin = min(0, Hastings log ratio) with shape (n, m) and
        log_j_y holds log J(y|x).  The independent-proposal path hoists
        all x-only quantities out of the per-node evaluation."""
        xs = np.asarray(xs, dtype=float)
        guards = self._guards_needed
        if self._independent:
            dens = self.proposal.density
            target = self.target
            with np.errstate(invalid="ignore"):
                l_x = target.log_pdf(xs) - dens.log_pdf(xs)
            l_x = l_x[:, None]

            def parts(y):
                log_j_y = dens.log_pdf(y)[None, :]
                with np.errstate(invalid="ignore"):
                    d = (target.log_pdf(y)[None, :] - log_j_y) - l_x
                if guards:
                    d = np.where(np.isnan(d), -np.inf, d)
                return np.minimum(0.0, d), log_j_y

            return parts

        xs_col = xs[:, None]

        def parts(y):
            y_row = y[None, :]
            log_j_y = self.proposal.log_pdf(y_row, xs_col)
            num = self.target.log_pdf(y_row) + self.proposal.log_pdf(xs_col, y_row)
            den = self.target.log_pdf(xs_col) + log_j_y
            with np.errstate(invalid="ignore"):
                d = num - den
            if guards:
                d = np.where(np.isnan(d), -np.inf, d)
            return np.minimum(0.0, d), log_j_y

        return parts

    def log_acceptance_density(self, x, y):
        """log a(x,y); -inf where the acceptance density vanishes.

        The 0/0 convention (both numerator and denominator of the
        Hastings ratio vanishing) yields a(x,y) = 0.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        log_j = self.proposal.log_pdf(y, x)
        num = self.target.log_pdf(y) + self.proposal.log_pdf(x, y)
        den = self.target.log_pdf(x) + log_j
        with np.errstate(invalid="ignore"):
            diff = num - den
        diff = np.where(np.isnan(diff), -np.inf, diff)
        out = np.minimum(0.0, diff) + log_j
        return np.where(np.isneginf(log_j), -np.inf, out)

    def acceptance_density(self, x, y):
        """a(x,y) = min{1, pi(y)J(x|y) / (pi(x)J(y|x))} J(y|x)."""
        if np.ndim(x) == 0 and not np.isfinite(self.target.log_pdf(x)):
            raise TargetZeroAtCurrentState(f"target density vanishes at x={x}")
        out = np.exp(self.log_acceptance_density(x, y))
        if np.ndim(x) == 0 and np.ndim(y) == 0:
            return float(out)
        return out

    # -- rejection ----------------------------------------------------

    @staticmethod
    def _reject_row(parts, y):
        """Complement-form integrand (1 - Hastings factor) J(y|x); exact
        zeros where every proposal from x is accepted."""
        dmin, log_j_y = parts(y)
        return np.exp(log_j_y) * -np.expm1(dmin)

    def rejection_prob_batch(self, xs, interval=None):
        """Rejection probabilities r(x) for an array of states.

        Returns (values, error_estimates); values lie in [0, 1].
        """
        xs = np.asarray(xs, dtype=float)
        (lo, hi), bps = self._interval(interval)
        vals = np.empty(xs.size)
        errs = np.empty(xs.size)
        missing, missing_idx = [], []
        for i, xv in enumerate(xs.ravel()):
            hit = self._rej_memo.get((float(xv), lo, hi))
            if hit is None:
                missing.append(float(xv))
                missing_idx.append(i)
            else:
                vals[i], errs[i] = hit
        if missing:
            mx = np.asarray(missing)
            parts = self._parts_factory(mx)
            fresh, ferr, _ = integrate_many(
                lambda y: self._reject_row(parts, y),
                (lo, hi),
                self.cfg,
                bps,
                n_comp=mx.size,
            )
            fresh = np.clip(fresh, 0.0, 1.0)
            for j, i in enumerate(missing_idx):
                self._rej_memo[(missing[j], lo, hi)] = (float(fresh[j]), float(ferr[j]))
                vals[i], errs[i] = fresh[j], ferr[j]
        return vals.reshape(xs.shape), errs.reshape(xs.shape)

    def rejection_prob(self, x):
        """r(x) = 1 - integral of a(x, .), clamped to [0, 1].

        Computed in the equivalent complement form, which avoids the
        1 - (nearly 1) cancellation when most proposals are accepted.
        """
        vals, _ = self.rejection_prob_batch(np.array([float(x)]))
        return float(vals[0])

    # -- kernel action ------------------------------------------------

    def apply_kernel_batch(self, u, xs, interval=None):
        """(Ku)(x) for an array of states x.

        Evaluates the absolutely continuous part and the rejection
        probabilities on one shared adaptive y-mesh.  Returns
        (values, error_estimates).
        """
        xs = np.asarray(xs, dtype=float)
        n = xs.size
        (lo, hi), bps = self._interval(interval)
        parts = self._parts_factory(xs.ravel())

        def fmat(y):
            dmin, log_j_y = parts(y)
            j_y = np.exp(log_j_y)
            uy = np.asarray(u(y), dtype=float)[None, :]
            out = np.empty((2 * n, y.size))
            out[:n] = uy * j_y * np.exp(dmin)
            out[n:] = j_y * -np.expm1(dmin)
            return out

        vals, errs, _ = integrate_many(fmat, (lo, hi), self.cfg, bps, n_comp=2 * n)
        r = np.clip(vals[n:], 0.0, 1.0)
        for i, xv in enumerate(xs.ravel()):
            self._rej_memo.setdefault(
                (float(xv), lo, hi), (float(r[i]), float(errs[n + i]))
            )
        ux = np.asarray(u(xs.ravel()), dtype=float)
        values = (vals[:n] + r * ux).reshape(xs.shape)
        errors = (errs[:n] + errs[n:] * np.abs(ux)).reshape(xs.shape)
        return values, errors

    def apply_kernel(self, u, x):
        """(Ku)(x) = integral of u(y) a(x,y) dy + r(x) u(x)."""
        vals, _ = self.apply_kernel_batch(u, np.array([float(x)]))
        return float(vals[0])

    def sample_step(self, x, rng):
        """One MH transition from x; returns (next_state, accepted)."""
        y = float(self.proposal.sample(x, rng))
        log_j = self.proposal.log_pdf(y, x)
        num = self.target.log_pdf(y) + self.proposal.log_pdf(x, y)
        den = self.target.log_pdf(x) + log_j
        if not np.isfinite(den) and not np.isfinite(self.target.log_pdf(x)):
            raise TargetZeroAtCurrentState(f"target density vanishes at x={x}")
        with np.errstate(invalid="ignore"):
            log_ratio = num - den
        if np.isnan(log_ratio):
            return x, False
        if log_ratio >= 0.0 or np.log(rng.random()) < log_ratio:
            return y, True
        return x, False

    def __repr__(self):
        return f"MhKernel(target={self.target!r}, proposal={self.proposal!r})"
