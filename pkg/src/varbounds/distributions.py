"""Integrated Pearson (continuous) and Cumulative Ord (discrete) family
members.

A continuous member IP(mu; delta, beta, gamma) has a density f whose
cumulative identity

    integral_{alpha}^{x} (mu - t) f(t) dt = q(x) f(x),   q(x) = delta x^2 + beta x + gamma,

holds on the whole line; a discrete member CO(mu; delta, beta, gamma)
satisfies the prefix-sum analogue

    sum_{k <= j} (mu - k) p(k) = q(j) p(j).

The quadratic q is the object every bound coefficient is built from.  The
catalog ships analytically known quadratics; everything else can be inferred
from the identity itself via :func:`infer_quadratic`, which doubles as the
membership oracle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from . import expectation as ex
from .errors import (InvalidParameterError, RankDeficientFitError,
                     UnknownDistributionError)

DENSITY_FLOOR = 1e-12  # relative to the max density on the grid
CONTINUOUS_RESIDUAL_TOL = 1e-8
DISCRETE_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class Quadratic:
    """q(x) = delta x^2 + beta x + gamma with the nondegeneracy condition
    |delta| + |beta| + |gamma| > 0."""

    delta: float
    beta: float
    gamma: float

    def __post_init__(self):
        coeffs = (self.delta, self.beta, self.gamma)
        if not all(math.isfinite(c) for c in coeffs):
            raise InvalidParameterError("quadratic coefficients must be finite")
        if abs(self.delta) + abs(self.beta) + abs(self.gamma) == 0.0:
            raise InvalidParameterError("quadratic must not vanish identically")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = (self.delta * x + self.beta) * x + self.gamma
        return out if out.shape else float(out)

    def as_tuple(self):
        return (self.delta, self.beta, self.gamma)


@dataclass(frozen=True)
class ContinuousIP:
    """Integrated Pearson member: mean, quadratic, open support interval,
    density evaluator and optional inverse-transform sampler."""

    mean: float
    q: Optional[Quadratic]
    support: tuple
    density: Callable
    sampler: Optional[Callable] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    is_discrete = False

    def __post_init__(self):
        alpha, omega = self.support
        if not alpha < omega:
            raise InvalidParameterError("support interval is empty")

    def __repr__(self):
        return f"ContinuousIP({self.name}, mean={self.mean}, q={self.q})"


@dataclass(frozen=True)
class DiscreteCO:
    """Cumulative Ord member: mean, quadratic, integer support interval,
    pmf evaluator and optional inverse-transform sampler."""

    mean: float
    q: Optional[Quadratic]
    support: tuple
    pmf: Callable
    sampler: Optional[Callable] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    is_discrete = True

    def __post_init__(self):
        alpha, omega = self.support
        if not alpha <= omega:
            raise InvalidParameterError("support interval is empty")

    def __repr__(self):
        return f"DiscreteCO({self.name}, mean={self.mean}, q={self.q})"


Spec = ContinuousIP | DiscreteCO


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def _require(cond, message):
    if not cond:
        raise InvalidParameterError(message)


def _param(params, *names, default=None):
    for name in names:
        if name in params:
            return params[name]
    if default is not None:
        return default
    raise InvalidParameterError(f"missing parameter {names[0]!r}")


def _normal(params):
    m = float(_param(params, "mean", default=0.0))
    v = float(_param(params, "var", default=1.0))
    _require(v > 0, "normal variance must be positive")
    norm = 1.0 / math.sqrt(2.0 * math.pi * v)

    def density(x):
        return norm * np.exp(-0.5 * (np.asarray(x, dtype=float) - m) ** 2 / v)

    def sampler(u):
        return m + math.sqrt(v) * special.ndtri(u)

    return ContinuousIP(m, Quadratic(0.0, 0.0, v), (-math.inf, math.inf),
                        density, sampler, "normal", {"mean": m, "var": v})


def _gamma(params):
    a = float(_param(params, "shape"))
    th = float(_param(params, "scale", default=1.0))
    _require(a > 0 and th > 0, "gamma shape and scale must be positive")
    logc = -special.gammaln(a) - a * math.log(th)

    def density(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        pos = x > 0
        xp = x[pos]
        out[pos] = np.exp(logc + (a - 1.0) * np.log(xp) - xp / th)
        return out

    def sampler(u):
        return th * special.gammaincinv(a, u)

    return ContinuousIP(a * th, Quadratic(0.0, th, 0.0), (0.0, math.inf),
                        density, sampler, "gamma", {"shape": a, "scale": th})


def _beta(params):
    a = float(_param(params, "a"))
    b = float(_param(params, "b"))
    _require(a > 0 and b > 0, "beta parameters must be positive")
    logc = -special.betaln(a, b)
    s = a + b

    def density(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        inside = (x > 0) & (x < 1)
        xi = x[inside]
        out[inside] = np.exp(logc + (a - 1.0) * np.log(xi)
                             + (b - 1.0) * np.log1p(-xi))
        return out

    def sampler(u):
        return special.betaincinv(a, b, u)

    return ContinuousIP(a / s, Quadratic(-1.0 / s, 1.0 / s, 0.0), (0.0, 1.0),
                        density, sampler, "beta", {"a": a, "b": b})


def _mask_pmf(log_pmf, valid):
    """pmf evaluator returning exp(log_pmf) on valid integer points, else 0."""

    def pmf(k):
        k = np.asarray(k, dtype=float)
        ok = valid(k) & (np.floor(k) == k)
        out = np.zeros(k.shape)
        kk = k[ok]
        if kk.size:
            out[ok] = np.exp(log_pmf(kk))
        return out

    return pmf


def _table_sampler(spec_pmf, support, mass_tol=1e-15):
    """Inverse-CDF sampler backed by a cumulative table (built lazily)."""
    state = {}

    def sampler(u):
        if "cdf" not in state:
            holder = _SupportView(spec_pmf, support)
            js, _ = ex.truncated_support(holder, mass_tol)
            pm = np.asarray(spec_pmf(js), dtype=float)
            state["js"] = js
            state["cdf"] = np.cumsum(pm)
        idx = np.searchsorted(state["cdf"], u, side="left")
        return state["js"][np.clip(idx, 0, len(state["js"]) - 1)]

    return sampler


class _SupportView:
    # minimal duck-typed spec for truncated_support before the real spec exists
    def __init__(self, pmf, support):
        self.pmf = pmf
        self.support = support
        self.mean = 0.5 * (support[0] + support[1]) if math.isfinite(support[1]) \
            else support[0]


def _poisson(params):
    lam = float(_param(params, "lam", "lambda", "rate"))
    _require(lam > 0, "poisson rate must be positive")

    def log_pmf(k):
        return -lam + special.xlogy(k, lam) - special.gammaln(k + 1.0)

    pmf = _mask_pmf(log_pmf, lambda k: k >= 0)
    support = (0.0, math.inf)
    return DiscreteCO(lam, Quadratic(0.0, 0.0, lam), support, pmf,
                      _table_sampler(pmf, support), "poisson", {"lam": lam})


def _binomial(params):
    trials = int(_param(params, "n", "trials"))
    theta = float(_param(params, "theta", "p"))
    _require(trials >= 1, "binomial needs at least one trial")
    _require(0.0 < theta < 1.0, "binomial theta must lie in (0, 1)")

    def log_pmf(k):
        return (special.gammaln(trials + 1.0) - special.gammaln(k + 1.0)
                - special.gammaln(trials - k + 1.0)
                + special.xlogy(k, theta) + special.xlogy(trials - k, 1.0 - theta))

    pmf = _mask_pmf(log_pmf, lambda k: (k >= 0) & (k <= trials))
    support = (0.0, float(trials))
    return DiscreteCO(trials * theta,
                      Quadratic(0.0, -theta, trials * theta), support, pmf,
                      _table_sampler(pmf, support), "binomial",
                      {"n": trials, "theta": theta})


def _negative_binomial(params):
    r = float(_param(params, "r", "size"))
    theta = float(_param(params, "theta", "p"))
    _require(r > 0, "negative-binomial r must be positive")
    _require(0.0 < theta < 1.0, "negative-binomial theta must lie in (0, 1)")

    def log_pmf(k):
        return (special.gammaln(k + r) - special.gammaln(k + 1.0)
                - special.gammaln(r) + r * math.log(theta)
                + special.xlogy(k, 1.0 - theta))

    pmf = _mask_pmf(log_pmf, lambda k: k >= 0)
    mu = r * (1.0 - theta) / theta
    support = (0.0, math.inf)
    return DiscreteCO(mu, Quadratic(0.0, (1.0 - theta) / theta, mu), support,
                      pmf, _table_sampler(pmf, support), "negative-binomial",
                      {"r": r, "theta": theta})


def _hypergeometric(params):
    pop = int(_param(params, "N", "population"))
    succ = int(_param(params, "K", "successes"))
    draws = int(_param(params, "n", "draws"))
    _require(pop >= 1, "population must be positive")
    _require(0 <= succ <= pop, "successes must lie in [0, N]")
    _require(1 <= draws <= pop, "draws must lie in [1, N]")

    def log_comb(a, b):
        return (special.gammaln(a + 1.0) - special.gammaln(b + 1.0)
                - special.gammaln(a - b + 1.0))

    def log_pmf(k):
        return (log_comb(succ, k) + log_comb(pop - succ, draws - k)
                - log_comb(pop, draws))

    lo = max(0, draws + succ - pop)
    hi = min(draws, succ)
    pmf = _mask_pmf(log_pmf, lambda k: (k >= lo) & (k <= hi))
    support = (float(lo), float(hi))
    q = Quadratic(1.0 / pop, -(succ + draws) / pop, succ * draws / pop)
    return DiscreteCO(draws * succ / pop, q, support, pmf,
                      _table_sampler(pmf, support), "hypergeometric",
                      {"N": pop, "K": succ, "n": draws})


_CATALOG = {
    "normal": _normal,
    "gamma": _gamma,
    "beta": _beta,
    "poisson": _poisson,
    "binomial": _binomial,
    "negative-binomial": _negative_binomial,
    "hypergeometric": _hypergeometric,
}


def catalog(name: str, params: dict | None = None) -> Spec:
    """Construct a catalog member by family name.

    Families: normal, gamma, beta (continuous); poisson, binomial,
    negative-binomial, hypergeometric (discrete).  Each ships the quadratic
    of its defining identity; regression tests re-derive every one through
    :func:`infer_quadratic`.
    """
    key = name.lower().replace("_", "-")
    if key not in _CATALOG:
        raise UnknownDistributionError(
            f"unknown family {name!r}; choose from {sorted(_CATALOG)}")
    return _CATALOG[key](params or {})


# ---------------------------------------------------------------------------
# the defining identity as an executable oracle
# ---------------------------------------------------------------------------

def _mass_quantile_grid(spec: ContinuousIP, cfg: ex.EngineConfig, m: int):
    """Grid points at evenly spaced mass quantiles, thinned by the density
    floor (points where f < 1e-12 * max f are unusable for the identity)."""
    x, w = ex.continuous_grid(spec, cfg, max(cfg.quad_nodes, 200))
    cum = np.cumsum(w)
    total = cum[-1]
    targets = np.linspace(0.005, 0.995, m) * total
    idx = np.unique(np.searchsorted(cum, targets))
    pts = x[np.clip(idx, 0, len(x) - 1)]
    f = np.asarray(spec.density(pts), dtype=float)
    keep = f >= DENSITY_FLOOR * float(np.max(f))
    return pts[keep], f[keep]


def _gl_segment(fn, lo, hi, n=64):
    s, glw = ex.gauss_legendre(n)
    x = 0.5 * (hi - lo) * s + 0.5 * (hi + lo)
    return float(np.sum(glw * 0.5 * (hi - lo) * fn(x)))


def _left_anchored_integral(fn, alpha, x1):
    """Integral of fn over (alpha, x1] when fn may carry an integrable
    singularity at alpha (densities with fractional shape exponents).

    Dyadic shells shrink toward alpha, each smooth inside; the last sliver
    (width 2^-60 of the interval) uses a u^8 power substitution so even a
    t^(a-1) blow-up with small a contributes at full precision.
    """
    total = 0.0
    hi = x1
    for _ in range(60):
        lo = alpha + 0.5 * (hi - alpha)
        total += _gl_segment(fn, lo, hi, 24)
        hi = lo
    s, glw = ex.gauss_legendre(32)
    u = 0.5 * (s + 1.0)
    t = alpha + (hi - alpha) * u**8
    jac = (hi - alpha) * 8.0 * u**7 * 0.5
    total += float(np.sum(glw * jac * fn(t)))
    return total


def _anchored_cum(fn, alpha, omega, x):
    """Integral of fn over (alpha, x] allowing integrable singularities at
    both support endpoints.

    The lower half is shell-integrated toward alpha.  When x lies in the
    upper half of a finite support, the remainder is covered by shells that
    halve toward omega, so no quadrature panel ever has the omega singularity
    closer than half its own width.
    """
    if not math.isfinite(omega):
        return _left_anchored_integral(fn, alpha, x)
    mid = 0.5 * (alpha + omega)
    if x <= mid:
        return _left_anchored_integral(fn, alpha, x)
    total = _left_anchored_integral(fn, alpha, mid)
    lo = mid
    for m in range(1, 61):
        shell_hi = omega - (omega - mid) * 0.5**m
        if shell_hi >= x:
            break
        total += _gl_segment(fn, lo, shell_hi, 24)
        lo = shell_hi
    total += _gl_segment(fn, lo, x, 24)
    return total


def _cumulative_lhs(spec: ContinuousIP, pts: np.ndarray,
                    cfg: ex.EngineConfig) -> np.ndarray:
    """integral_alpha^x (mu - t) f(t) dt at each grid point, accumulated
    segment by segment so every point reuses the integral to its left."""
    alpha = spec.support[0]
    mu = spec.mean

    def integrand(t):
        return (mu - t) * np.asarray(spec.density(t), dtype=float)

    out = np.empty(len(pts))
    if math.isfinite(alpha):
        # independent shell integrals: immune both to endpoint singularities
        # and to error accumulation across segments
        omega = spec.support[1]
        for i, xp in enumerate(pts):
            out[i] = _anchored_cum(integrand, alpha, omega, xp)
        return out
    acc = 0.0
    prev = None
    for i, xp in enumerate(pts):
        if prev is None:
            # reversed semi-infinite map from -inf up to the first point
            s, glw = ex.gauss_legendre(160)
            half = 0.5 * (s + 1.0)
            t_map = half * half
            t = xp - t_map / (1.0 - t_map)
            jac = half / (1.0 - t_map) ** 2
            acc = float(np.sum(glw * jac * integrand(t)))
        else:
            acc += _gl_segment(integrand, prev, xp)
        out[i] = acc
        prev = xp
    return out


def _discrete_identity_points(spec: DiscreteCO, cfg: ex.EngineConfig):
    """Support points with the exact prefix-sum side of the identity.

    Prefix sums lose relative accuracy in the upper tail (the running total
    cancels down to q(j) p(j), far below the terms that built it), so points
    at or above the mean use the equivalent suffix form sum_{k>j} (k-mu) p(k)
    over an underflow-deep truncation instead.
    """
    js, _ = ex.truncated_support(spec, cfg.trunc_tol, underflow=True)
    pm = np.asarray(spec.pmf(js), dtype=float)
    terms = (spec.mean - js) * pm
    prefix = np.cumsum(terms)
    suffix_excl = np.concatenate([np.cumsum(-terms[::-1])[::-1][1:], [0.0]])
    lhs = np.where(js < spec.mean, prefix, suffix_excl)
    keep = pm >= DENSITY_FLOOR * float(np.max(pm))
    return js[keep].astype(float), pm[keep], lhs[keep]


@dataclass(frozen=True)
class InferredQuadratic:
    quadratic: Quadratic
    residual: float  # max |lhs/f - q| over the grid
    n_points: int


def infer_quadratic(spec: Spec, cfg: ex.EngineConfig | None = None,
                    grid_size: int = 33) -> InferredQuadratic:
    """Fit (delta, beta, gamma) from the family's defining identity.

    The ratio r(x) = [cumulative (mu - t) integral] / f(x) equals q(x) for a
    true member, so a least-squares fit of a quadratic to r over a grid
    recovers the coefficients; the reported residual is the worst absolute
    defect of the identity (in units of q) over the grid.  A residual far
    above tolerance means "not in the family" and is reported, not hidden.
    """
    cfg = cfg or ex.EngineConfig()
    if spec.is_discrete:
        pts, f, lhs = _discrete_identity_points(spec, cfg)
    else:
        pts, f = _mass_quantile_grid(spec, cfg, grid_size)
        if len(pts) < 3:
            raise RankDeficientFitError(
                "need at least 3 grid points above the density floor")
        lhs = _cumulative_lhs(spec, pts, cfg)
    r = lhs / f
    design = np.column_stack([pts**2, pts, np.ones_like(pts)])
    if np.linalg.matrix_rank(design) < 3:
        raise RankDeficientFitError("design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(design, r, rcond=None)
    residual = float(np.max(np.abs(design @ coef - r)))
    return InferredQuadratic(Quadratic(*coef), residual, len(pts))


@dataclass(frozen=True)
class MembershipReport:
    max_residual: float
    mean_residual: float
    tol: float
    passed: bool
    n_points: int


def verify_membership(spec: Spec, cfg: ex.EngineConfig | None = None,
                      tol: float | None = None,
                      grid_size: int = 33) -> MembershipReport:
    """Check the defining identity against the spec's own quadratic.

    Residuals are |lhs/f - q| over the grid, so a constant corruption of
    gamma by c shows up as a residual of exactly |c|.  A failing residual is
    an outcome, not an error.
    """
    cfg = cfg or ex.EngineConfig()
    if spec.q is None:
        raise InvalidParameterError("spec has no quadratic; run infer_quadratic")
    if tol is None:
        tol = DISCRETE_RESIDUAL_TOL if spec.is_discrete else CONTINUOUS_RESIDUAL_TOL
    if spec.is_discrete:
        pts, f, lhs = _discrete_identity_points(spec, cfg)
    else:
        pts, f = _mass_quantile_grid(spec, cfg, grid_size)
        lhs = _cumulative_lhs(spec, pts, cfg)
    res = np.abs(lhs / f - spec.q(pts))
    max_res = float(np.max(res))
    return MembershipReport(max_res, float(np.mean(res)), tol,
                            max_res <= tol, len(pts))


# ---------------------------------------------------------------------------
# moment finiteness
# ---------------------------------------------------------------------------

def moment_finiteness(spec: Spec, n: int, cfg: ex.EngineConfig | None = None,
                      confirm: bool = True) -> bool:
    """Whether E|X|^(2n) is finite.

    Bounded supports have every moment.  Otherwise the Pearson tail criterion
    applies: delta <= 0 always, delta > 0 only while 2n < 1 + 1/delta.  When
    ``confirm`` is set, a positive analytic verdict is double-checked by a
    truncated-moment stabilization probe so a wrong edge case cannot silently
    pass.
    """
    if n < 1:
        raise ValueError("order n must be at least 1")
    alpha, omega = spec.support
    if math.isfinite(alpha) and math.isfinite(omega):
        return True
    if spec.q is None:
        raise InvalidParameterError("spec has no quadratic")
    delta = spec.q.delta
    analytic = delta <= 0.0 or 2 * n < 1.0 + 1.0 / delta
    if not analytic:
        return False
    if not confirm:
        return True
    result = ex.probe(spec, lambda x: np.abs(x) ** (2 * n), cfg)
    return result.finite


# ---------------------------------------------------------------------------
# grid health checks used by the invariants test-suite
# ---------------------------------------------------------------------------

def q_min_on_grid(spec: ContinuousIP, cfg: ex.EngineConfig | None = None) -> float:
    """Minimum of q over the quadrature nodes actually used downstream."""
    cfg = cfg or ex.EngineConfig()
    x, _ = ex.continuous_grid(spec, cfg)
    return float(np.min(spec.q(x)))


def rising_q_min(spec: DiscreteCO, n: int,
                 cfg: ex.EngineConfig | None = None) -> float:
    """Minimum of q^[k] over the truncated support for k = 0..n."""
    from .calculus import rising_q
    cfg = cfg or ex.EngineConfig()
    js, _ = ex.truncated_support(spec, cfg.trunc_tol)
    worst = math.inf
    for k in range(n + 1):
        worst = min(worst, float(np.min(rising_q(spec.q, k, js.astype(float)))))
    return worst


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------

def _interp_table(table):
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 2:
        raise InvalidParameterError("table must be a list of [x, f] pairs")
    xs, fs = table[:, 0], table[:, 1]
    if np.any(np.diff(xs) <= 0):
        raise InvalidParameterError("table abscissae must be increasing")
    if np.any(fs < 0):
        raise InvalidParameterError("table values must be nonnegative")

    def density(x):
        return np.interp(np.asarray(x, dtype=float), xs, fs, left=0.0, right=0.0)

    return density


def _pmf_table(table):
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or table.shape[1] != 2:
        raise InvalidParameterError("table must be a list of [k, p] pairs")
    lookup = {int(k): float(p) for k, p in table}

    def pmf(k):
        k = np.asarray(k, dtype=float)
        out = np.zeros(k.shape)
        flat = out.reshape(-1)
        for i, kk in enumerate(k.reshape(-1)):
            if float(kk).is_integer():
                flat[i] = lookup.get(int(kk), 0.0)
        return out

    return pmf


def load_distribution(doc) -> Spec:
    """Distribution spec from a JSON document, file path, or parsed dict.

    Catalog form:   {"family": "beta", "params": {"a": 2, "b": 3}}
    Custom form:    {"custom": {"kind": "continuous" | "discrete",
                                "mean": m,
                                "quadratic": [delta, beta, gamma] | null,
                                "support": [a, b],
                                "density_table" | "pmf_table": [[x, f], ...]}}

    Tabulated members are interpolated linearly between nodes and are meant
    for the inference/verification path.
    """
    if isinstance(doc, str):
        with open(doc, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    if "family" in doc:
        return catalog(doc["family"], doc.get("params", {}))
    if "custom" not in doc:
        raise InvalidParameterError("document needs 'family' or 'custom'")
    c = doc["custom"]
    kind = c.get("kind")
    mean = float(c["mean"])
    quad = None
    if c.get("quadratic") is not None:
        quad = Quadratic(*[float(v) for v in c["quadratic"]])
    lo, hi = c["support"]
    lo = -math.inf if lo is None else float(lo)
    hi = math.inf if hi is None else float(hi)
    if kind == "continuous":
        density = _interp_table(c["density_table"])
        return ContinuousIP(mean, quad, (lo, hi), density, None, "custom", {})
    if kind == "discrete":
        pmf = _pmf_table(c["pmf_table"])
        return DiscreteCO(mean, quad, (lo, hi), pmf, None, "custom", {})
    raise InvalidParameterError("custom kind must be 'continuous' or 'discrete'")


def spec_to_json(spec: Spec) -> dict:
    doc = {"kind": "discrete" if spec.is_discrete else "continuous",
           "name": spec.name, "params": spec.params, "mean": spec.mean,
           "support": [None if math.isinf(s) else s for s in spec.support]}
    if spec.q is not None:
        doc["quadratic"] = list(spec.q.as_tuple())
    return doc
