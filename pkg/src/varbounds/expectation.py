"""Expectation engine: Gauss-Legendre quadrature for continuous members,
exact truncated summation for discrete members, and a seeded Monte Carlo
cross-check path.  Every result carries an error bracket.

The Monte Carlo stream is a splitmix64 counter generator (documented in the
README) rather than a library RNG, so results are bit-reproducible from
(seed, samples) alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import (BracketCeilingError, NoSamplerError,
                     NonFiniteIntegrandError, TruncationError)

Z_99 = 2.5758293035489004  # two-sided 99% normal quantile

_SUMMATION_CAP = 10**7


@dataclass(frozen=True)
class EngineConfig:
    """Numerical settings shared by the whole bound pipeline."""

    quad_nodes: int = 200
    infinite_map: str = "rational"
    trunc_tol: float = 1e-12
    mc_samples: int = 200_000
    mc_seed: int = 123456789

    def __post_init__(self):
        if self.quad_nodes < 10:
            raise ValueError("quad_nodes must be at least 10")
        if self.infinite_map not in ("rational", "tanh"):
            raise ValueError("infinite_map must be 'rational' or 'tanh'")
        if not (0.0 < self.trunc_tol <= 1e-6):
            raise ValueError("trunc_tol must lie in (0, 1e-6]")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be positive")

    def override(self, **kwargs) -> "EngineConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs) if kwargs else self


@dataclass(frozen=True)
class ExpectationResult:
    value: float
    error_bracket: float
    method: str  # quadrature | summation | monte-carlo
    detail: float  # node count | truncation mass | 99% CI half-width


# ---------------------------------------------------------------------------
# splitmix64 uniform stream
# ---------------------------------------------------------------------------

def splitmix64_uniforms(seed: int, count: int) -> np.ndarray:
    """Uniforms in (0, 1) from the counter-mode splitmix64 stream.

    Draw i (1-based) mixes the state ``seed + i * 0x9E3779B97F4A7C15`` and maps
    the top 53 bits to ((bits + 0.5) * 2**-53), so 0 and 1 never occur.
    """
    golden = np.uint64(0x9E3779B97F4A7C15)
    idx = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * golden
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


# ---------------------------------------------------------------------------
# quadrature grids
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def gauss_legendre(n: int):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return nodes, weights


# widens the tanh map so Gauss-Legendre extreme nodes reach |x| ~ 17 rather
# than ~5.6; without it Gaussian-tail mass beyond the last node is ~1e-5
_TANH_SCALE = 3.0


def _map_support(alpha: float, omega: float, infinite_map: str, s: np.ndarray):
    """Map Gauss-Legendre nodes s in (-1,1) onto the support (alpha, omega).

    Finite intervals use a sin^2 endpoint-regularizing substitution so that
    integrable endpoint singularities (e.g. Beta densities with shape < 1) do
    not degrade convergence.  Semi-infinite intervals square the coordinate
    near the finite endpoint for the same reason.  The doubly-infinite default
    is the rational map x = s / (1 - s^2).
    """
    lo_inf = math.isinf(alpha)
    hi_inf = math.isinf(omega)
    if not lo_inf and not hi_inf:
        u = 0.5 * (s + 1.0)
        width = omega - alpha
        x = alpha + width * np.sin(0.5 * math.pi * u) ** 2
        dxds = width * (math.pi / 4.0) * np.sin(math.pi * u)
        return x, dxds
    if lo_inf and hi_inf:
        if infinite_map == "tanh":
            x = _TANH_SCALE * np.arctanh(s)
            dxds = _TANH_SCALE / (1.0 - s * s)
        else:
            x = s / (1.0 - s * s)
            dxds = (1.0 + s * s) / (1.0 - s * s) ** 2
        return x, dxds
    if not lo_inf:
        half = 0.5 * (s + 1.0)
    else:
        half = 0.5 * (1.0 - s)
    t = half * half
    dtds = half  # |dt/ds|
    if infinite_map == "tanh":
        offset = _TANH_SCALE * np.arctanh(t)
        doffset = _TANH_SCALE * dtds / (1.0 - t * t)
    else:
        offset = t / (1.0 - t)
        doffset = dtds / (1.0 - t) ** 2
    if not lo_inf:
        return alpha + offset, doffset
    return omega - offset, doffset


def continuous_grid(spec, cfg: EngineConfig, n_nodes: int | None = None):
    """Quadrature nodes and weights such that sum(w * phi(x)) ~ E[phi(X)].

    Weights already include the map jacobian and the density; nodes where the
    density underflows to zero are dropped (they contribute exactly nothing
    and would otherwise turn inf * 0 into nan for growing integrands).
    """
    n = n_nodes if n_nodes is not None else cfg.quad_nodes
    s, glw = gauss_legendre(n)
    alpha, omega = spec.support
    x, dxds = _map_support(alpha, omega, cfg.infinite_map, s)
    w = glw * dxds * spec.density(x)
    keep = w != 0.0
    return x[keep], w[keep]


def expect_continuous(spec, phi, cfg: EngineConfig | None = None,
                      n_nodes: int | None = None,
                      bracket_ceiling: float | None = None) -> ExpectationResult:
    """E[phi(X)] by Gauss-Legendre on the mapped support.

    The error bracket is the defect against the half-resolution rule plus a
    roundoff floor; it is an estimate, not a certificate.  A caller that
    needs a guaranteed resolution can pass ``bracket_ceiling``.
    """
    cfg = cfg or EngineConfig()
    n = n_nodes if n_nodes is not None else cfg.quad_nodes

    def apply(nodes):
        x, w = continuous_grid(spec, cfg, nodes)
        vals = np.asarray(phi(x), dtype=float)
        contrib = w * vals
        bad = ~np.isfinite(contrib)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise NonFiniteIntegrandError(float(x[i]), float(vals[i]))
        return float(contrib.sum())

    value = apply(n)
    half = apply(max(10, n // 2))
    bracket = abs(value - half) + 4.0 * np.finfo(float).eps * (1.0 + abs(value))
    if bracket_ceiling is not None and bracket > bracket_ceiling:
        raise BracketCeilingError(
            f"error bracket {bracket:.3e} above ceiling {bracket_ceiling:.3e} "
            f"at {n} nodes")
    return ExpectationResult(value, bracket, "quadrature", float(n))


# ---------------------------------------------------------------------------
# discrete summation
# ---------------------------------------------------------------------------

def truncated_support(spec, trunc_tol: float, underflow: bool = False):
    """Integer support points covering all but at most ``trunc_tol`` mass.

    Returns (points, tail_bound); tail_bound is 0 for finite supports, where
    the summation is exact.  With ``underflow=True`` the expansion continues
    until the pmf underflows outright, which makes suffix sums of the
    defining identity accurate to roundoff.
    """
    alpha, omega = spec.support
    if math.isfinite(alpha) and math.isfinite(omega):
        js = np.arange(int(alpha), int(omega) + 1)
        return js, 0.0

    block = 512
    if math.isfinite(alpha):
        start = int(alpha)
        chunks, mass = [], 0.0
        lo = start
        while True:
            js = np.arange(lo, lo + block)
            if math.isfinite(omega):
                js = js[js <= int(omega)]
            pm = np.asarray(spec.pmf(js), dtype=float)
            chunks.append(js)
            added = float(pm.sum())
            mass += added
            lo += block
            if math.isfinite(omega) and js.size < block:
                return np.concatenate(chunks), 0.0
            done = added == 0.0 if underflow \
                else (1.0 - mass <= trunc_tol or added == 0.0)
            if done:
                return np.concatenate(chunks), max(0.0, 1.0 - mass)
            if lo - start > _SUMMATION_CAP:
                raise TruncationError(
                    f"could not reach mass tolerance {trunc_tol} within "
                    f"{_SUMMATION_CAP} terms")
    # support unbounded below: expand outward from the mean
    center = int(round(spec.mean))
    half = block
    while True:
        hi = int(omega) if math.isfinite(omega) else center + half
        js = np.arange(center - half, hi + 1)
        mass = float(np.asarray(spec.pmf(js), dtype=float).sum())
        if 1.0 - mass <= trunc_tol:
            return js, max(0.0, 1.0 - mass)
        half *= 2
        if 2 * half > _SUMMATION_CAP:
            raise TruncationError(
                f"could not reach mass tolerance {trunc_tol} within "
                f"{_SUMMATION_CAP} terms")


def expect_discrete(spec, phi, cfg: EngineConfig | None = None) -> ExpectationResult:
    """E[phi(X)] by exact summation over the truncated support.

    The bracket bounds the discarded tail by (sup |phi| over the last ten
    included points) times the remaining mass.
    """
    cfg = cfg or EngineConfig()
    js, tail = truncated_support(spec, cfg.trunc_tol)
    pm = np.asarray(spec.pmf(js), dtype=float)
    vals = np.asarray(phi(js), dtype=float)
    contrib = pm * vals
    bad = ~np.isfinite(contrib)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NonFiniteIntegrandError(int(js[i]), float(vals[i]))
    value = float(contrib.sum())
    bracket = 0.0 if tail == 0.0 else float(np.max(np.abs(vals[-10:]))) * tail
    return ExpectationResult(value, bracket, "summation", tail)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def sample(spec, cfg: EngineConfig | None = None,
           n_samples: int | None = None, seed: int | None = None) -> np.ndarray:
    """Draw variates through the spec's inverse-transform sampler."""
    cfg = cfg or EngineConfig()
    if getattr(spec, "sampler", None) is None:
        raise NoSamplerError(f"no sampler available for {spec!r}")
    n = n_samples if n_samples is not None else cfg.mc_samples
    u = splitmix64_uniforms(seed if seed is not None else cfg.mc_seed, n)
    return np.asarray(spec.sampler(u), dtype=float)


def expect_mc(spec, phi, cfg: EngineConfig | None = None) -> ExpectationResult:
    """Sample-mean estimate with a 99% confidence half-width as the bracket."""
    cfg = cfg or EngineConfig()
    xs = sample(spec, cfg)
    ys = np.asarray(phi(xs), dtype=float)
    value = float(ys.mean())
    sd = float(ys.std(ddof=1)) if ys.size > 1 else 0.0
    half = Z_99 * sd / math.sqrt(ys.size)
    return ExpectationResult(value, half, "monte-carlo", half)


def expect(spec, phi, cfg: EngineConfig | None = None) -> ExpectationResult:
    """Dispatch on the spec kind (continuous -> quadrature, discrete -> sum)."""
    if getattr(spec, "is_discrete", False):
        return expect_discrete(spec, phi, cfg)
    return expect_continuous(spec, phi, cfg)


# ---------------------------------------------------------------------------
# finiteness probes (stabilization of truncated expectations)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FinitenessProbe:
    """Verdict of a truncated-expectation stabilization ladder.

    ``values`` are nested truncated integrals/sums of a nonnegative integrand;
    the verdict is finite when the increments either vanish outright or decay
    geometrically (ratio below 0.9).  Log-divergent integrands show constant
    increments and are classified divergent.
    """

    finite: bool
    values: tuple
    decay_ratio: float


_LADDER_RUNGS = 7
_DECAY_RATIO_MAX = 0.90
_STABLE_RTOL = 1e-9


def _classify(values) -> FinitenessProbe:
    values = [float(v) for v in values]
    if not np.all(np.isfinite(values)):
        return FinitenessProbe(False, tuple(values), math.inf)
    incs = np.diff(values)
    incs = np.maximum(incs, 0.0)
    tail = abs(values[-1])
    if incs[-1] <= _STABLE_RTOL * (1.0 + tail):
        return FinitenessProbe(True, tuple(values), 0.0)
    ratios = [incs[m] / incs[m - 1]
              for m in range(len(incs) - 3, len(incs))
              if incs[m - 1] > 0.0]
    ratio = float(np.median(ratios)) if ratios else 0.0
    return FinitenessProbe(ratio <= _DECAY_RATIO_MAX, tuple(values), ratio)


def _segment_integral(density, weight, lo, hi, n_nodes=48):
    s, glw = gauss_legendre(n_nodes)
    x = 0.5 * (hi - lo) * s + 0.5 * (hi + lo)
    w = glw * 0.5 * (hi - lo) * density(x)
    keep = w != 0.0
    if not np.any(keep):
        return 0.0
    # probes feed divergent weights on purpose; inf is a verdict, not a bug
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.asarray(weight(x[keep]), dtype=float)
        return float(np.sum(w[keep] * vals))


def probe_continuous(spec, weight, cfg: EngineConfig | None = None) -> FinitenessProbe:
    """Stabilization ladder for E[weight(X)] with weight >= 0.

    Windows approach finite endpoints by factor-10 margin shrinks and infinite
    endpoints by factor-4 geometric expansion; each rung adds shell integrals
    to the previous value, so the ladder is monotone for nonnegative weights.
    """
    cfg = cfg or EngineConfig()
    alpha, omega = spec.support
    width = omega - alpha if (math.isfinite(alpha) and math.isfinite(omega)) else None

    # bulk scale for infinite directions: truncated second moment is always finite
    if width is None:
        x0, w0 = continuous_grid(spec, cfg, 128)
        mu = spec.mean
        sigma = math.sqrt(max(float(np.sum(w0 * (x0 - mu) ** 2)), 0.0))
        scale = 1.0 + abs(mu) + min(sigma, 20.0)

    def window(m):
        if math.isfinite(alpha):
            lo = alpha + (width if width is not None else 1.0) * 10.0 ** (-2 - m)
        else:
            lo = spec.mean - scale * 4.0 ** (m + 1)
        if math.isfinite(omega):
            hi = omega - (width if width is not None else 1.0) * 10.0 ** (-2 - m)
        else:
            hi = spec.mean + scale * 4.0 ** (m + 1)
        return lo, hi

    lo, hi = window(0)
    total = _segment_integral(spec.density, weight, lo, hi, n_nodes=96)
    values = [total]
    for m in range(1, _LADDER_RUNGS):
        nlo, nhi = window(m)
        if nlo < lo:
            total += _segment_integral(spec.density, weight, nlo, lo)
        if nhi > hi:
            total += _segment_integral(spec.density, weight, hi, nhi)
        lo, hi = nlo, nhi
        values.append(total)
    return _classify(values)


def probe_discrete(spec, weight, cfg: EngineConfig | None = None) -> FinitenessProbe:
    """Stabilization ladder for E[weight(X)] over expanding integer windows.

    The pmf and weight are evaluated once over the underflow-deep support;
    rungs then reduce to index slicing.  A weight that outgrows the pmf's
    decay shows up either as growing increments or as an overflow to inf,
    both of which classify as divergent.
    """
    cfg = cfg or EngineConfig()
    alpha, omega = spec.support
    if math.isfinite(alpha) and math.isfinite(omega):
        js = np.arange(int(alpha), int(omega) + 1)
        val = float(np.sum(np.asarray(spec.pmf(js), dtype=float)
                           * np.asarray(weight(js), dtype=float)))
        return FinitenessProbe(True, (val,), 0.0)

    js_all, _ = truncated_support(spec, cfg.trunc_tol, underflow=True)
    pm = np.asarray(spec.pmf(js_all), dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        contrib = pm * np.asarray(weight(js_all.astype(float)), dtype=float)
    contrib = np.where(pm == 0.0, 0.0, contrib)

    center = int(round(spec.mean))
    base = 8 + int(2 * (1 + abs(spec.mean)))
    values = []
    for m in range(_LADDER_RUNGS):
        h = base * 4**m
        lo = center - h if not math.isfinite(alpha) else int(alpha)
        hi = center + h
        window = (js_all >= lo) & (js_all <= hi)
        with np.errstate(invalid="ignore"):
            values.append(float(np.sum(contrib[window])))
    return _classify(values)


def probe(spec, weight, cfg: EngineConfig | None = None) -> FinitenessProbe:
    if getattr(spec, "is_discrete", False):
        return probe_discrete(spec, weight, cfg)
    return probe_continuous(spec, weight, cfg)
