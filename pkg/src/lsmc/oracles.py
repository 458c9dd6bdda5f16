"""Independent reference prices: lattice, closed forms, and published benchmarks.

Everything here is deliberately separate from the Monte Carlo machinery so it
can certify the simulation estimators: a Cox-Ross-Rubinstein lattice for the
Bermudan put, Black-Scholes for European puts, a Drezner-Genz bivariate normal
quadrature feeding the max-of-two-assets closed form, and a static table of
published exact values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.stats import norm

from .market import ExerciseSchedule, GbmModel

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Gauss-Legendre half-rules used by the Drezner-Genz scheme; the pair count
# grows with |rho| to keep the absolute error well below 1e-7.
_GL_W = (
    np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904]),
    np.array(
        [
            0.04717533638651177,
            0.1069393259953183,
            0.1600783285433464,
            0.2031674267230659,
            0.2334925365383547,
            0.2491470458134029,
        ]
    ),
    np.array(
        [
            0.01761400713915212,
            0.04060142980038694,
            0.06267204833410906,
            0.08327674157670475,
            0.1019301198172404,
            0.1181945319615184,
            0.1316886384491766,
            0.1420961093183821,
            0.1491729864726037,
            0.1527533871307259,
        ]
    ),
)
_GL_X = (
    np.array([-0.9324695142031522, -0.6612093864662647, -0.2386191860831970]),
    np.array(
        [
            -0.9815606342467191,
            -0.9041172563704750,
            -0.7699026741943050,
            -0.5873179542866171,
            -0.3678314989981802,
            -0.1252334085114692,
        ]
    ),
    np.array(
        [
            -0.9931285991850949,
            -0.9639719272779138,
            -0.9122344282513259,
            -0.8391169718222188,
            -0.7463319064601508,
            -0.6360536807265150,
            -0.5108670019508271,
            -0.3737060887154196,
            -0.2277858511416451,
            -0.07652652113349733,
        ]
    ),
)


def binomial_bermudan_put(
    model: GbmModel, schedule: ExerciseSchedule, strike: float, steps: int
) -> float:
    """Bermudan put on a CRR lattice with exercise only at schedule dates.

    steps must be a multiple of the date count so that every exercise date
    falls exactly on a tree level; early exercise is masked everywhere else.
    The root value converges to the exact price at rate O(1/steps).
    """
    if model.n_assets != 1:
        raise ValueError("binomial_bermudan_put prices single-asset models only")
    if steps < 100:
        raise ValueError("steps must be at least 100")
    if steps % schedule.n_dates != 0:
        raise ValueError(
            f"steps={steps} is not a multiple of the {schedule.n_dates} exercise dates"
        )
    maturity = schedule.maturity
    dt = maturity / steps
    levels = schedule.times / dt
    rounded = np.rint(levels)
    if not np.allclose(levels, rounded, atol=1e-6):
        raise ValueError("every exercise date must lie on a tree level")
    exercise_levels = {int(k) for k in rounded[:-1]}

    sigma = float(model.vol[0])
    rate, div = model.rate, float(model.dividend[0])
    spot = float(model.spot[0])
    sdt = sigma * math.sqrt(dt)
    u, d = math.exp(sdt), math.exp(-sdt)
    p = (math.exp((rate - div) * dt) - d) / (u - d)
    if not 0.0 < p < 1.0:
        raise ValueError(f"risk-neutral up probability {p:.4f} outside (0, 1); refine steps")
    disc = math.exp(-rate * dt)

    ups = np.arange(steps + 1)
    values = np.maximum(strike - spot * np.exp((2 * ups - steps) * sdt), 0.0)
    for level in range(steps - 1, -1, -1):
        values = disc * (p * values[1 : level + 2] + (1.0 - p) * values[: level + 1])
        if level in exercise_levels:
            s_level = spot * np.exp((2 * np.arange(level + 1) - level) * sdt)
            values = np.maximum(values, strike - s_level)
    return float(values[0])


def bs_european_put(
    spot: float, vol: float, rate: float, dividend: float, strike: float, expiry: float
) -> float:
    """Black-Scholes European put with a continuous dividend yield."""
    if spot <= 0 or strike <= 0 or expiry <= 0:
        raise ValueError("spot, strike and expiry must be strictly positive")
    if vol <= 0.0:
        forward = spot * math.exp((rate - dividend) * expiry)
        return math.exp(-rate * expiry) * max(strike - forward, 0.0)
    v = vol * math.sqrt(expiry)
    d1 = (math.log(spot / strike) + (rate - dividend + 0.5 * vol * vol) * expiry) / v
    d2 = d1 - v
    return float(
        strike * math.exp(-rate * expiry) * norm.cdf(-d2)
        - spot * math.exp(-dividend * expiry) * norm.cdf(-d1)
    )


def _bvn_upper(dh: float, dk: float, r: float) -> float:
    """Drezner-Genz tail probability P[X > dh, Y > dk] for standard bivariate normals."""
    if abs(r) < 0.3:
        w, x = _GL_W[0], _GL_X[0]
    elif abs(r) < 0.75:
        w, x = _GL_W[1], _GL_X[1]
    else:
        w, x = _GL_W[2], _GL_X[2]

    h, k = dh, dk
    hk = h * k
    bvn = 0.0
    if abs(r) < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = math.asin(r)
        for sign in (1.0, -1.0):
            sn = np.sin(asr * (sign * x + 1.0) / 2.0)
            bvn += float(np.sum(w * np.exp((sn * hk - hs) / (1.0 - sn * sn))))
        bvn = bvn * asr / (4.0 * math.pi) + norm.cdf(-h) * norm.cdf(-k)
        return bvn

    if r < 0.0:
        k = -k
        hk = -hk
    if abs(r) < 1.0:
        a_sq = (1.0 - r) * (1.0 + r)
        a = math.sqrt(a_sq)
        b_sq = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 16.0
        asr = -(b_sq / a_sq + hk) / 2.0
        if asr > -100.0:
            bvn = a * math.exp(asr) * (
                1.0 - c * (b_sq - a_sq) * (1.0 - d * b_sq / 5.0) / 3.0 + c * d * a_sq * a_sq / 5.0
            )
        if -hk < 100.0:
            b = math.sqrt(b_sq)
            bvn -= (
                math.exp(-hk / 2.0)
                * _SQRT_2PI
                * norm.cdf(-b / a)
                * b
                * (1.0 - c * b_sq * (1.0 - d * b_sq / 5.0) / 3.0)
            )
        a /= 2.0
        for sign in (1.0, -1.0):
            xs = (a * (sign * x + 1.0)) ** 2
            rs = np.sqrt(1.0 - xs)
            asr1 = -(b_sq / xs + hk) / 2.0
            mask = asr1 > -100.0
            term = np.zeros_like(xs)
            term[mask] = (
                a
                * w[mask]
                * np.exp(asr1[mask])
                * (
                    np.exp(-hk * (1.0 - rs[mask]) / (2.0 * (1.0 + rs[mask]))) / rs[mask]
                    - (1.0 + c * xs[mask] * (1.0 + d * xs[mask]))
                )
            )
            bvn += float(np.sum(term))
        bvn = -bvn / (2.0 * math.pi)
    if r > 0.0:
        bvn += norm.cdf(-max(h, k))
    else:
        bvn = -bvn
        if k > h:
            bvn += norm.cdf(k) - norm.cdf(h)
    return bvn


def bivariate_normal_cdf(a: float, b: float, rho: float) -> float:
    """P[X <= a, Y <= b] for standard normals with correlation rho.

    Absolute error is below 1e-7 over the whole parameter range (the
    Drezner-Genz quadrature is accurate to ~1e-14 for |rho| < 1).
    """
    if not -1.0 <= rho <= 1.0:
        raise ValueError("correlation must lie in [-1, 1]")
    if math.isnan(a) or math.isnan(b):
        raise ValueError("arguments must not be NaN")
    if a == -math.inf or b == -math.inf:
        return 0.0
    if a == math.inf and b == math.inf:
        return 1.0
    if a == math.inf:
        return float(norm.cdf(b))
    if b == math.inf:
        return float(norm.cdf(a))
    if rho == 1.0:
        return float(norm.cdf(min(a, b)))
    if rho == -1.0:
        return float(max(0.0, norm.cdf(a) + norm.cdf(b) - 1.0))
    return float(min(1.0, max(0.0, _bvn_upper(-a, -b, rho))))


def bestof2_european_call(model: GbmModel, strike: float, expiry: float) -> float:
    """Closed-form European call on the maximum of two assets (Stulz-type).

    Requires a two-asset model with strictly positive volatilities and
    strike; expressed via the bivariate normal CDF.
    """
    if model.n_assets != 2:
        raise ValueError("bestof2_european_call needs a two-asset model")
    if strike <= 0 or expiry <= 0:
        raise ValueError("strike and expiry must be strictly positive")
    s1, s2 = (float(v) for v in model.spot)
    q1, q2 = (float(v) for v in model.dividend)
    v1, v2 = (float(v) for v in model.vol)
    if v1 <= 0 or v2 <= 0:
        raise ValueError("both volatilities must be strictly positive")
    rho = float(model.correlation[0, 1])
    r = model.rate
    rt = math.sqrt(expiry)

    spread_vol = math.sqrt(v1 * v1 + v2 * v2 - 2.0 * rho * v1 * v2)
    if spread_vol <= 0:
        raise ValueError("assets are perfectly correlated with equal volatility")
    d = (math.log(s1 / s2) + (q2 - q1 + 0.5 * spread_vol**2) * expiry) / (spread_vol * rt)
    y1 = (math.log(s1 / strike) + (r - q1 + 0.5 * v1 * v1) * expiry) / (v1 * rt)
    y2 = (math.log(s2 / strike) + (r - q2 + 0.5 * v2 * v2) * expiry) / (v2 * rt)
    rho1 = (v1 - rho * v2) / spread_vol
    rho2 = (v2 - rho * v1) / spread_vol

    return (
        s1 * math.exp(-q1 * expiry) * bivariate_normal_cdf(y1, d, rho1)
        + s2 * math.exp(-q2 * expiry) * bivariate_normal_cdf(y2, spread_vol * rt - d, rho2)
        - strike
        * math.exp(-r * expiry)
        * (1.0 - bivariate_normal_cdf(v1 * rt - y1, v2 * rt - y2, rho))
    )


@dataclass(frozen=True)
class ReferencePrice:
    """Published exact prices for one contract configuration."""

    case: str
    key: float
    bermudan: float
    european: float
    source: str


def _load_reference_table() -> dict[tuple[str, float], ReferencePrice]:
    table: dict[tuple[str, float], ReferencePrice] = {}
    text = resources.files("lsmc.data").joinpath("reference_prices.txt").read_text()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        case, key, berm, euro, source = line.split(",", maxsplit=4)
        entry = ReferencePrice(case, float(key), float(berm), float(euro), source)
        table[(case, float(key))] = entry
    return table


_REFERENCE_TABLE: dict[tuple[str, float], ReferencePrice] | None = None


def reference_price(case: str, key: float) -> ReferencePrice:
    """Published exact Bermudan/European prices for (case, key).

    key is the strike for put_single and basket_call, the common spot for
    bestof_call.  For the basket the two prices coincide (no dividends, so
    early exercise is never optimal).
    """
    global _REFERENCE_TABLE
    if _REFERENCE_TABLE is None:
        _REFERENCE_TABLE = _load_reference_table()
    entry = _REFERENCE_TABLE.get((case, float(key)))
    if entry is None:
        known = sorted(k for c, k in _REFERENCE_TABLE if c == case)
        raise KeyError(f"no reference price for ({case!r}, {key!r}); known keys: {known}")
    return entry
