"""Second, independent solver built on partial probability generating functions.

The unobservable/observable occupancies are split in three bands:
a = levels 0..n_e-1, b = levels n_e..n_s-1 (indexed from n_e) and
c = unobservable levels n_s and up (indexed from n_s). Each band satisfies a
2x2 linear system in z whose right-hand side only involves nine boundary
probabilities. Those are fixed by requiring the numerators to vanish at every
root of the band determinants, plus the (n_s, 1) balance and the analyticity
of P0c inside the unit disc.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np
from numpy.polynomial import polynomial as P

from .config import get_settings
from .errors import DegenerateQ, EmptyBand, IllConditioned, RootMultiplicity
from .schemas import Strategy, ValidatedParams
from .steady_state import ChainRates, SteadyState, rho_minus

logger = logging.getLogger(__name__)

State = tuple[int, int]
# linear form: boundary state -> polynomial coefficients (ascending powers of z)
Form = dict[State, np.ndarray]

NULL_RESIDUAL = 1e-8
NEGATIVE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PgfRoots:
    z_c1: float
    z_c2: float
    z_b: tuple[float, float, float]
    z_a: tuple[complex, complex, complex, complex]


@dataclass(frozen=True)
class BoundaryProbs:
    n_e: int
    n_s: int
    values: Mapping[State, float]

    def __getitem__(self, state: State) -> float:
        return self.values[state]

    def as_dict(self) -> dict[State, float]:
        return dict(self.values)


@dataclass(frozen=True)
class PgfValues:
    """Partial generating functions (and derivatives) at z = 1, plus P0c(mu/(mu+theta))."""

    p0a: float
    p0b: float
    p0c: float
    p1a: float
    p1b: float
    d_p0a: float
    d_p0b: float
    d_p0c: float
    d_p1a: float
    d_p1b: float
    p0c_at_g: float
    p_ns1: float

    @property
    def unobservable_mass(self) -> float:
        return self.p0a + self.p0b + self.p0c

    @property
    def total_mass(self) -> float:
        return self.unobservable_mass + self.p1a + self.p1b + self.p_ns1


def boundary_states(n_e: int, n_s: int) -> tuple[State, ...]:
    """The nine boundary states, merged where levels coincide (n_e = 1, n_s = n_e + 1)."""
    raw = (
        (0, 0), (0, 1),
        (n_e - 1, 0), (n_e - 1, 1),
        (n_e, 0), (n_e, 1),
        (n_s - 1, 0), (n_s, 0), (n_s, 1),
    )
    return tuple(dict.fromkeys(raw))


# ---------- roots ----------
def _newton(coefs: np.ndarray, z: complex) -> complex:
    slope = P.polyval(z, P.polyder(coefs))
    if slope == 0:
        return z
    return z - P.polyval(z, coefs) / slope


def _quadratic_roots(a2: float, a1: float, a0: float) -> tuple[float, float]:
    """Real roots of a2 z^2 + a1 z + a0 with a1 < 0 < a2, a0, smaller first."""
    b = -a1
    s = math.sqrt(max(b * b - 4.0 * a2 * a0, 0.0))
    return 2.0 * a0 / (b + s), (b + s) / (2.0 * a2)


def _cubic_a(rates: ChainRates) -> np.ndarray:
    lam, lam_q, mu, theta, zeta = rates.lam, rates.lam_q, rates.mu, rates.theta, rates.zeta
    q = lam_q / lam
    return np.array(
        [
            mu * mu,
            -mu * (lam_q + mu + theta + zeta + lam),
            lam * (mu + theta + (lam + mu + zeta) * q),
            -lam * lam * q,
        ]
    )


def _quadratic_b(rates: ChainRates) -> np.ndarray:
    lam_q, mu, theta, zeta = rates.lam_q, rates.mu, rates.theta, rates.zeta
    return np.array([mu * mu, -(lam_q + mu + theta + zeta) * mu, lam_q * (mu + zeta)])


def _quadratic_c(rates: ChainRates) -> np.ndarray:
    return np.array([-rates.mu, rates.lam_q + rates.mu + rates.theta, -rates.lam_q])


def _check_distinct(roots: list[complex], tol: float, label: str) -> None:
    for i, zi in enumerate(roots):
        for zj in roots[i + 1 :]:
            if abs(zi - zj) <= tol * max(1.0, abs(zi)):
                raise RootMultiplicity(f"{label}: roots {zi:.12g} and {zj:.12g} coincide")


def pgf_roots(params: ValidatedParams, q: float, tol: float | None = None) -> PgfRoots:
    lam_q = params.lam * q
    if lam_q <= 0:
        raise DegenerateQ("lambda*q = 0: the band quadratics degenerate")
    tol = get_settings().root_merge_tolerance if tol is None else tol
    rates = ChainRates(
        lam=params.lam, lam_q=lam_q, mu=params.mu, theta=params.theta, zeta=params.zeta, n_e=1, n_s=1
    )

    qc = _quadratic_c(rates)
    z_c1, z_c2 = (float(_newton(qc, z).real) for z in _quadratic_roots(-qc[2], -qc[1], -qc[0]))

    qb = _quadratic_b(rates)
    z_b2, z_b3 = (float(_newton(qb, z).real) for z in _quadratic_roots(qb[2], qb[1], qb[0]))

    cubic = _cubic_a(rates)
    raw = np.roots(cubic[::-1])
    z_a = [complex(_newton(cubic, complex(z))) for z in raw]
    z_a = [complex(z.real, 0.0) if abs(z.imag) <= 1e-12 * abs(z) else z for z in z_a]
    z_a.sort(key=lambda z: (abs(z), z.imag))

    _check_distinct([1.0, z_b2, z_b3], tol, "D_b")
    _check_distinct([1.0, *z_a], tol, "D_a")
    return PgfRoots(z_c1=z_c1, z_c2=z_c2, z_b=(1.0, z_b2, z_b3), z_a=(1.0 + 0j, *z_a))


# ---------- linear forms ----------
def _monomial(coef: float, power: int) -> np.ndarray:
    c = np.zeros(power + 1)
    c[power] = coef
    return c


def _add(form: Form, state: State, coefs: np.ndarray) -> None:
    form[state] = P.polyadd(form[state], coefs) if state in form else np.asarray(coefs, dtype=float)


def _combine(*terms: tuple[np.ndarray, Form]) -> Form:
    out: Form = {}
    for factor, form in terms:
        for state, coefs in form.items():
            _add(out, state, P.polymul(factor, coefs))
    return out


@dataclass(frozen=True)
class _BandSystem:
    num0: Form
    num1: Form
    den: np.ndarray


def _band_a(r: ChainRates) -> _BandSystem:
    lam, lam_q, mu, theta, zeta, n_e = r.lam, r.lam_q, r.mu, r.theta, r.zeta, r.n_e
    a1 = np.array([-mu, lam + mu + zeta, -lam])
    a0 = np.array([-mu, lam_q + mu + theta, -lam_q])

    n0: Form = {}
    _add(n0, (0, 1), np.array([-mu, mu]))
    _add(n0, (n_e - 1, 1), _monomial(-lam, n_e + 1))
    _add(n0, (n_e, 1), _monomial(mu, n_e))
    n1: Form = {}
    _add(n1, (0, 0), np.array([-mu, mu]))
    _add(n1, (n_e - 1, 0), _monomial(-lam_q, n_e + 1))
    _add(n1, (n_e, 0), _monomial(mu, n_e))

    return _BandSystem(
        num0=_combine((np.array([0.0, -zeta]), n0), (-a1, n1)),
        num1=_combine((np.array([0.0, -theta]), n1), (-a0, n0)),
        den=P.polysub(np.array([0.0, 0.0, theta * zeta]), P.polymul(a1, a0)),
    )


def _band_b(r: ChainRates) -> _BandSystem:
    lam, lam_q, mu, theta, zeta, n_e, n_s = r.lam, r.lam_q, r.mu, r.theta, r.zeta, r.n_e, r.n_s
    m = n_s - n_e
    b1 = np.array([-mu, mu + zeta])
    a0 = np.array([-mu, lam_q + mu + theta, -lam_q])

    n0: Form = {}
    _add(n0, (n_s, 1), _monomial(mu, m))
    _add(n0, (n_e - 1, 1), _monomial(lam, 1))
    _add(n0, (n_e, 1), _monomial(-mu, 0))
    n1: Form = {}
    _add(n1, (n_s - 1, 0), _monomial(-lam_q, m + 1))
    _add(n1, (n_s, 0), _monomial(mu, m))
    _add(n1, (n_e - 1, 0), _monomial(lam_q, 1))
    _add(n1, (n_e, 0), _monomial(-mu, 0))

    return _BandSystem(
        num0=_combine((np.array([0.0, -zeta]), n0), (-b1, n1)),
        num1=_combine((np.array([0.0, -theta]), n1), (-a0, n0)),
        den=P.polysub(np.array([0.0, 0.0, theta * zeta]), P.polymul(b1, a0)),
    )


def _scaled_row(form: Form, z: complex) -> dict[State, complex]:
    """Form evaluated at z, divided by z**degree when |z| > 1 so nothing overflows."""
    if abs(z) <= 1.0:
        return {state: P.polyval(z, coefs) for state, coefs in form.items()}
    degree = max(len(coefs) for coefs in form.values()) - 1
    w = 1.0 / z
    row = {}
    for state, coefs in form.items():
        padded = np.zeros(degree + 1)
        padded[: len(coefs)] = coefs
        row[state] = P.polyval(w, padded[::-1])
    return row


def _derivatives_at_one(coefs: np.ndarray) -> tuple[float, float]:
    d1 = P.polyder(coefs)
    return float(P.polyval(1.0, d1)), float(P.polyval(1.0, P.polyder(d1)))


def _limit_at_one(band: _BandSystem, form: Form, x: Mapping[State, float]) -> tuple[float, float]:
    """Value and slope at z = 1 of form/den, where both vanish at 1."""
    den1, den2 = _derivatives_at_one(band.den)
    if abs(den1) <= 1e-14 * float(np.max(np.abs(band.den))):
        raise RootMultiplicity("z = 1 is a double root of a band determinant")
    num1 = math.fsum(x[s] * _derivatives_at_one(c)[0] for s, c in form.items())
    num2 = math.fsum(x[s] * _derivatives_at_one(c)[1] for s, c in form.items())
    # form = (z-1) Q(z), den = (z-1) c(z): Q(1) = form'(1), Q'(1) = form''(1)/2
    q0, q1 = num1, 0.5 * num2
    c0, c1 = den1, 0.5 * den2
    return q0 / c0, (q1 * c0 - q0 * c1) / (c0 * c0)


def _mass_functional(rates: ChainRates, rho: float, bands: list[_BandSystem]) -> dict[State, float]:
    """Coefficients of the total probability as a linear function of the boundary values."""
    weights: dict[State, float] = {}
    for band in bands:
        den1, _ = _derivatives_at_one(band.den)
        if abs(den1) <= 1e-14 * float(np.max(np.abs(band.den))):
            raise RootMultiplicity("z = 1 is a double root of a band determinant")
        for form in (band.num0, band.num1):
            for state, coefs in form.items():
                weights[state] = weights.get(state, 0.0) + _derivatives_at_one(coefs)[0] / den1
    weights[(rates.n_s, 0)] = weights.get((rates.n_s, 0), 0.0) + 1.0 / (1.0 - rho)
    weights[(rates.n_s, 1)] = weights.get((rates.n_s, 1), 0.0) + 1.0
    return weights


def solve_boundary(
    params: ValidatedParams,
    strategy: Strategy,
    max_condition: float | None = None,
) -> BoundaryProbs:
    if strategy.n_s == strategy.n_e:
        raise EmptyBand("n_s = n_e: the b band is empty")
    max_condition = get_settings().genfunc_max_condition if max_condition is None else max_condition

    roots = pgf_roots(params, strategy.q)
    rates = ChainRates.from_inputs(params, strategy)
    rho = rates.lam_q * roots.z_c1 / rates.mu
    band_a, band_b = _band_a(rates), _band_b(rates)

    rows: list[dict[State, float]] = []

    def add_root_rows(form: Form, z: complex) -> None:
        row = _scaled_row(form, z)
        rows.append({s: float(np.real(v)) for s, v in row.items()})
        if z.imag != 0:
            rows.append({s: float(np.imag(v)) for s, v in row.items()})

    for z in roots.z_a:
        # conjugate pairs: one member gives both the real and the imaginary row
        if z.imag >= 0:
            add_root_rows(band_a.num0, complex(z))
    for z in roots.z_b:
        add_root_rows(band_b.num0, complex(z))

    n_s = rates.n_s
    # (n_s, 1) balance: (mu + zeta) p(n_s,1) = theta P0c(1)
    rows.append({(n_s, 1): (rates.mu + rates.zeta) * (1.0 - rho), (n_s, 0): -rates.theta})
    # P0c analytic at z_c1: its numerator vanishes there
    c_row: dict[State, float] = {(n_s, 0): -rates.mu}
    c_row[(n_s - 1, 0)] = c_row.get((n_s - 1, 0), 0.0) + rates.lam_q * roots.z_c1
    c_row[(n_s, 1)] = c_row.get((n_s, 1), 0.0) + rates.zeta * roots.z_c1
    rows.append(c_row)

    states = boundary_states(rates.n_e, n_s)
    column = {s: j for j, s in enumerate(states)}
    matrix = np.zeros((len(rows), len(states)))
    for i, row in enumerate(rows):
        for s, v in row.items():
            matrix[i, column[s]] += v
    norms = np.max(np.abs(matrix), axis=1)
    matrix = matrix[norms > 0] / norms[norms > 0][:, None]

    _, sing, vt = np.linalg.svd(matrix)
    k = len(states)
    condition = sing[0] / sing[k - 2] if sing[k - 2] > 0 else math.inf
    logger.debug("boundary system %dx%d condition %.3e residual %.3e", *matrix.shape, condition, sing[k - 1] / sing[0])
    if condition > max_condition:
        raise IllConditioned(f"boundary system condition {condition:.3e} exceeds {max_condition:.1e}")
    if sing[k - 1] > NULL_RESIDUAL * sing[0]:
        raise IllConditioned(f"boundary system has no null vector (residual {sing[k - 1] / sing[0]:.3e})")

    v = vt[k - 1]
    if v.sum() < 0:
        v = -v
    return _normalise(rates, rho, [band_a, band_b], dict(zip(states, v)))


def _normalise(
    rates: ChainRates,
    rho: float,
    bands: list[_BandSystem],
    v: dict[State, float],
) -> BoundaryProbs:
    weights = _mass_functional(rates, rho, bands)
    total = math.fsum(weights[s] * v[s] for s in v)
    if not math.isfinite(total) or total <= 0:
        raise IllConditioned(f"boundary solution has non-positive total mass {total:.3e}")
    x = {s: v[s] / total for s in v}
    worst = min(x.values())
    if worst < -NEGATIVE_TOLERANCE * max(x.values()):
        raise IllConditioned(f"boundary solution has a negative probability {worst:.3e}")
    x = {s: max(p, 0.0) for s, p in x.items()}
    return BoundaryProbs(n_e=rates.n_e, n_s=rates.n_s, values=MappingProxyType(x))


def boundary_from_steady_state(ss: SteadyState) -> BoundaryProbs:
    states = boundary_states(ss.rates.n_e, ss.rates.n_s)
    columns = (ss.p0, ss.p1)
    x = {(n, i): float(columns[i][n]) for n, i in states}
    return BoundaryProbs(n_e=ss.rates.n_e, n_s=ss.rates.n_s, values=MappingProxyType(x))


def pgf_eval(params: ValidatedParams, strategy: Strategy, bp: BoundaryProbs) -> PgfValues:
    rates = ChainRates.from_inputs(params, strategy)
    rho = rho_minus(rates.lam_q, rates.mu, rates.theta)
    x = bp.values

    band_a = _band_a(rates)
    p0a, d_p0a = _limit_at_one(band_a, band_a.num0, x)
    p1a, d_p1a = _limit_at_one(band_a, band_a.num1, x)
    if rates.n_s > rates.n_e:
        band_b = _band_b(rates)
        p0b, d_p0b = _limit_at_one(band_b, band_b.num0, x)
        p1b, d_p1b = _limit_at_one(band_b, band_b.num1, x)
    else:
        p0b = d_p0b = p1b = d_p1b = 0.0

    p_ns0 = x[(rates.n_s, 0)]
    g = rates.mu / (rates.mu + rates.theta)
    return PgfValues(
        p0a=p0a,
        p0b=p0b,
        p0c=p_ns0 / (1.0 - rho),
        p1a=p1a,
        p1b=p1b,
        d_p0a=d_p0a,
        d_p0b=d_p0b,
        d_p0c=p_ns0 * rho / (1.0 - rho) ** 2,
        d_p1a=d_p1a,
        d_p1b=d_p1b,
        p0c_at_g=p_ns0 / (1.0 - rho * g),
        p_ns1=x[(rates.n_s, 1)],
    )
