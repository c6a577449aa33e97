"""Spectral estimates for H = -d^2/dx^2 + mu built from q* of the positive part.

All constants are evaluated term by term from their defining expressions
(no hand simplification). Sublevel measures carry a numeric error which is
used to widen every bound outward.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidSpecError
from .measure import SignedMeasureSpec, interval_mass, validate_spec
from .qstar import DEFAULT_TOL, F_inverse, M_of, q0_and_Q, q_star, side_limit, sublevel_measure, xi

PI2P1 = math.pi**2 + 1.0

SIMPLICITY_CAVEAT = "assumes every eigenvalue is simple; not verified from q*"


# ---------------------------------------------------------------------------
# constants


@dataclass(frozen=True)
class ClassConstants:
    beta: float
    alpha: float
    l: float
    brinck: float


def resolve_constants(spec: SignedMeasureSpec) -> ClassConstants:
    report = validate_spec(spec)
    if not report.ok:
        raise InvalidSpecError("; ".join(report.violations))
    return ClassConstants(float(report.beta), float(spec.alpha), float(spec.l), float(report.brinck))


def theta_lower(lam: float, alpha: float = 0.0, l: float = 1.0) -> float:
    """Argument of M in the lower counting bound."""
    return 3.0 * (alpha / l + 2.0 * lam) / (16.0 * PI2P1 * (alpha * l + 2.0))


def s_upper(lam: float, beta: float = 0.0) -> float:
    """Argument of M in the upper counting bound."""
    return (math.sqrt(4.0 * lam + 9.0 * beta**2 + 12.0 * beta) + 3.0 * beta) ** 2


def is_positive_case(spec: SignedMeasureSpec) -> bool:
    return all(c.total_mass() == 0 for c in spec.negative)


# ---------------------------------------------------------------------------
# counting bounds


@dataclass
class BoundReport:
    lam: float
    lower_count: float
    upper_count: float
    lower_strict: float
    upper_floor: float
    theta_lower: float
    s_upper: float
    beta: float
    alpha: float
    l: float
    lower_sublevel: dict | None = None
    upper_sublevel: dict | None = None

    def to_dict(self):
        return asdict(self)


def _M_bound(positive, level, tol, side):
    """(M value widened to ``side``, strict-set value, sublevel report)."""
    if level == 0:
        return 0.0, 0.0, None
    res = sublevel_measure(positive, level, tol)
    root = math.sqrt(level)
    if math.isinf(res.measure):
        return math.inf, math.inf, res.to_dict()
    if side < 0:
        value = root * max(res.measure - res.error, 0.0)
        strict = root * max(res.measure_strict - res.error, 0.0)
    else:
        value = root * (res.measure + res.error)
        strict = root * (res.measure_strict + res.error)
    return value, strict, res.to_dict()


def counting_bounds(spec: SignedMeasureSpec, lam: float, tol: float = DEFAULT_TOL,
                    constants: ClassConstants | None = None) -> BoundReport:
    """2 M(theta) <= N(lam) <= M(s) with theta, s from the class constants."""
    if not lam >= 0:
        raise ValueError("lambda must be >= 0")
    k = constants or resolve_constants(spec)
    th = theta_lower(lam, k.alpha, k.l)
    s = s_upper(lam, k.beta)
    low, low_strict, low_rep = _M_bound(spec.positive, th, tol, -1)
    up, _, up_rep = _M_bound(spec.positive, s, tol, +1)
    return BoundReport(
        lam=float(lam),
        lower_count=2.0 * low,
        upper_count=up,
        lower_strict=2.0 * low_strict,
        upper_floor=float(math.floor(up)) if math.isfinite(up) else math.inf,
        theta_lower=th,
        s_upper=s,
        beta=k.beta,
        alpha=k.alpha,
        l=k.l,
        lower_sublevel=low_rep,
        upper_sublevel=up_rep,
    )


@dataclass
class NegativeCountReport:
    bound: float
    threshold: float
    q0: float
    no_nonpositive_spectrum: bool
    flag: str | None

    def to_dict(self):
        return asdict(self)


def negative_count_bound(spec: SignedMeasureSpec, tol: float = DEFAULT_TOL) -> NegativeCountReport:
    """Bound on the number of eigenvalues <= 0."""
    k = resolve_constants(spec)
    root = math.sqrt(9.0 * k.beta**2 + 12.0 * k.beta) + 3.0 * k.beta
    thr = root**2
    q0 = q0_and_Q(spec.positive, tol).q0
    if thr == 0:
        value = 0.0
    else:
        res = sublevel_measure(spec.positive, thr, tol)
        value = root * (res.measure + res.error) if math.isfinite(res.measure) else math.inf
    empty = q0 > thr
    return NegativeCountReport(value, thr, q0, empty, "σ(H_μ)∩(−∞,0]=∅" if empty else None)


# ---------------------------------------------------------------------------
# bottom of the spectrum


def _lower_formula(q, beta):
    if math.isinf(q):
        return math.inf
    return 0.25 * q - 1.5 * beta * (2.0 + math.sqrt(q))


def _upper_formula(q, alpha, l):
    if math.isinf(q):
        return math.inf
    return (8.0 / 3.0) * PI2P1 * (alpha * l + 2.0) * q - alpha / (2.0 * l)


@dataclass
class Bracket:
    lo: float
    hi: float
    value_used: float
    contradiction: bool = False
    heuristic: bool = False
    note: str = ""

    def to_dict(self):
        return asdict(self)


def lambda1_bounds(spec: SignedMeasureSpec, tol: float = DEFAULT_TOL,
                   constants: ClassConstants | None = None, q0: float | None = None,
                   heuristic: bool = False) -> Bracket:
    """Bracket for the bottom of the spectrum from q0 = inf q*."""
    k = constants or resolve_constants(spec)
    if q0 is None:
        rep = q0_and_Q(spec.positive, tol)
        q0, heuristic = rep.q0, rep.heuristic
    lo = max(_lower_formula(q0, k.beta), -3.0 * k.beta)
    hi = _upper_formula(q0, k.alpha, k.l)
    bad = lo > hi
    return Bracket(lo, hi, q0, bad, heuristic, "lower end exceeds upper end" if bad else "")


@dataclass
class EssentialReport:
    bracket: Bracket
    below_essential: bool
    verdict: str

    def to_dict(self):
        return {"bracket": self.bracket.to_dict(), "below_essential": self.below_essential, "verdict": self.verdict}


def essential_inf_bounds(spec: SignedMeasureSpec, tol: float = DEFAULT_TOL,
                         constants: ClassConstants | None = None) -> EssentialReport:
    """Bracket for inf of the essential spectrum from Q = liminf q*."""
    k = constants or resolve_constants(spec)
    rep = q0_and_Q(spec.positive, tol)
    Q = rep.Q
    lo = _lower_formula(Q, k.beta)
    hi = _upper_formula(Q, k.alpha, k.l)
    ess = Bracket(lo, hi, Q, lo > hi, rep.heuristic)
    lam1 = lambda1_bounds(spec, tol, k, rep.q0, rep.heuristic)
    below = lam1.hi < ess.lo
    verdict = "essential spectrum empty" if math.isinf(Q) else "bracketed"
    return EssentialReport(ess, below, verdict)


# ---------------------------------------------------------------------------
# discreteness


MOLCHANOV_WIDTHS = (1.0, 1.0 / 8.0, 1.0 / 64.0)


def molchanov_test(positive, n_scales: int = 8, n_offsets: int = 33) -> dict:
    """Minimum window masses mu([x, x + d]) along expanding |x|, per width d."""
    positive = list(positive)
    start = max([c.tail(s).start for c in positive for s in (-1, 1)] + [1.0]) + 1.0
    extent = min([c.probe_extent() for c in positive] + [1e6])
    extent = max(extent, 4.0 * start)
    scales = np.geomspace(start, extent, n_scales)
    frac = (np.arange(n_offsets) + 0.5) / n_offsets * 0.5
    table = {}
    grows = True
    for d in MOLCHANOV_WIDTHS:
        mins = []
        for X in scales:
            xs = np.concatenate([X * (1 + frac), -X * (1 + frac) - d])
            mins.append(float(np.min(interval_mass(positive, xs, xs + d))))
        table[repr(d)] = mins
        ok = mins[-1] > 0 and mins[-1] >= 2.0 * max(mins[0], 1e-300) and mins[-1] >= mins[-2] >= mins[-3]
        grows &= bool(ok)
    return {"scales": scales.tolist(), "min_window_mass": table, "grows": grows}


@dataclass
class DiscretenessReport:
    verdict: str
    tail_kinds: list
    molchanov: dict
    Q: float
    diagnostic: str = ""

    def to_dict(self):
        return asdict(self)


def classify_discreteness(spec: SignedMeasureSpec, tol: float = DEFAULT_TOL) -> DiscretenessReport:
    """discrete iff q* -> infinity at both ends, cross-checked by window masses."""
    sides = [side_limit(spec.positive, s, tol) for s in (-1, 1)]
    tail_discrete = all(s.kind == "growing" for s in sides)
    mol = molchanov_test(spec.positive)
    kinds = [s.kind for s in sides]
    Q = min(s.Q for s in sides)
    if tail_discrete and mol["grows"]:
        return DiscretenessReport("discrete", kinds, mol, Q)
    if not tail_discrete and not mol["grows"]:
        return DiscretenessReport("not_discrete", kinds, mol, Q)
    msg = f"tail analysis says {'discrete' if tail_discrete else 'not discrete'}, window-mass test disagrees"
    return DiscretenessReport("undetermined", kinds, mol, Q, msg)


# ---------------------------------------------------------------------------
# Schatten classes


def _tail_order(positive, side):
    """('exp'|'power'|'log', rate) for the fastest-growing component on ``side``."""
    best = None
    rank = {"log": 0, "power": 1, "exp": 2}
    for c in positive:
        t = c.tail(side)
        if t.kind != "growing" or t.growth is None:
            continue
        kind, rate = t.growth
        if kind == "power" and rate == 0:
            continue
        cand = (rank[kind], rate, kind)
        if best is None or cand[:2] > best[:2]:
            best = cand
    return None if best is None else (best[2], best[1])


def _tail_integrable(order, p):
    kind, rate = order
    if kind == "exp":
        return True
    if kind == "log":
        return False
    return rate * (p - 0.5) > 1.0


@dataclass
class SchattenReport:
    p: float
    member: bool
    integral: float
    integral_error: float
    tail_orders: list
    bracket: list | None
    partial_integrals: list = field(default_factory=list)
    note: str = ""

    def to_dict(self):
        return asdict(self)


SCHATTEN_XMAX = 1e6
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(10)


def _q_power_integral(positive, expo, xmax, tol, max_level=7):
    """int_{-xmax}^{xmax} q*^expo dx by composite Gauss-Legendre in u, x = sinh(u).

    The cell count doubles until two levels agree to ``tol``; every level is a
    single vectorised q* evaluation. Returns (value, |last difference|).
    """
    U = math.asinh(xmax)
    qtol = min(DEFAULT_TOL, tol * 1e-2)
    n = max(32, int(math.ceil(8.0 * U)))
    prev, diff = None, math.inf
    for _ in range(max_level + 1):
        half = U / n
        mids = -U + half * (2.0 * np.arange(n) + 1.0)
        u = (mids[:, None] + half * _GL_NODES[None, :]).ravel()
        vals = q_star(positive, np.sinh(u), qtol) ** expo * np.cosh(u)
        total = float(half * (vals.reshape(n, -1) @ _GL_WEIGHTS).sum())
        if prev is not None:
            diff = abs(total - prev)
            if diff <= tol * abs(total):
                break
        prev, n = total, 2 * n
    return total, diff


def _tail_remainder(positive, expo, xmax, orders):
    """Integral beyond +-xmax assuming q*^expo ~ C |x|^(-r) past the last sample."""
    rem = 0.0
    for side, order in zip((-1, 1), orders):
        kind, rate = order
        if kind != "power":
            continue  # exponential tails: q*^expo is negligible there
        r = rate * (-expo)
        rem += float(q_star(positive, side * xmax)) ** expo * xmax / (r - 1.0)
    return rem


def schatten(spec: SignedMeasureSpec, p: float, tol: float = 1e-8, check_discrete: bool = True) -> SchattenReport:
    """Membership of the resolvent in the p-Schatten class and, for mu_- = 0,
    a bracket for sum lambda_k^{-p}."""
    if not p > 0.5:
        raise ValueError("p must exceed 1/2")
    if check_discrete:
        verdict = classify_discreteness(spec).verdict
        if verdict != "discrete":
            raise ValueError(f"spectrum is not certified discrete ({verdict})")
    positive = list(spec.positive)
    orders = [_tail_order(positive, s) for s in (-1, 1)]
    expo = 0.5 - p
    partial = [[R, _q_power_integral(positive, expo, R, 1e-6)[0]] for R in (10.0, 100.0, 1000.0)]
    if any(o is None or not _tail_integrable(o, p) for o in orders):
        return SchattenReport(p, False, math.inf, 0.0, orders, None, partial,
                              "integral of q*^(1/2-p) diverges at infinity")
    xmax = min([SCHATTEN_XMAX] + [c.probe_extent() for c in positive])
    core, err = _q_power_integral(positive, expo, xmax, tol)
    rem = _tail_remainder(positive, expo, xmax, orders)
    I, err = core + rem, err + 0.5 * rem
    bracket = None
    if is_positive_case(spec):
        lo = (2.0 * p / (p - 0.5)) * (3.0 / (32.0 * PI2P1)) ** p * (I - err)
        hi = (p / (p - 0.5)) * 5.0**p * (I + err)
        bracket = [lo, hi]
    return SchattenReport(p, True, I, err, orders, bracket, partial)


# ---------------------------------------------------------------------------
# per-index brackets and multiplicities


def _require_positive_discrete(spec, check_discrete):
    if not is_positive_case(spec):
        raise ValueError("requires a purely positive potential (mu_- = 0)")
    if check_discrete:
        verdict = classify_discreteness(spec).verdict
        if verdict != "discrete":
            raise ValueError(f"spectrum is not certified discrete ({verdict})")


@dataclass
class EigenBracket:
    n: int
    lo: float
    hi: float
    F: float
    xi: float
    piece: str
    caveat: str = SIMPLICITY_CAVEAT

    def to_dict(self):
        return asdict(self)


def eigenvalue_bracket(spec: SignedMeasureSpec, n: int, xi_value: float | None = None,
                       check_discrete: bool = True) -> EigenBracket:
    """[F(n)/4, (16(pi^2+1)/3) F(n)] for the n-th eigenvalue."""
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    _require_positive_discrete(spec, check_discrete)
    x = xi(spec.positive).xi if xi_value is None else xi_value
    Fn = F_inverse(spec.positive, float(n), x)
    return EigenBracket(int(n), 0.25 * Fn, 16.0 * PI2P1 / 3.0 * Fn, Fn, x, "linear" if n <= 1 else "M")


@dataclass
class MultiplicityReport:
    nu: float
    value: float
    integer_bound: float
    upper_term: float
    lower_term: float

    def to_dict(self):
        return asdict(self)


def multiplicity_bound(spec: SignedMeasureSpec, nu: float, tol: float = DEFAULT_TOL,
                       check_discrete: bool = True) -> MultiplicityReport:
    """M(4 nu) - 2 M(3 nu / (16 (pi^2 + 1)))."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    _require_positive_discrete(spec, check_discrete)
    up, _, _ = _M_bound(spec.positive, 4.0 * nu, tol, +1)
    low, _, _ = _M_bound(spec.positive, 3.0 * nu / (16.0 * PI2P1), tol, -1)
    value = up - 2.0 * low
    return MultiplicityReport(nu, value, float(math.floor(value)) if math.isfinite(value) else math.inf, up, low)


# ---------------------------------------------------------------------------
# aggregate


@dataclass
class SpectralSummary:
    lambda1: Bracket
    essential: EssentialReport
    discreteness: DiscretenessReport
    below_essential: bool
    schatten: list

    def to_dict(self):
        return {
            "lambda1": self.lambda1.to_dict(),
            "essential": self.essential.to_dict(),
            "discreteness": self.discreteness.to_dict(),
            "below_essential": self.below_essential,
            "schatten": [s.to_dict() for s in self.schatten],
        }


def spectral_summary(spec: SignedMeasureSpec, p_list=(), tol: float = DEFAULT_TOL) -> SpectralSummary:
    k = resolve_constants(spec)
    ess = essential_inf_bounds(spec, tol, k)
    lam1 = lambda1_bounds(spec, tol, k)
    disc = classify_discreteness(spec, tol)
    sch = []
    if disc.verdict == "discrete":
        sch = [schatten(spec, p, check_discrete=False) for p in p_list]
    return SpectralSummary(lam1, ess, disc, ess.below_essential, sch)


__all__ = [
    "PI2P1",
    "ClassConstants",
    "resolve_constants",
    "theta_lower",
    "s_upper",
    "is_positive_case",
    "BoundReport",
    "counting_bounds",
    "negative_count_bound",
    "Bracket",
    "lambda1_bounds",
    "essential_inf_bounds",
    "molchanov_test",
    "classify_discreteness",
    "SchattenReport",
    "schatten",
    "EigenBracket",
    "eigenvalue_bracket",
    "multiplicity_bound",
    "SpectralSummary",
    "spectral_summary",
    "M_of",
]
