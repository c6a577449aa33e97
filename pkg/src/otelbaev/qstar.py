"""The Otelbaev function q*(x) = 1 / d(x)**2 and the quantities built from it.

d(x) is the largest window length d for which d * mu([x - d/2, x + d/2]) <= 1.
The map d -> d * mu(window) is nondecreasing but jumps whenever the closed
window swallows an atom, so d is located by bisection on the predicate
``g(d) <= 1`` rather than by root finding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import BracketError, NumericFailure
from .measure import Component, as_components, interval_mass, total_mass

DEFAULT_TOL = 1e-10
SAMPLES_PER_UNIT = 512
MAX_REFINE_LEVELS = 12
MAX_BRACKET_STEPS = 2200  # enough to walk across the whole double range
SCAN_BUDGET = 4_000_000

__all__ = [
    "DEFAULT_TOL",
    "OtelbaevProfile",
    "SublevelResult",
    "XiResult",
    "LimitReport",
    "d_mu",
    "q_star",
    "profile",
    "est_q_violations",
    "sublevel_measure",
    "M_of",
    "xi",
    "M_tilde",
    "F_inverse",
    "M_tilde_and_F",
    "side_limit",
    "q0_and_Q",
]


def _positive(measure) -> list[Component]:
    comps = as_components(measure)
    if not total_mass(comps) > 0:
        raise ValueError("the measure has no mass; q* is undefined")
    return comps


def d_mu(measure, x, tol: float = DEFAULT_TOL):
    """d(x) for scalar or array ``x``, to relative bracket width ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    comps = _positive(measure)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xs = np.atleast_1d(x).ravel()
    if not np.all(np.isfinite(xs)):
        raise ValueError("x must be finite")

    def ok(xv, d):
        return d * interval_mass(comps, xv - d / 2, xv + d / 2) <= 1.0

    n = xs.size
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    d = np.ones(n)
    for _ in range(MAX_BRACKET_STEPS):
        todo = np.flatnonzero(~((lo > 0) & np.isfinite(hi)))
        if todo.size == 0:
            break
        good = ok(xs[todo], d[todo])
        lo[todo[good]] = d[todo[good]]
        hi[todo[~good]] = d[todo[~good]]
        d[todo] = np.where(np.isinf(hi[todo]), d[todo] * 2.0, d[todo] * 0.5)
        if np.any(d[todo] == 0) or np.any(np.isinf(d[todo])):
            break
    if not np.all((lo > 0) & np.isfinite(hi)):
        raise BracketError("could not bracket d(x): local mass is effectively zero or infinite")

    while True:
        todo = np.flatnonzero(hi - lo > tol * lo)
        if todo.size == 0:
            break
        mid = 0.5 * (lo[todo] + hi[todo])
        good = ok(xs[todo], mid)
        lo[todo[good]] = mid[good]
        hi[todo[~good]] = mid[~good]
    out = (0.5 * (lo + hi)).reshape(x.shape)
    return float(out) if scalar else out


def q_star(measure, x, tol: float = DEFAULT_TOL):
    """Otelbaev function 1 / d(x)**2 (strictly positive)."""
    d = d_mu(measure, x, tol)
    return 1.0 / (d * d)


# ---------------------------------------------------------------------------
# profiles


@dataclass
class OtelbaevProfile:
    window: tuple[float, float]
    x: np.ndarray
    q: np.ndarray
    tol: np.ndarray
    refined: np.ndarray

    def rows(self):
        return [(float(a), float(b), float(c)) for a, b, c in zip(self.x, self.q, self.tol)]

    def to_dict(self):
        return {
            "window": list(self.window),
            "x": self.x.tolist(),
            "q_star": self.q.tolist(),
            "tol": self.tol.tolist(),
            "refined": self.refined.tolist(),
        }


def profile(measure, window, n_samples: int | None = None, tol: float = DEFAULT_TOL) -> OtelbaevProfile:
    """Sample q* on ``window`` with adaptive refinement.

    A cell is split while it is wider than 1/(8 sqrt(q)) at its larger
    endpoint (the scale on which q* may change by a factor 4) or its end
    values differ by more than 25 %, up to 12 levels.
    """
    a, b = map(float, window)
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise ValueError("window must be finite with a < b")
    if n_samples is None:
        n_samples = max(2, int(math.ceil(SAMPLES_PER_UNIT * (b - a))) + 1)
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    comps = _positive(measure)
    x = np.linspace(a, b, n_samples)
    q = q_star(comps, x, tol)
    refined = np.zeros(len(x), dtype=bool)
    for _ in range(MAX_REFINE_LEVELS):
        width = np.diff(x)
        qmax = np.maximum(q[:-1], q[1:])
        qmin = np.minimum(q[:-1], q[1:])
        split = (width > 1.0 / (8.0 * np.sqrt(qmax))) | (qmax > 1.25 * qmin)
        split &= width > 1e-12 * max(1.0, abs(a), abs(b))
        if not split.any():
            break
        mids = 0.5 * (x[:-1][split] + x[1:][split])
        qm = q_star(comps, mids, tol)
        order = np.argsort(np.concatenate([x, mids]), kind="stable")
        x = np.concatenate([x, mids])[order]
        q = np.concatenate([q, qm])[order]
        refined = np.concatenate([refined, np.ones(len(mids), dtype=bool)])[order]
    return OtelbaevProfile((a, b), x, q, 2.0 * tol * q, refined)


def est_q_violations(prof: OtelbaevProfile) -> list[tuple[float, float]]:
    """Pairs (z, x) of samples contradicting the local comparison estimate.

    If sqrt(q(z)) < 1/(2d) then sqrt(q(x)) <= 1/d for |x - z| <= d/2. Taking the
    largest admissible d, a violation is |x - z| < 1/(4 sqrt(q(z))) together with
    q(x) > 4 q(z), up to the per-sample tolerances.
    """
    x, q, t = prof.x, prof.q, prof.tol
    reach = 1.0 / (4.0 * np.sqrt(q))
    lo = np.searchsorted(x, x - reach, side="right")
    hi = np.searchsorted(x, x + reach, side="left")
    bad = []
    for i in range(len(x)):
        seg = slice(lo[i], hi[i])
        limit = 4.0 * (q[i] + t[i]) + t[seg]
        hits = np.flatnonzero(q[seg] > limit)
        for j in hits:
            bad.append((float(x[i]), float(x[lo[i] + j])))
    return bad


# ---------------------------------------------------------------------------
# tails and sublevel sets


@dataclass
class LimitReport:
    """liminf of q* towards one side."""

    side: int
    kind: str
    Q: float
    certified: bool
    start: float
    note: str = ""


def _tail_parts(comps, side):
    infos = [(c, c.tail(side)) for c in comps]
    return [(c, t) for c, t in infos if t.kind != "empty"], max([t.start for _, t in infos] + [0.0])


def _periodic_min(comps, side, start, period, tol):
    span = max(4.0 * period, 4.0)
    base = side * (start + 4.0 * span + 2.0)
    xs = np.linspace(base, base + side * span, 4001)
    qs = q_star(comps, xs, tol)
    best = float(qs.min())
    for i in np.argsort(qs)[:4]:
        lo, hi = sorted((xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]))
        if hi > lo:
            r = optimize.minimize_scalar(lambda v: q_star(comps, v, tol), bounds=(lo, hi), method="bounded",
                                         options={"xatol": 1e-12 * max(1.0, abs(lo))})
            best = min(best, float(r.fun))
    return best


def side_limit(measure, side: int, tol: float = DEFAULT_TOL) -> LimitReport:
    """liminf of q*(x) as side * x -> +inf, certified where a closed form exists."""
    comps = _positive(measure)
    parts, start = _tail_parts(comps, side)
    if not parts:
        return LimitReport(side, "empty", 0.0, True, start, "finite mass on this side: q* ~ 1/(4x^2) -> 0")
    kinds = {t.kind for _, t in parts}
    if "growing" in kinds:
        return LimitReport(side, "growing", math.inf, True, start, "window masses grow without bound")
    kind = "gapped" if "gapped" in kinds else "bounded"
    if len(parts) == 1:
        comp, info = parts[0]
        if info.q_limit is not None:
            return LimitReport(side, kind, float(info.q_limit), True, start, "closed-form tail limit")
        if info.period:
            Q = _periodic_min(comps, side, start, info.period, tol)
            return LimitReport(side, kind, Q, True, start, "minimum over one far period")
    period = max((t.period or 1.0) for _, t in parts)
    Q = _periodic_min(comps, side, start, 8.0 * period, tol)
    return LimitReport(side, kind, Q, False, start, "numeric far-window minimum (heuristic)")


@dataclass
class SublevelResult:
    level: float
    measure: float
    error: float
    window: tuple[float, float] | None
    divergence: str | None = None
    measure_strict: float | None = None
    heuristic: bool = False
    method: str = "scan"

    def to_dict(self):
        return {
            "level": self.level,
            "measure": self.measure,
            "measure_strict": self.measure_strict,
            "error": self.error,
            "window": None if self.window is None else list(self.window),
            "divergence": self.divergence,
            "heuristic": self.heuristic,
            "method": self.method,
        }


def _growing_escape(comps, side, lam, start):
    """Smallest-ish X with q* > lam whenever side * x >= X, via window-mass lower bounds."""
    r = (1.0 - 1e-9) / (2.0 * math.sqrt(lam))
    need = 1.0 / (2.0 * r)

    def enough(X):
        return sum(c.window_mass_lower(r, X, side) for c in comps) > need

    X = max(1.0, start + r)
    while not enough(X):
        X *= 2.0
        if X > 1e15:
            raise NumericFailure("sublevel set extends beyond 1e15; escape point not representable")
    lo, hi = X / 2.0, X
    if lo >= start + r and not enough(lo):
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if enough(mid):
                hi = mid
            else:
                lo = mid
            if hi - lo < 1e-3 * hi:
                break
    return hi


def _side_escape(comps, side, lam, tol):
    """(X, divergence_reason, heuristic): q* > lam for all side * x >= X."""
    lim = side_limit(comps, side, tol)
    parts, start = _tail_parts(comps, side)
    if lim.kind == "growing":
        return _growing_escape(comps, side, lam, start), None, False
    if lim.kind == "empty":
        return None, f"tail-nonescaping: q* -> 0 as {'+' if side > 0 else '-'}inf", False
    at_or_above = lam > lim.Q if lim.kind == "gapped" else lam >= lim.Q * (1 - 4 * tol)
    if at_or_above:
        return None, f"tail-nonescaping: liminf q* = {lim.Q!r} is below the level", not lim.certified
    if lim.kind == "gapped" and len(parts) == 1 and hasattr(parts[0][0], "escape_position") and lam < lim.Q:
        return max(start, parts[0][0].escape_position(lam, side)), None, False
    period = max((t.period or 0.0) for _, t in parts)
    X = start + 2.0 / math.sqrt(lim.Q) + period + 1.0
    return X, None, (not lim.certified) or lam == lim.Q


def _radial_center(comps):
    centers = {c.radial_center() for c in comps}
    if len(centers) == 1:
        (c,) = centers
        return c
    return None


def _level_predicate(comps, thr, strict):
    """Vectorised test of q*(x) <= thr (or < thr) with a single mass evaluation.

    g is nondecreasing in d, so q*(x) <= thr exactly when g(1/sqrt(thr)) <= 1,
    except on the level set itself where g may jump.
    """
    d0 = 1.0 / math.sqrt(thr)

    def pred(x):
        g = d0 * interval_mass(comps, x - d0 / 2, x + d0 / 2)
        return g < 1.0 if strict else g <= 1.0

    return pred


def _radial_sublevel(comps, center, lam, tol):
    """q* is symmetric about ``center`` and nondecreasing in |x - center|."""

    def extent(pred):
        def inside(t):
            return bool(pred(np.float64(center + t)))

        if not inside(0.0):
            return 0.0, 0.0
        lo, hi = 0.0, 1.0
        while inside(hi):
            lo, hi = hi, 2.0 * hi
            if hi > 1e300:
                raise NumericFailure("sublevel set is unbounded in floating point range")
        while hi - lo > 1e-14 * hi:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if inside(mid):
                lo = mid
            else:
                hi = mid
        return 2.0 * lo, 2.0 * (hi - lo)

    m_c, e_c = extent(_level_predicate(comps, lam * (1 + 4 * tol), False))
    m_s, e_s = extent(_level_predicate(comps, lam * (1 - 4 * tol), True))
    return m_c, m_s, e_c + e_s


def _crossings(xa, xb, pa, pred, iters=80):
    """Bisect the predicate change inside each cell; returns the change points and widths."""
    lo, hi = xa.copy(), xb.copy()
    for _ in range(iters):
        if lo.size == 0:
            break
        mid = 0.5 * (lo + hi)
        same = pred(mid) == pa
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
        if np.all(hi - lo <= 1e-14 * np.maximum(1.0, np.abs(hi))):
            break
    return 0.5 * (lo + hi), hi - lo


def _scan(comps, a, b, lam, tol):
    width = b - a
    h = min(width / 256.0, 1.0 / (8.0 * math.sqrt(lam)))
    n = int(math.ceil(width / h)) + 1
    if n > SCAN_BUDGET:
        raise NumericFailure(f"sublevel scan would need {n} samples")
    x = np.linspace(a, b, n)
    q = np.concatenate([q_star(comps, chunk, tol) for chunk in np.array_split(x, max(1, n // 200_000))])
    closed = _level_predicate(comps, lam * (1 + 4 * tol), False)
    strict = _level_predicate(comps, lam * (1 - 4 * tol), True)
    # A point with q* <= lam forces q* <= 4 lam within 1/(4 sqrt(lam)) > h, so
    # cells whose ends both exceed 4 lam are certified empty. The remaining
    # near-level cells are bisected while they hide a dip or bump.
    for _ in range(8):
        near = (np.minimum(q[:-1], q[1:]) <= 4 * lam) & (np.maximum(q[:-1], q[1:]) >= lam / 4)
        idx = np.flatnonzero(near)
        if idx.size == 0:
            break
        mids = 0.5 * (x[idx] + x[idx + 1])
        qm = q_star(comps, mids, tol)
        qa, qb = q[idx], q[idx + 1]
        ends_in = (qa <= lam) & (qb <= lam)
        ends_out = (qa > lam) & (qb > lam)
        dip = ends_out & ((qm <= lam) | (qm < np.minimum(qa, qb) * (1 - 1e-6)))
        bump = ends_in & ((qm > lam) | (qm > np.maximum(qa, qb) * (1 + 1e-6)))
        keep = dip | bump
        if not keep.any():
            break
        order = np.argsort(np.concatenate([x, mids[keep]]), kind="stable")
        x = np.concatenate([x, mids[keep]])[order]
        q = np.concatenate([q, qm[keep]])[order]

    def total(pred):
        p = pred(x)
        cw = np.diff(x)
        full = float(np.sum(cw[p[:-1] & p[1:]]))
        change = np.flatnonzero(p[:-1] != p[1:])
        if change.size == 0:
            return full, 0.0
        c, err = _crossings(x[change], x[change + 1], p[change], pred)
        part = np.where(p[change], c - x[change], x[change + 1] - c)
        return full + float(np.sum(part)), float(np.sum(err))

    m_c, e_c = total(closed)
    m_s, e_s = total(strict)
    return m_c, m_s, e_c + e_s


def sublevel_measure(measure, lam: float, tol: float = DEFAULT_TOL) -> SublevelResult:
    """Lebesgue measure of {x : q*(x) <= lam}; +inf with a reason when a tail never escapes."""
    lam = float(lam)
    if lam < 0 or math.isnan(lam):
        raise ValueError("level must be >= 0")
    comps = _positive(measure)
    if lam == 0.0:
        return SublevelResult(0.0, 0.0, 0.0, None, None, 0.0)
    ends, heuristic = [], False
    for side in (-1, 1):
        X, reason, heur = _side_escape(comps, side, lam, tol)
        if reason is not None:
            return SublevelResult(lam, math.inf, 0.0, None, reason, math.inf, heur)
        ends.append(X)
        heuristic |= heur
    a, b = -ends[0], ends[1]
    center = _radial_center(comps)
    if center is not None:
        m_c, m_s, err = _radial_sublevel(comps, center, lam, tol)
        return SublevelResult(lam, m_c, err, (a, b), None, m_s, heuristic, "radial")
    m_c, m_s, err = _scan(comps, a, b, lam, tol)
    return SublevelResult(lam, m_c, err, (a, b), None, m_s, heuristic, "scan")


def M_of(measure, lam: float, tol: float = DEFAULT_TOL) -> float:
    """sqrt(lam) times the measure of the closed sublevel set {q* <= lam}."""
    if lam == 0:
        return 0.0
    res = sublevel_measure(measure, lam, tol)
    return math.sqrt(lam) * res.measure


# ---------------------------------------------------------------------------
# monotone completion and its inverse


@dataclass
class XiResult:
    xi: float
    width: float


def xi(measure, tol: float = 1e-12) -> XiResult:
    """sup{lam > 0 : M(lam) < 1} by doubling and bisection."""
    comps = _positive(measure)

    def below(lam):
        return M_of(comps, lam, min(tol, DEFAULT_TOL)) < 1.0

    lo, hi = 0.0, 1.0
    steps = 0
    while below(hi):
        lo, hi = hi, 2.0 * hi
        steps += 1
        if steps > 200:
            raise NumericFailure("M stays below 1: no finite xi")
    if lo == 0.0:
        lo = hi
        while not below(lo):
            hi, lo = lo, 0.5 * lo
            steps += 1
            if steps > 400:
                raise NumericFailure("M(lam) >= 1 for every sampled lam > 0")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if below(mid):
            lo = mid
        else:
            hi = mid
    return XiResult(0.5 * (lo + hi), hi - lo)


def M_tilde(measure, lam: float, xi_value: float | None = None, tol: float = DEFAULT_TOL) -> float:
    x = xi(measure).xi if xi_value is None else xi_value
    if lam < x:
        return lam / x
    return M_of(measure, lam, tol)


def F_inverse(measure, y: float, xi_value: float | None = None, tol: float = 1e-12) -> float:
    """Generalised inverse of M~: sup{lam : M~(lam) < y}."""
    if y < 0:
        raise ValueError("F is defined for y >= 0")
    x = xi(measure, tol).xi if xi_value is None else xi_value
    if y <= 1.0:
        return y * x
    comps = as_components(measure)
    lo, hi = x, 2.0 * x
    steps = 0
    while M_of(comps, hi, min(tol, DEFAULT_TOL)) < y:
        lo, hi = hi, 2.0 * hi
        steps += 1
        if steps > 200:
            raise NumericFailure("not invertible here: M stays below the target")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if M_of(comps, mid, min(tol, DEFAULT_TOL)) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def M_tilde_and_F(measure, argument: float, mode: str = "forward", tol: float = 1e-12) -> float:
    if mode == "forward":
        return M_tilde(measure, argument)
    if mode == "inverse":
        return F_inverse(measure, argument, tol=tol)
    raise ValueError("mode must be 'forward' or 'inverse'")


# ---------------------------------------------------------------------------
# global minimum and liminf


@dataclass
class Q0Report:
    q0: float
    Q: float
    q0_at: float | None
    heuristic: bool
    sides: list = field(default_factory=list)

    def __iter__(self):
        yield self.q0
        yield self.Q

    def to_dict(self):
        return {
            "q0": self.q0,
            "Q": self.Q,
            "q0_at": self.q0_at,
            "heuristic": self.heuristic,
            "sides": [
                {"side": s.side, "kind": s.kind, "Q": s.Q, "certified": s.certified, "note": s.note}
                for s in self.sides
            ],
        }


def _central_window(comps, tol):
    q_origin = q_star(comps, 0.0, tol)
    ends = []
    for side in (-1, 1):
        lim = side_limit(comps, side, tol)
        _, start = _tail_parts(comps, side)
        if lim.kind == "growing":
            X = _growing_escape(comps, side, q_origin * 1.01, start)
        else:
            X = start + 2.0 / math.sqrt(max(lim.Q, q_origin)) + 2.0
        ends.append(X)
    return -ends[0], ends[1]


def q0_and_Q(measure, tol: float = DEFAULT_TOL) -> Q0Report:
    """inf of q* over the line and its liminf at infinity."""
    comps = _positive(measure)
    sides = [side_limit(comps, s, tol) for s in (-1, 1)]
    Q = min(s.Q for s in sides)
    heuristic = not all(s.certified for s in sides)
    if any(s.kind == "empty" for s in sides):
        return Q0Report(0.0, Q, None, heuristic, sides)
    a, b = _central_window(comps, tol)
    n = int(min(max(2001, 64 * (b - a)), 400_001))
    xs = np.linspace(a, b, n)
    qs = q_star(comps, xs, tol)
    best, at = float(qs.min()), float(xs[np.argmin(qs)])
    for i in np.argsort(qs)[:6]:
        lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, n - 1)]
        r = optimize.minimize_scalar(lambda v: q_star(comps, v, tol), bounds=(lo, hi), method="bounded",
                                     options={"xatol": 1e-12 * max(1.0, abs(lo), abs(hi))})
        if r.fun < best:
            best, at = float(r.fun), float(r.x)
    if best > Q:
        best, at = Q, None
    return Q0Report(best, Q, at, heuristic, sides)
