import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from otelbaev.measure import (
    Atoms,
    Cantor,
    Family,
    HarmonicComb,
    InvalidSpecError,
    Lattice,
    PiecewisePoly,
    SignedMeasureSpec,
    brinck_bound,
    cantor_cdf,
    cdf,
    harmonic_number,
    interval_mass,
    shift,
    spec_from_dict,
    spec_to_dict,
    validate_spec,
)

# ---------------------------------------------------------------------------
# interval_mass


def test_unit_density_on_unit_interval():
    assert interval_mass([PiecewisePoly((0.0, 10.0), ((1.0,),))], 0.0, 1.0) == 1.0


def test_atom_endpoint_semantics():
    a = [Atoms((0.0,), (2.0,))]
    assert interval_mass(a, 0.0, 1.0, left_closed=False) == 0.0
    assert interval_mass(a, -1.0, 1.0) == 2.0
    assert interval_mass(a, 0.0, 0.0) == 2.0
    assert interval_mass(a, -1.0, 0.0, right_closed=False) == 0.0


def test_cantor_first_third_has_half_mass():
    # C(1/3) = 1/2 from the ternary expansion 0.0222... = 0.1 in binary
    assert interval_mass([Cantor(0.0, 1.0, 1.0)], 0.0, 1.0 / 3.0) == pytest.approx(0.5, abs=1e-14)


def test_cantor_full_support_and_gap():
    c = Cantor(2.0, 5.0, 3.0)
    assert interval_mass([c], 2.0, 5.0) == pytest.approx(3.0, abs=1e-13)
    assert interval_mass([c], 3.0, 4.0, left_closed=False, right_closed=False) == pytest.approx(0.0, abs=1e-13)


def test_invalid_interval_raises():
    with pytest.raises(ValueError):
        interval_mass([Atoms((0.0,), (1.0,))], 1.0, 0.0)


def test_infinite_family_mass_is_inf():
    assert interval_mass([Family("even_square")], -math.inf, math.inf) == math.inf
    assert interval_mass([Family("even_square")], 0.0, math.inf) == math.inf


def test_density_point_mass_is_zero():
    for comp in (Family("even_square"), Family("abs_pow", kappa=1.5), PiecewisePoly((0.0, 1.0), ((1.0, 2.0),))):
        assert interval_mass([comp], 0.5, 0.5) == 0.0


def test_lattice_closed_form_counts():
    lat = Lattice(1.0, 1.0)
    assert interval_mass([lat], -2.5, 2.5) == 5.0
    assert interval_mass([lat], 0.0, 1.0) == 2.0
    assert interval_mass([lat], 0.0, 1.0, left_closed=False, right_closed=False) == 0.0
    ab = Lattice(1.0, 2.0, "abs_index")
    # sites -3..3 carry 2*|k|: 2*(3+2+1+0+1+2+3)
    assert interval_mass([ab], -3.0, 3.0) == 24.0
    assert interval_mass([ab], 1.0, 3.0, left_closed=False) == 10.0
    assert interval_mass([Lattice(0.5, 1.0, kmin=0, kmax=3)], -10.0, 10.0) == 4.0


def test_lattice_matches_explicit_atoms():
    rng = np.random.default_rng(3)
    lat = Lattice(0.37, 0.8, "abs_index", kmin=-40, kmax=55, offset=0.11)
    k = np.arange(-40, 56)
    atoms = Atoms(tuple(0.11 + 0.37 * k), tuple(0.8 * np.abs(k)))
    for _ in range(200):
        a, b = np.sort(rng.uniform(-20, 25, 2))
        lc, rc = rng.integers(0, 2, 2).astype(bool)
        assert interval_mass([lat], a, b, lc, rc) == pytest.approx(interval_mass([atoms], a, b, lc, rc), abs=1e-9)


def test_piecewise_poly_antiderivative():
    pp = PiecewisePoly((0.0, 1.0, 3.0), ((1.0, 0.0, 3.0), (4.0, -1.0)))
    # first piece 1 + 3u^2 on [0,1] -> 2 ; second 4 - u on [0,2] -> 6
    assert interval_mass([pp], 0.0, 3.0) == pytest.approx(8.0, abs=1e-14)
    assert interval_mass([pp], 0.5, 2.0) == pytest.approx((1 - 0.5 + 1 - 0.125) + (4 - 0.5), abs=1e-14)


def test_piecewise_poly_rejects_negative_density():
    with pytest.raises(InvalidSpecError):
        PiecewisePoly((0.0, 1.0), ((1.0, -2.0),))


def test_log_pow_matches_quadrature():
    from scipy.integrate import quad

    f = Family("log_pow", n=3, cutoff=3.5)
    exact = quad(lambda t: math.log(t) ** 3, 3.5, 20.0)[0]
    assert interval_mass([f], -1.0, 20.0) == pytest.approx(exact, rel=1e-12)
    assert interval_mass([f], -20.0, 20.0) == pytest.approx(2 * exact, rel=1e-12)


def test_log_pow_far_window_no_cancellation():
    f = Family("log_pow", n=2, cutoff=3.0)
    x = 1e12
    a, b = x - 0.07, x + 0.07
    assert interval_mass([f], a, b) == pytest.approx((b - a) * math.log(x) ** 2, rel=1e-9)


def test_staircase_cells():
    f = Family("staircase", power=2.0)
    # density (1+|k|)^2 on (k, k+1]
    assert interval_mass([f], 0.0, 1.0) == pytest.approx(1.0)
    assert interval_mass([f], 2.0, 3.0) == pytest.approx(9.0)
    assert interval_mass([f], -2.0, -1.0) == pytest.approx(9.0)
    # (-1.5, -1] in cell k=-2 (density 9), (-1, 0] density 4, (0, 0.5] density 1
    assert interval_mass([f], -1.5, 0.5) == pytest.approx(0.5 * 9 + 1 * 4 + 0.5 * 1)


def test_harmonic_comb_sites():
    h = HarmonicComb()
    pts = h.sites(-2.0, 2.0)
    assert pts.tolist() == pytest.approx([-11 / 6, -1.5, -1.0, 0.0, 1.0, 1.5, 11 / 6])
    assert interval_mass([h], -1.6, 1.6) == 5.0
    assert interval_mass([h], 0.0, 1.0, right_closed=False) == 1.0
    assert harmonic_number(np.array([1e5]))[0] == pytest.approx(sum(1 / j for j in range(1, 100001)), rel=1e-14)


def test_abs_pow_narrow_window_accuracy():
    f = Family("abs_pow", kappa=1.5)
    a, b = 100.0, 100.0 + 2.0**-20
    from decimal import Decimal, getcontext

    getcontext().prec = 60
    exact = float((Decimal(b) ** Decimal("2.5") - Decimal(a) ** Decimal("2.5")) / Decimal("2.5"))
    assert interval_mass([f], a, b) == pytest.approx(exact, rel=1e-9)


# ---------------------------------------------------------------------------
# cdf


def test_cdf_examples():
    assert cdf([Family("even_square")], 1.0) == pytest.approx(1.0 / 3.0)
    assert cdf([Cantor(0.0, 1.0, 1.0)], 0.5) == pytest.approx(0.5, abs=1e-14)
    a = [Atoms((0.0,), (2.0,))]
    assert cdf(a, 0.0) == 2.0
    assert cdf(a, -0.1) == 0.0


def test_cdf_right_continuous_with_jumps():
    a = [Atoms((-1.0, 2.0), (1.0, 3.0))]
    assert cdf(a, -1.0) == 0.0 and cdf(a, -1.0 - 1e-9) == -1.0
    assert cdf(a, 2.0) == 3.0 and cdf(a, 2.0 - 1e-9) == 0.0


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=30))
def test_cdf_nondecreasing(xs):
    comps = [Family("even_square"), Atoms((-1.0, 0.0, 2.0), (1.0, 0.5, 2.0)), Cantor(-2.0, 1.0, 1.5)]
    xs = np.sort(np.asarray(xs))
    vals = cdf(comps, xs)
    assert np.all(np.diff(vals) >= -1e-12)


# ---------------------------------------------------------------------------
# brinck_bound


def test_brinck_examples():
    assert brinck_bound([Lattice(1.0, 1.0)]) == 2.0
    assert brinck_bound([Atoms((0.0,), (3.0,))]) == 3.0
    assert brinck_bound([Family("abs_pow", kappa=0.0, scale=0.7)]) == pytest.approx(0.7)
    assert brinck_bound([Lattice(1.0, 1.0, "abs_index")]) == math.inf
    assert brinck_bound([Family("even_square")]) == math.inf


def test_brinck_atoms_sliding_window():
    atoms = Atoms((0.0, 0.4, 1.0, 1.5, 3.0), (1.0, 2.0, 0.5, 4.0, 1.0))
    # [0, 1] -> 3.5, [0.5, 1.5] -> 4.5, [1, 2] -> 4.5
    assert brinck_bound([atoms]) == 4.5
    # [0.4, 1.5] -> 6.5
    assert brinck_bound([atoms], 1.1) == 6.5


def test_brinck_density_does_not_overestimate():
    pp = PiecewisePoly((0.0, 2.0), ((0.0, 1.0),))  # density u on [0,2]
    # best unit window is [1, 2]: integral of u = 1.5
    val = brinck_bound([pp])
    assert val <= 1.5 + 1e-15
    assert val == pytest.approx(1.5, abs=1e-10)


def test_brinck_mixed_components():
    comps = [Atoms((0.0,), (1.0,)), PiecewisePoly((0.0, 1.0), ((2.0,),))]
    assert brinck_bound(comps) == pytest.approx(3.0, abs=1e-10)


# ---------------------------------------------------------------------------
# shift


def test_shift_examples():
    assert shift(Atoms((0.0,), (1.0,)), 2.0) == Atoms((2.0,), (1.0,))
    assert shift(Cantor(0.0, 1.0, 1.0), -1.0) == Cantor(-1.0, 0.0, 1.0)
    f = Family("even_square")
    g = shift(f, 0.7)
    xs = np.linspace(-3, 3, 13)
    diff = cdf([g], xs) - cdf([f], xs - 0.7)
    assert np.ptp(diff) < 1e-12
    assert interval_mass([g], 0.1, 1.3) == pytest.approx(interval_mass([f], 0.1 - 0.7, 1.3 - 0.7), rel=1e-12)


# ---------------------------------------------------------------------------
# properties

component_strategy = st.one_of(
    st.builds(
        lambda p, w: Atoms(tuple(sorted(set(p))), tuple(w[: len(set(p))])),
        st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=6),
        st.lists(st.floats(0, 3), min_size=6, max_size=6),
    ),
    st.builds(lambda d, c, r: Lattice(d, c, r), st.floats(0.2, 2.0), st.floats(0, 2), st.sampled_from(["constant", "abs_index"])),
    st.builds(lambda k, s: Family("abs_pow", kappa=k, scale=s), st.floats(0, 3), st.floats(0.1, 3)),
    st.just(Family("even_square")),
    st.builds(lambda a, w, m: Cantor(a, a + w, m), st.floats(-5, 5), st.floats(0.1, 4), st.floats(0.1, 3)),
    st.builds(lambda c: PiecewisePoly((c, c + 1.0, c + 2.5), ((1.0, 1.0), (2.0, 0.0, 0.5))), st.floats(-5, 5)),
)


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(a), abs(b))


@given(component_strategy, st.floats(-8, 8), st.floats(-8, 8), st.floats(0, 1))
def test_additivity(comp, a, b, t):
    a, b = min(a, b), max(a, b)
    c = a + t * (b - a)
    whole = interval_mass([comp], a, b)
    parts = interval_mass([comp], a, c, True, False) + interval_mass([comp], c, b)
    assert _rel(whole, parts) <= 1e-12 or (isinstance(comp, Cantor) and abs(whole - parts) < 1e-13)


@given(component_strategy, st.lists(st.floats(-8, 8), min_size=4, max_size=4))
def test_monotonicity(comp, pts):
    a2, a, b, b2 = sorted(pts)
    assert interval_mass([comp], a, b) <= interval_mass([comp], a2, b2) + 1e-12 * max(1.0, interval_mass([comp], a2, b2))


@given(component_strategy, st.floats(-8, 8), st.floats(0, 5), st.floats(-6, 6))
def test_translation(comp, a, w, y):
    b = a + w
    lhs = interval_mass([shift(comp, y)], a, b)
    rhs = interval_mass([comp], a - y, b - y)
    assert _rel(lhs, rhs) <= 1e-12 or abs(lhs - rhs) <= 1e-12 * max(1.0, abs(y), abs(a), abs(b)) * max(1.0, lhs)


@given(st.floats(0, 1.0 / 3.0))
def test_cantor_self_similarity(x):
    c = [Cantor(0.0, 1.0, 1.0)]
    assert abs(interval_mass(c, 0.0, x) - 0.5 * interval_mass(c, 0.0, 3.0 * x)) <= 1e-12


def test_cantor_cdf_reference_values():
    # independent exact oracle via rational ternary digits
    from fractions import Fraction

    def exact(fr, depth=60):
        out, scale = Fraction(0), Fraction(1, 2)
        for _ in range(depth):
            fr *= 3
            d = int(fr)
            fr -= d
            if d == 1:
                return out + scale
            if d == 2:
                out += scale
            scale /= 2
        return out

    # arguments whose ternary digits the float map reproduces exactly
    for num, den in ((1, 4), (3, 4), (1, 3), (2, 3), (1, 9), (8, 9)):
        assert float(cantor_cdf(num / den)) == pytest.approx(float(exact(Fraction(num, den))), abs=1e-14)
    # generic rationals: rounding of the argument passes through the Holder modulus
    for num, den in ((7, 27), (10, 13), (5, 7), (1, 10)):
        assert float(cantor_cdf(num / den)) == pytest.approx(float(exact(Fraction(num, den))), abs=1e-9)


# ---------------------------------------------------------------------------
# validation and serialisation


def test_validate_empty_positive():
    rep = validate_spec(SignedMeasureSpec((), ()))
    assert not rep.ok and "μ₊(ℝ)=0" in rep.violations


def test_validate_interleaved_lattices_is_valid():
    spec = SignedMeasureSpec((Lattice(1.0, 1.0),), (Lattice(1.0, 1.0, offset=0.5),))
    rep = validate_spec(spec)
    assert rep.ok and rep.beta == 2.0


def test_validate_unbounded_negative():
    rep = validate_spec(SignedMeasureSpec((Family("even_square"),), (Lattice(1.0, 0.3, "abs_index"),)))
    assert "β = ∞" in rep.violations
    assert rep.admissible["bounds"] is False and rep.admissible["oracle"] is True


def test_validate_user_beta_too_small():
    rep = validate_spec(SignedMeasureSpec((Family("even_square"),), (Atoms((0.0,), (3.0,)),), beta=2.0))
    assert not rep.ok


def test_validate_alpha_l():
    neg = (Lattice(1.0, 1.0),)
    ok = validate_spec(SignedMeasureSpec((Family("even_square"),), neg, alpha=1.0, l=1.0))
    bad = validate_spec(SignedMeasureSpec((Family("even_square"),), neg, alpha=1.5, l=1.0))
    assert ok.ok and not bad.ok


def test_json_roundtrip(tmp_path):
    spec = SignedMeasureSpec(
        (Family("log_pow", n=2, cutoff=4.0), Cantor(0.0, 1.0, 2.0), HarmonicComb(0.5, 2.0, 1.0),
         PiecewisePoly((0.0, 1.0), ((1.0, 2.0),))),
        (Lattice(1.0, 0.5, kmin=-3, kmax=None, offset=0.25), Atoms((0.0, 1.0), (1.0, 2.0))),
        beta="auto",
        alpha=0.0,
        l=2.0,
    )
    text = json.dumps(spec_to_dict(spec))
    back = spec_from_dict(json.loads(text))
    assert back == spec


def test_unknown_component_rejected():
    with pytest.raises(InvalidSpecError):
        spec_from_dict({"positive": [{"type": "spline"}]})
    with pytest.raises(InvalidSpecError):
        spec_from_dict({"positive": [{"type": "atoms", "points": [1.0, 0.0], "weights": [1.0, 1.0]}]})
