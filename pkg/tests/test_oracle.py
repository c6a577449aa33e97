import math
import warnings

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from otelbaev.errors import NumericFailure
from otelbaev.measure import Atoms, Cantor, Family, Lattice, SignedMeasureSpec
from otelbaev.oracle import (
    OracleWarning,
    assemble,
    convergence_study,
    count_below,
    gershgorin_interval,
    inertia,
    lowest_eigenvalues,
)

FREE = SignedMeasureSpec((), ())
ES = SignedMeasureSpec((Family("even_square"),), ())
WELL = SignedMeasureSpec((), (Atoms((0.0,), (1.0,)),))


def dense_eigs(p):
    A, B = p.dense()
    return scipy.linalg.eigh(A, B, eigvals_only=True)


# ---------------------------------------------------------------------------
# assembly


def test_mass_matrix_positive_definite():
    for spec in (FREE, ES, WELL):
        for bc in ("neumann", "dirichlet"):
            p = assemble(spec, 5.0, 64, bc)
            _, B = p.dense()
            assert np.linalg.eigvalsh(B).min() > 0
            assert np.all(p.b_diag > 2 * np.abs(np.r_[p.b_off, 0]) - 1e-15)


def test_stiffness_pattern():
    p = assemble(FREE, 1.0, 16)
    h = 2.0 / 16
    assert p.h == h and p.dim == 17
    assert np.allclose(p.a_diag[1:-1], 2 / h) and np.allclose(p.a_off, -1 / h)
    assert p.a_diag[0] == pytest.approx(1 / h)
    d = assemble(FREE, 1.0, 16, "dirichlet")
    assert d.dim == 15 and len(d.a_off) == 14


def test_atom_hat_values_exact():
    # h = 0.125: atom at 0.3 inside element [0.25, 0.375], hat values 0.6 and 0.4
    p = assemble(SignedMeasureSpec((Atoms((0.3,), (2.0,)),), ()), 1.0, 16)
    q = assemble(FREE, 1.0, 16)
    da = p.a_diag - q.a_diag
    oa = p.a_off - q.a_off
    i = 10  # node at 0.25
    assert da[i] == pytest.approx(2 * 0.6**2) and da[i + 1] == pytest.approx(2 * 0.4**2)
    assert oa[i] == pytest.approx(2 * 0.6 * 0.4)
    assert np.count_nonzero(np.abs(da) > 1e-14) == 2


def test_negative_part_enters_with_sign():
    p = assemble(WELL, 1.0, 16)
    q = assemble(FREE, 1.0, 16)
    assert (p.a_diag - q.a_diag)[8] == pytest.approx(-1.0)


def test_density_quadrature_exact_for_polynomials():
    # 4-point Gauss-Legendre integrates x^2 * hat * hat exactly
    p = assemble(ES, 1.0, 16)
    q = assemble(FREE, 1.0, 16)
    from scipy.integrate import quad

    h = 2.0 / 16
    node = 3
    xi = -1.0 + node * h
    hat = lambda x: max(0.0, 1 - abs(x - xi) / h)  # noqa: E731
    want = quad(lambda x: x * x * hat(x) ** 2, xi - h, xi + h, points=[xi])[0]
    assert (p.a_diag - q.a_diag)[node] == pytest.approx(want, rel=1e-12)


def test_assemble_rejects():
    with pytest.raises(ValueError):
        assemble(ES, 0.0, 64)
    with pytest.raises(ValueError):
        assemble(ES, 1.0, 8)
    with pytest.raises(ValueError):
        assemble(ES, 1.0, 64, "periodic")


def test_dropped_atoms_warn():
    spec = SignedMeasureSpec((Atoms((0.0, 5.0), (1.0, 2.0)),), ())
    with pytest.warns(OracleWarning):
        p = assemble(spec, 2.0, 64)
    assert p.dropped and p.dropped[0]["dropped_mass"] == pytest.approx(2.0)


def test_coarse_grid_warns():
    spec = SignedMeasureSpec((Atoms((0.0, 0.01), (1.0, 1.0)),), ())
    with pytest.warns(OracleWarning):
        p = assemble(spec, 2.0, 16)
    assert p.notes


def test_cantor_atomised():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OracleWarning)
        p = assemble(SignedMeasureSpec((Cantor(0.0, 1.0, 1.0),), ()), 1.0, 64, cantor_level=8)
    q = assemble(FREE, 1.0, 64)
    # total added mass: sum over nodes of (diag + 2 * off) equals mu(R) for hats summing to one
    added = (p.a_diag - q.a_diag).sum() + 2 * (p.a_off - q.a_off).sum()
    assert added == pytest.approx(1.0, rel=1e-12)


# ---------------------------------------------------------------------------
# counting and eigenvalues


def test_even_square_spectrum():
    p = assemble(ES, 12.0, 4800)
    vals = lowest_eigenvalues(p, 20).values
    k = np.arange(1, 21)
    assert np.max(np.abs(vals - (2 * k - 1)) / (2 * k - 1)) < 1e-3
    assert count_below(p, 10.0) == 5


def test_delta_well():
    p = assemble(WELL, 30.0, 6000)
    vals = lowest_eigenvalues(p, 2).values
    assert vals[0] == pytest.approx(-0.25, abs=1e-3)
    assert abs(vals[1]) < 0.05  # bottom of the truncated continuum
    assert vals[0] >= -3.0


def test_free_neumann_and_dirichlet():
    R = math.pi / 2
    p = assemble(FREE, R, 400)
    vals = lowest_eigenvalues(p, 4).values
    assert vals == pytest.approx([0.0, 1.0, 4.0, 9.0], abs=5e-3)
    assert count_below(p, 0.5) == 1
    d = assemble(FREE, R, 400, "dirichlet")
    assert lowest_eigenvalues(d, 3).values == pytest.approx([1.0, 4.0, 9.0], rel=1e-3)


def test_richardson_order():
    R = math.pi / 2
    errs = []
    for n in (200, 400):
        v = lowest_eigenvalues(assemble(FREE, R, n), 4).values
        errs.append(abs(v[3] - 9.0))
    assert math.log2(errs[0] / errs[1]) >= 1.9


def test_count_below_gershgorin():
    p = assemble(ES, 6.0, 200)
    lo, hi = gershgorin_interval(p)
    assert count_below(p, lo - 1.0) == 0
    assert count_below(p, hi + 1.0) == p.dim


def test_zero_pivot_perturbation():
    p = assemble(FREE, 1.0, 32)
    res = inertia(p, 0.0)
    assert res.negative[0] == 0
    assert count_below(p, 0.0) == 0


def test_inertia_rejects_nonfinite():
    with pytest.raises(ValueError):
        count_below(assemble(FREE, 1.0, 32), math.nan)


def test_lowest_eigenvalues_rejects():
    p = assemble(FREE, 1.0, 16)
    with pytest.raises(ValueError):
        lowest_eigenvalues(p, 100)
    with pytest.raises(ValueError):
        lowest_eigenvalues(p, 0)


@pytest.mark.parametrize("spec", [
    ES,
    WELL,
    SignedMeasureSpec((Atoms((-1.0, 0.4, 2.2), (3.0, 1.0, 0.5)),), (Lattice(1.0, 0.3, offset=0.25),)),
    SignedMeasureSpec((Family("staircase", power=1.0),), ()),
])
def test_matches_dense_solver(spec):
    p = assemble(spec, 4.0, 120)
    ref = dense_eigs(p)
    got = lowest_eigenvalues(p, 12)
    assert np.allclose(got.values, ref[:12], rtol=1e-9, atol=1e-9)
    assert np.all(got.widths <= 1e-10 * (1 + np.abs(got.values)) + 1e-15)
    probes = np.concatenate([[ref[0] - 1.0], 0.5 * (ref[:12] + ref[1:13])])
    assert count_below(p, probes).tolist() == list(range(13))


@given(st.floats(-5, 60), st.floats(-5, 60), st.sampled_from([0, 1, 2]))
def test_count_monotone(l1, l2, which):
    spec = (ES, WELL, SignedMeasureSpec((Lattice(1.0, 1.0),), ()))[which]
    p = assemble(spec, 5.0, 100)
    a, b = min(l1, l2), max(l1, l2)
    assert count_below(p, a) <= count_below(p, b)


def test_monotone_in_potential():
    base = assemble(ES, 6.0, 300)
    more = assemble(SignedMeasureSpec((Family("even_square"), Atoms((-2.0, 0.5), (1.0, 2.0))), ()), 6.0, 300)
    lams = np.linspace(0.0, 40.0, 41)
    assert np.all(count_below(more, lams) <= count_below(base, lams))


def test_form_lower_bound():
    spec = SignedMeasureSpec((), (Lattice(1.0, 1.0),))  # beta = 2
    p = assemble(spec, 10.0, 800)
    assert lowest_eigenvalues(p, 1).values[0] >= -3 * 2.0


def test_galerkin_monotone_refinement():
    for spec in (ES, SignedMeasureSpec((Atoms((0.1, 1.3), (2.0, 1.0)),), (Atoms((-0.7,), (1.5,)),))):
        prev = None
        for n in (100, 200, 400, 800):
            v = lowest_eigenvalues(assemble(spec, 5.0, n), 5).values
            if prev is not None:
                assert np.all(v <= prev + 1e-9 * (1 + np.abs(prev)))
            prev = v


# ---------------------------------------------------------------------------
# Kronig-Penney comb: cos k = cos s + (c / (2 s)) sin s with s = sqrt(lam)


def kp_ids(lam, c):
    """Integrated density of states per unit length (k / pi)."""
    s = math.sqrt(lam)
    f = math.cos(s) + c / (2 * s) * math.sin(s)
    m = int(s // math.pi) + 1  # band edges of the repulsive comb sit at s = m pi
    if abs(f) <= 1:
        ac = math.acos(f)
        k = (m - 1) * math.pi + ac if m % 2 == 1 else m * math.pi - ac
    else:
        k = (m - 1) * math.pi if f > 1 else m * math.pi  # below / above the band inside this period
    return k / math.pi


@pytest.mark.parametrize("lam", [0.8, 3.0, 6.0, 12.0, 30.0])
def test_kronig_penney_counts(lam):
    c = 1.0
    for R in (20.0, 40.0):
        p = assemble(SignedMeasureSpec((Lattice(1.0, c),), ()), R, int(200 * R))
        assert abs(count_below(p, lam) - 2 * R * kp_ids(lam, c)) <= 3


def test_kronig_penney_gap_bounded():
    c = 1.0
    lam = 0.3  # below the first band (f > 1 there)
    assert math.cos(math.sqrt(lam)) + c / (2 * math.sqrt(lam)) * math.sin(math.sqrt(lam)) > 1
    counts = [count_below(assemble(SignedMeasureSpec((Lattice(1.0, c),), ()), R, int(100 * R)), lam)
              for R in (10.0, 20.0, 40.0)]
    assert max(counts) <= 2


def test_free_weyl_growth():
    lam = 4.0
    for R in (10.0, 20.0, 40.0):
        c = count_below(assemble(FREE, R, int(60 * R)), lam)
        assert abs(c - 2 * R * math.sqrt(lam) / math.pi) <= 2


# ---------------------------------------------------------------------------
# convergence studies


def test_convergence_study_even_square():
    res = convergence_study(ES, 10.0, [8.0, 12.0], [1200, 4800])
    assert res.converged
    assert all(r["count"] == 5 for r in res.rows)
    assert not any(r["flagged"] for r in res.rows)


def test_convergence_study_flags_continuum():
    res = convergence_study(FREE, 4.0, [5.0, 10.0], [200, 400], k_eigs=2)
    assert not res.converged
    assert any(r["flagged"] for r in res.rows)
    assert len(res.rows[0]["eigenvalues"]) == 2


def test_pencil_json_shape():
    d = assemble(ES, 2.0, 16).to_dict()
    assert len(d["a_diag"]) == 17 and len(d["a_off"]) == 16
    assert d["bc"] == "neumann"


def test_factorisation_failure_is_reported():
    p = assemble(FREE, 1.0, 16)
    p.a_off[3] = np.inf
    with pytest.raises((NumericFailure, FloatingPointError)):
        with np.errstate(all="ignore"):
            count_below(p, 1.0)
