"""Leafwise complex-structure calculus: J, Nijenhuis, dbar, H, beth, the
deformed bracket and the S-parametrization."""

import math

import pytest

from leviflat.errors import ConjugationSingularError, XiMembershipError, ZMembershipError
from leviflat.excalc import (
    basis_vector,
    coordinate_differential,
    form_components,
    lie_bracket,
    matrix_eval,
    one_form,
)
from leviflat.leafcx import (
    AntiLinearScalarForm,
    LeviFlatStructure,
    XiValuedForm,
    antilinearity_residual,
    beth,
    beth_conjugation_residual,
    change_couple,
    change_couple_h_residual,
    conjugate_J,
    dbar0,
    dbar0_apply,
    dbar1,
    dbarJ_S,
    dbar_scalar,
    deformed_bracket,
    deformed_bracket_expanded,
    derivation_pairing,
    double_bracket_SS,
    h_apply,
    h_form,
    ix_dgamma,
    ix_dgamma01,
    make_deformed_bracket,
    n_alpha_residual,
    nijenhuis,
    proj01_scalar,
    proj01_vector,
    s_from_structures,
    square_bracket_SS,
    t_endo,
    wedge01,
    xi_form_apply,
    xi_form_from_matrix,
    xi_form_residual,
    xi_form_zero_residual,
)
from leviflat.sampling import random_scalar, random_vector_field, sample_points, stream
from leviflat.scenarios import builtin
from leviflat.suites import random_anticommuting_S, random_xi_field, random_z_form
from leviflat.symfield import PointEvaluator, constant, coordinate, cos_of, sin_of

FLAT = builtin("t3_flat").structure
TWISTED = builtin("t3_twisted").structure
SHIFTED = builtin("t3_twisted_shifted").structure
T5 = builtin("t5_product").structure
T5P = builtin("t5_perturbedJ").structure
EPS = 0.3


def pts(s, n=8, label="pts"):
    return sample_points(s.chart, n, stream(51, s.chart.names, label))


def vec_close(V, W, points, tol=1e-12):
    for p in points:
        ev = PointEvaluator(V.chart, p)
        for a, b in zip(V.at(p, ev), W.at(p, ev)):
            assert abs(a - b) <= tol


def vec_zero(V, points, tol=1e-12):
    for p in points:
        assert max(abs(v) for v in V.at(p)) <= tol


# -- J -----------------------------------------------------------------------


def test_apply_J_standard():
    E1, E2 = FLAT.frame
    vec_close(FLAT.apply_J(E1), E2, pts(FLAT))
    vec_close(FLAT.apply_J(FLAT.apply_J(E1)), -E1, pts(FLAT))


def test_apply_J_function_linear():
    x = coordinate(FLAT.chart, "x")
    E1, E2 = FLAT.frame
    vec_close(FLAT.apply_J(E1.scaled(cos_of(x))), E2.scaled(cos_of(x)), pts(FLAT))


def test_check_in_xi_rejects_transverse_field():
    with pytest.raises(XiMembershipError):
        FLAT.check_in_xi(FLAT.X, pts(FLAT))
    FLAT.check_in_xi(FLAT.frame[0], pts(FLAT))


def test_structure_validation_rejects_bad_J():
    bad = FLAT.with_J(((0.0, -1.0), (1.0, 1.0)))
    with pytest.raises(ValueError):
        bad.validate(pts(FLAT))


# -- Nijenhuis ----------------------------------------------------------------


def test_nijenhuis_vanishes_on_flat():
    rng = stream(52, "nflat")
    V, W = random_xi_field(FLAT, rng), random_xi_field(FLAT, rng)
    vec_zero(nijenhuis(FLAT, V, W), pts(FLAT), tol=1e-13)


def test_nijenhuis_nonzero_on_perturbed_t5():
    E = T5P.frame
    N = nijenhuis(T5P, E[0], E[2])
    # N(e1, e3) = -cos(x1) e2 for the nilpotent-conjugated J
    for p in pts(T5P, 6):
        vals = N.at(p)
        assert vals[1] == pytest.approx(-math.cos(p[0]), abs=1e-12)


def test_nijenhuis_function_bilinear():
    rng = stream(53, "nbil")
    f = random_scalar(T5P.chart, rng)
    V, W = random_xi_field(T5P, rng), random_xi_field(T5P, rng)
    vec_close(nijenhuis(T5P, V.scaled(f), W), nijenhuis(T5P, V, W).scaled(f), pts(T5P), tol=1e-10)
    vec_close(
        nijenhuis(T5P, T5P.apply_J(V), W),
        -T5P.apply_J(nijenhuis(T5P, V, W)),
        pts(T5P),
        tol=1e-10,
    )


# -- dbar ----------------------------------------------------------------------


def test_dbar0_of_constant_frame_field():
    omega = dbar0(FLAT, FLAT.frame[0])
    for i in range(2):
        vec_zero(omega.value((i,)), pts(FLAT))


def test_dbar0_hand_example():
    # dbar(cos x E1)(E1) = -sin(x)/2 E1 on the flat 3-torus
    x = coordinate(FLAT.chart, "x")
    W = FLAT.frame[0].scaled(cos_of(x))
    val = dbar0_apply(FLAT, W, FLAT.frame[0])
    for p in pts(FLAT, 6):
        got = val.at(p)
        assert got[0] == pytest.approx(-0.5 * math.sin(p[0]), abs=1e-13)
        assert abs(got[1]) <= 1e-13 and abs(got[2]) <= 1e-13


def test_dbar_commutes_with_J():
    rng = stream(54, "dbarJ")
    for s in (FLAT, TWISTED, SHIFTED):
        W = random_xi_field(s, rng)
        lhs = dbar0(s, s.apply_J(W))
        rhs = dbar0(s, W)
        for i in range(s.n_leaf):
            vec_close(lhs.value((i,)), s.apply_J(rhs.value((i,))), pts(s), tol=1e-11)


def test_dbar0_antilinearity_property():
    rng = stream(55, "dbar01")
    for s in (FLAT, SHIFTED, T5):
        W = random_xi_field(s, rng)
        acc = antilinearity_residual(s, dbar0(s, W), pts(s))
        assert acc.max_rel <= 1e-11


def test_dbar1_squared_zero_seeded():
    rng = stream(56, "dbarsq")
    for s in (FLAT, TWISTED, SHIFTED, T5):
        W = random_xi_field(s, rng)
        dd = dbar1(s, dbar0(s, W))
        for ij in s.frame_pairs():
            vec_zero(dd.value(ij), pts(s), tol=1e-11)


def test_dbar1_leibniz_with_H():
    """dbar(f H) = dbar f ^ H + f dbar H on the shifted couple (H != 0)."""
    s = SHIFTED
    rng = stream(57, "leibH")
    f = random_scalar(s.chart, rng)
    H = h_form(s)
    lhs = dbar1(s, H.scaled(f))
    rhs = wedge01(s, dbar_scalar(s, f), H) + dbar1(s, H).scaled(f)
    acc = xi_form_residual(s, lhs, rhs, pts(s))
    assert acc.max_rel <= 1e-11


def test_dbar1_constant_values_flat():
    omega = XiValuedForm(1, {(0,): FLAT.frame[1], (1,): FLAT.frame[0]})
    dd = dbar1(FLAT, omega)
    vec_zero(dd.value((0, 1)), pts(FLAT))


# -- projections and wedge -----------------------------------------------------


def test_proj01_gamma_vanishes():
    for s in (FLAT, TWISTED, SHIFTED):
        A = proj01_scalar(s, s.gamma)
        for i in range(s.n_leaf):
            f = A.re[(i,)]
            for p in pts(s):
                assert abs(f(p)) <= 1e-14


def test_proj01_vector_of_identity_is_zero():
    beta = XiValuedForm(1, {(i,): FLAT.frame[i] for i in range(2)})
    projected = proj01_vector(FLAT, beta)
    for i in range(2):
        vec_zero(projected.value((i,)), pts(FLAT))


def test_ix_dgamma01_twisted_value():
    # (iota_X dgamma)^{0,1}(E1) has real part -eps sin(t) / 2 on the twisted couple
    A = ix_dgamma01(TWISTED)
    f = A.re[(0,)]
    for p in pts(TWISTED, 6):
        assert f(p) == pytest.approx(-0.5 * EPS * math.sin(p[2]), abs=1e-13)
    g = A.re[(1,)]
    for p in pts(TWISTED, 6):
        assert abs(g(p)) <= 1e-14


def test_wedge01_zero_cases():
    H = h_form(SHIFTED)
    zero01 = AntiLinearScalarForm(1, {(i,): constant(SHIFTED.chart, 0.0) for i in range(2)})
    out = wedge01(SHIFTED, zero01, H)
    vec_zero(out.value((0, 1)), pts(SHIFTED))
    gam01 = proj01_scalar(SHIFTED, SHIFTED.gamma)
    out2 = wedge01(SHIFTED, gam01, H)
    for p in pts(SHIFTED):
        assert max(abs(v) for v in out2.value((0, 1)).at(p)) <= 1e-13


def test_wedge01_hand_expansion():
    # alpha = dx, P the constant E1-valued (0,1)-form on flat T3:
    # (alpha^{0,1} ^ P)(E1,E2) = (E1 + E2)/2
    dx = coordinate_differential(FLAT.chart, 0)
    A = proj01_scalar(FLAT, dx)
    P = XiValuedForm(1, {(0,): FLAT.frame[0], (1,): FLAT.frame[0]})
    out = wedge01(FLAT, A, P)
    for p in pts(FLAT, 4):
        assert out.value((0, 1)).at(p) == pytest.approx([0.5, 0.5, 0.0], abs=1e-14)


# -- T_Y and H ------------------------------------------------------------------


def test_t_endo_examples():
    T = t_endo(FLAT.couple, FLAT.X)
    vec_zero(T(FLAT.frame[0]), pts(FLAT))
    t = coordinate(FLAT.chart, "t")
    V = FLAT.frame[0].scaled(cos_of(t))
    out = T(V)
    for p in pts(FLAT, 6):
        got = out.at(p)
        assert got[0] == pytest.approx(math.sin(p[2]), abs=1e-13)
    T_tw = t_endo(TWISTED.couple, TWISTED.X)
    vec_zero(T_tw(TWISTED.frame[0]), pts(TWISTED), tol=1e-13)


def test_H_vanishes_flat_and_twisted():
    for s in (FLAT, TWISTED, T5):
        H = h_form(s)
        for i in range(s.n_leaf):
            vec_zero(H.value((i,)), pts(s), tol=1e-13)


def test_H_nonzero_on_shifted_and_matches_change_couple():
    s = TWISTED
    y = coordinate(s.chart, "y")
    U = s.frame[0].scaled(sin_of(y))
    shifted = change_couple(s, constant(s.chart, 0.0), U)
    H_new = h_form(shifted)
    expected = dbar0(s, U) - wedge01(s, ix_dgamma01(s), XiValuedForm(0, {(): U}))
    acc = xi_form_residual(s, H_new, expected, pts(s))
    assert acc.max_rel <= 1e-12
    assert acc.max_abs >= 0.0
    worst = max(max(abs(v) for v in H_new.value((i,)).at(p)) for i in range(2) for p in pts(s))
    assert worst > 0.1


def test_H_of_tangent_field_is_dbar():
    rng = stream(58, "HV")
    for s in (FLAT, SHIFTED):
        V = random_xi_field(s, rng)
        for i in range(s.n_leaf):
            lhs = h_apply(s, V, s.frame[i])
            rhs = dbar0_apply(s, V, s.frame[i])
            vec_close(lhs, rhs, pts(s), tol=1e-11)


def test_h_linearity():
    rng = stream(59, "hlin")
    s = SHIFTED
    Y = random_vector_field(s.chart, rng)
    f = random_scalar(s.chart, rng)
    V = random_xi_field(s, rng)
    vec_close(h_apply(s, Y, V.scaled(f)), h_apply(s, Y, V).scaled(f), pts(s), tol=1e-11)


# -- beth ------------------------------------------------------------------------


def test_beth_equals_dbar_when_untwisted():
    rng = stream(60, "beth")
    W = random_xi_field(FLAT, rng)
    P = XiValuedForm(0, {(): W})
    lhs = beth(FLAT, P)
    rhs = dbar0(FLAT, W)
    acc = xi_form_residual(FLAT, lhs, rhs, pts(FLAT))
    assert acc.max_rel <= 1e-13


def test_beth_squared_and_bethH():
    rng = stream(61, "beth2")
    for s in (FLAT, TWISTED, SHIFTED, T5):
        W = random_xi_field(s, rng)
        bb = beth(s, beth(s, XiValuedForm(0, {(): W})))
        assert xi_form_zero_residual(s, bb, pts(s)).max_rel <= 1e-11
        bH = beth(s, h_form(s))
        assert xi_form_zero_residual(s, bH, pts(s)).max_rel <= 1e-12


def test_beth_rejects_degree_two():
    W = random_xi_field(FLAT, stream(62, "b3"))
    P2 = XiValuedForm(2, {(0, 1): W})
    with pytest.raises(ValueError):
        beth(FLAT, P2)


# -- changes of couple -------------------------------------------------------------


def test_change_couple_h_residual_cases():
    zero = constant(FLAT.chart, 0.0)
    from leviflat.excalc import zero_vector

    r0 = change_couple_h_residual(FLAT, zero, zero_vector(FLAT.chart), pts(FLAT))
    assert r0.max_rel <= 1e-14
    y = coordinate(FLAT.chart, "y")
    r1 = change_couple_h_residual(FLAT, zero, FLAT.frame[0].scaled(sin_of(y)), pts(FLAT))
    assert r1.max_rel <= 1e-12
    t = coordinate(TWISTED.chart, "t")
    r2 = change_couple_h_residual(TWISTED, cos_of(t), zero_vector(TWISTED.chart), pts(TWISTED))
    assert r2.max_rel <= 1e-12


def test_beth_conjugation_cases():
    rng = stream(63, "conj")
    from leviflat.excalc import zero_vector

    zero = constant(TWISTED.chart, 0.0)
    U = random_xi_field(TWISTED, rng, amplitude=0.5)
    P0 = XiValuedForm(0, {(): random_xi_field(TWISTED, rng)})
    r0 = beth_conjugation_residual(TWISTED, zero, U, P0, pts(TWISTED))
    assert r0.max_rel <= 1e-11
    x, y = coordinate(FLAT.chart, "x"), coordinate(FLAT.chart, "y")
    lam = sin_of(x + y)
    P0_flat = XiValuedForm(0, {(): random_xi_field(FLAT, rng)})
    r1 = beth_conjugation_residual(FLAT, lam, zero_vector(FLAT.chart), P0_flat, pts(FLAT))
    assert r1.max_rel <= 1e-11
    P1 = XiValuedForm(1, {(i,): random_xi_field(FLAT, rng) for i in range(2)})
    r2 = beth_conjugation_residual(FLAT, lam, random_xi_field(FLAT, rng, 0.4), P1, pts(FLAT))
    assert r2.max_rel <= 1e-11


# -- deformed bracket ----------------------------------------------------------------


def test_deformed_bracket_at_zero_is_lie():
    from leviflat.excalc import zero_form

    rng = stream(64, "dbz")
    V, W = random_xi_field(FLAT, rng), random_xi_field(FLAT, rng)
    vec_close(
        deformed_bracket(FLAT.couple, zero_form(FLAT.chart, 1), V, W),
        lie_bracket(V, W),
        pts(FLAT),
    )


def test_deformed_bracket_flat_constant_alpha():
    # T = 0 on the flat couple, so the alpha-correction vanishes on the frame
    alpha = one_form(FLAT.chart, [0.4, -0.1, 0.0])
    E1, E2 = FLAT.frame
    lhs = deformed_bracket(FLAT.couple, alpha, E1, E2)
    vec_zero(lhs - lie_bracket(E1, E2), pts(FLAT), tol=1e-13)


def test_deformed_bracket_expansion_oracle():
    rng = stream(65, "dbx")
    for s in (FLAT, TWISTED, SHIFTED):
        alpha = random_z_form(s, 1, rng, amplitude=0.5)
        V, W = random_xi_field(s, rng), random_xi_field(s, rng)
        vec_close(
            deformed_bracket(s.couple, alpha, V, W),
            deformed_bracket_expanded(s.couple, alpha, V, W),
            pts(s),
            tol=1e-11,
        )


def test_deformed_bracket_leibniz():
    rng = stream(66, "dbl")
    s = TWISTED
    alpha = random_z_form(s, 1, rng, amplitude=0.5)
    a = random_scalar(s.chart, rng)
    V, W = random_xi_field(s, rng), random_xi_field(s, rng)
    lhs = deformed_bracket(s.couple, alpha, V.scaled(a), W)
    rhs = deformed_bracket(s.couple, alpha, V, W).scaled(a) - V.scaled(
        derivation_pairing(s.couple, alpha, W, a)
    )
    vec_close(lhs, rhs, pts(s), tol=1e-11)


def test_n_alpha_zero_alpha():
    from leviflat.excalc import zero_form

    report = n_alpha_residual(FLAT, zero_form(FLAT.chart, 1), pts(FLAT))
    assert report.max_rel <= 1e-13


def test_n_alpha_rejects_non_mc():
    s = FLAT
    alpha = one_form(s.chart, [0.0, 0.0, 0.0]) + coordinate_differential(s.chart, 1).scaled(
        sin_of(coordinate(s.chart, "x"))
    )
    with pytest.raises(ZMembershipError):
        n_alpha_residual(s, alpha, pts(s))


# -- S-calculus ------------------------------------------------------------------------


def test_s_from_structures_identity():
    S = s_from_structures(T5, T5.Jmat, pts(T5))
    for p in pts(T5, 4):
        ev = PointEvaluator(T5.chart, p)
        for row in S:
            for entry in row:
                assert abs(ev(entry)) <= 1e-14


def test_s_from_structures_rotation_roundtrip():
    # Jtilde = R J R^{-1} with R a rotation mixing the (E1, E3) plane
    th = 0.3
    c, s_ = math.cos(th), math.sin(th)
    R = [
        [c, 0.0, -s_, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [s_, 0.0, c, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
    Rinv = [
        [c, 0.0, s_, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [-s_, 0.0, c, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
    chart = T5.chart
    from leviflat.excalc import matrix_mul

    Jt = matrix_mul(chart, matrix_mul(chart, R, [list(r) for r in T5.Jmat]), Rinv)
    S = s_from_structures(T5, Jt, pts(T5))
    rebuilt = conjugate_J(T5, S, probe=pts(T5)[0])
    for p in pts(T5, 4):
        ev = PointEvaluator(chart, p)
        for r in range(4):
            for col in range(4):
                assert ev(rebuilt[r][col]) == pytest.approx(ev(Jt[r][col]), abs=1e-11)


def test_s_from_structures_singular():
    minus_J = [[-f for f in row] for row in [list(r) for r in T5.Jmat]]
    with pytest.raises(ConjugationSingularError):
        s_from_structures(T5, minus_J, pts(T5))


def test_s_operators_vanish_at_zero():
    from leviflat.excalc import zero_vector

    S0 = XiValuedForm(1, {(i,): zero_vector(T5.chart) for i in range(4)})
    rng = stream(67, "s0")
    V, W = random_xi_field(T5, rng), random_xi_field(T5, rng)
    vec_zero(dbarJ_S(T5, S0, V, W), pts(T5))
    vec_zero(square_bracket_SS(T5, S0, V, W), pts(T5))
    vec_zero(double_bracket_SS(T5, S0, V, W), pts(T5))


def test_double_bracket_equals_square_when_N_zero():
    rng = stream(68, "dbss")
    Smat = random_anticommuting_S(T5, rng)
    S = xi_form_from_matrix(T5, Smat)
    V, W = random_xi_field(T5, rng), random_xi_field(T5, rng)
    vec_close(
        double_bracket_SS(T5, S, V, W),
        square_bracket_SS(T5, S, V, W),
        pts(T5),
        tol=1e-11,
    )


def test_double_bracket_quarter_variant_fails_on_nonintegrable_J():
    """The -1/2 correction makes the conjugated-integrability identity hold;
    the -1/4 variant from the deformed display leaves an order-one defect on
    a structure with N != 0."""
    s = T5P
    rng = stream(69, "oq")
    points = pts(s, 5)
    Smat = random_anticommuting_S(s, rng, amplitude=0.05)
    S = xi_form_from_matrix(s, Smat)
    Jt = conjugate_J(s, Smat, probe=points[0])
    s_tilde = s.with_J(Jt, leafwise_integrable=False)
    V, W = random_xi_field(s, rng), random_xi_field(s, rng)
    SV = xi_form_apply(s, S, [V])
    SW = xi_form_apply(s, S, [W])
    Ntilde = nijenhuis(s_tilde, V + SV, W + SW)
    rhs = -(Ntilde - xi_form_apply(s, S, [Ntilde])).scaled(0.25)

    def residual(correction):
        worst = 0.0
        lhs = (
            dbarJ_S(s, S, V, W)
            + double_bracket_SS(s, S, V, W, correction=correction).scaled(0.5)
            - nijenhuis(s, V, W).scaled(0.25)
        )
        for p in points:
            ev = PointEvaluator(s.chart, p)
            worst = max(
                worst, max(abs(a - b) for a, b in zip(lhs.at(p, ev), rhs.at(p, ev)))
            )
        return worst

    assert residual(0.5) <= 1e-11
    assert residual(0.25) > 1e-4


def test_dbar_leibniz_display_variant_is_inconsistent():
    """The displayed scalar-Leibniz term (with J acting on the value twice)
    collapses to zero in the real encoding; only the variant differentiating
    along JV satisfies the Leibniz rule."""
    s = FLAT
    rng = stream(70, "display")
    a = random_scalar(s.chart, rng)
    W = random_xi_field(s, rng)
    lhs = dbar0(s, W.scaled(a))
    corrected = dbar0(s, W).scaled(a) + wedge01(
        s, dbar_scalar(s, a), XiValuedForm(0, {(): W})
    )
    display = dbar0(s, W).scaled(a)  # the displayed term contributes nothing
    good = xi_form_residual(s, lhs, corrected, pts(s))
    bad = xi_form_residual(s, lhs, display, pts(s))
    assert good.max_rel <= 1e-11
    assert bad.max_rel > 1e-3


def test_xi_form_values_stay_in_xi():
    rng = stream(71, "xivals")
    for s in (TWISTED, SHIFTED):
        W = random_xi_field(s, rng)
        for form in (dbar0(s, W), h_form(s), beth(s, XiValuedForm(0, {(): W}))):
            for idx, val in form.values.items():
                gv = s.couple.gamma_of(val)
                for p in pts(s, 5):
                    assert abs(gv(p)) <= 1e-11


def test_antilinearity_of_dbar1_output():
    rng = stream(72, "anti2")
    s = T5
    W = random_xi_field(s, rng)
    out = dbar1(s, dbar0(s, W))
    # trivially antilinear (it is ~0); use H_Y instead for substance
    Y = random_vector_field(s.chart, rng)
    HY = h_form(s, Y)
    acc = antilinearity_residual(s, HY, pts(s, 5))
    assert acc.max_rel <= 1e-11

def test_apply_J_checked_rejects_transverse():
    with pytest.raises(XiMembershipError):
        FLAT.apply_J(FLAT.X, check_points=pts(FLAT, 3))


def test_dbar1_rejects_nonintegrable_structure():
    rng = stream(73, "guard")
    omega = dbar0(T5P, random_xi_field(T5P, rng))
    with pytest.raises(ValueError):
        dbar1(T5P, omega)
