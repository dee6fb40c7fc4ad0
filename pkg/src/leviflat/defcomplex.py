"""The coupled deformation complex: pairs (form, xi-valued form), the
differential mixing the twisted foliation differential with the leafwise
dbar through the couple's (0,1)-form, and the residual checks for the full
Levi-flat Maurer-Cartan system, infinitesimal deformations, gauge witnesses
and exactness."""

from __future__ import annotations

from dataclasses import dataclass

from .excalc import DifferentialForm, form_components, scalar_form
from .foliation_dgla import delta, mc_residual
from .leafcx import (
    XiValuedForm,
    beth,
    change_couple,
    dbar0,
    dbar1,
    double_bracket_SS,
    dbarJ_S,
    h_form,
    make_deformed_bracket,
    nijenhuis,
    proj01_scalar,
    wedge01,
    xi_form_residual,
    xi_form_zero_residual,
)
from .report import ResidualAccumulator
from .symfield import PointEvaluator


@dataclass
class CochainPair:
    """Element of the degree-p term: a form annihilated by iota_X plus a
    xi-valued (0,p)-form."""

    alpha: DifferentialForm
    P: XiValuedForm

    def __post_init__(self):
        if self.alpha.degree != self.P.degree:
            raise ValueError(
                f"degree mismatch: form {self.alpha.degree}, xi-form {self.P.degree}"
            )

    @property
    def degree(self):
        return self.alpha.degree


@dataclass
class DeformationPair:
    """A candidate deformation: alpha in Z^1 plus the anticommuting
    endomorphism S encoded as a (0,1) xi-valued form."""

    alpha: DifferentialForm
    S: XiValuedForm


def dfrak(pair, s):
    """d(alpha, P) = (delta alpha, dbar P + (-1)^{p+1} alpha^{0,p} ^ H)."""
    p = pair.degree
    H = h_form(s)
    if p == 0:
        a = pair.alpha.coefficient(())
        out_alpha = delta(pair.alpha, s.couple)
        out_P = dbar0(s, pair.P.value(())) - H.scaled(a)
        return CochainPair(out_alpha, out_P)
    if p == 1:
        out_alpha = delta(pair.alpha, s.couple)
        out_P = dbar1(s, pair.P) + wedge01(s, proj01_scalar(s, pair.alpha), H)
        return CochainPair(out_alpha, out_P)
    raise ValueError("the differential is implemented for degrees 0 and 1 only")


def _form_zero_residual(form, points, acc):
    for p in points:
        vals = form_components(form, p)
        acc.add(vals, [0.0] * len(vals))


def levi_flat_mc_residual_pair(d, s, points):
    """The two Maurer-Cartan residuals of a deformation pair:
    the foliation residual of alpha and the complex-structure residual of S
    computed with the deformed bracket throughout."""
    acc1 = ResidualAccumulator()
    mc = mc_residual(d.alpha, s.couple, points)
    _form_zero_residual(mc, points, acc1)

    bk = make_deformed_bracket(s.couple, d.alpha)
    H = h_form(s)
    rhs_form = wedge01(s, proj01_scalar(s, d.alpha), H).scaled(-1.0)
    acc2 = ResidualAccumulator()
    for i, j in s.frame_pairs():
        V, W = s.frame[i], s.frame[j]
        lhs = dbarJ_S(s, d.S, V, W, bk) + double_bracket_SS(s, d.S, V, W, bk).scaled(0.5)
        quarter_n = nijenhuis(s, V, W, bk).scaled(0.25)
        rhs = rhs_form.value((i, j))
        for p in points:
            ev = PointEvaluator(s.chart, p)
            lv = lhs.at(p, ev)
            acc2.add(lv, quarter_n.at(p, ev))
            acc2.add(lv, rhs.at(p, ev))
    return acc1, acc2


def levi_flat_mc_residuals(d, s, points, suite="", seed=0, tolerance=1e-9):
    """CheckReport for the coupled Maurer-Cartan system; nonzero residuals
    are data, not errors."""
    acc1, acc2 = levi_flat_mc_residual_pair(d, s, points)
    acc = ResidualAccumulator()
    acc.samples = acc1.samples + acc2.samples
    acc.max_abs = max(acc1.max_abs, acc2.max_abs)
    return acc.report(
        suite=suite,
        identity="cor.levi_flat_mc",
        anchor="delta a + {a,a}/2 = 0 ; dbar^a S + [[S,S]]_a/2 = N^a/4 = -a^{0,1}^H",
        tolerance=tolerance,
        seed=seed,
    )


def infinitesimal_residuals(t, s, points, suite="", seed=0, tolerance=1e-7):
    """Cocycle conditions for a tangent pair: delta beta = 0 and
    dbar P = -beta^{0,1} ^ H; asserted consistent with the degree-1
    differential."""
    beta, P = t.alpha, t.P
    acc = ResidualAccumulator()
    d_beta = delta(beta, s.couple)
    _form_zero_residual(d_beta, points, acc)

    H = h_form(s)
    lhs = dbar1(s, P)
    rhs = wedge01(s, proj01_scalar(s, beta), H).scaled(-1.0)
    acc2 = xi_form_residual(s, lhs, rhs, points)

    image = dfrak(t, s)
    consistency = xi_form_residual(s, image.P, lhs - rhs, points)
    if consistency.max_rel > 1e-12:
        raise AssertionError("degree-1 differential disagrees with the direct cocycle formula")

    acc.samples += acc2.samples
    acc.max_abs = max(acc.max_abs, acc2.max_abs)
    return acc.report(
        suite=suite,
        identity="thm.tangent.cocycle",
        anchor="delta beta = 0 ; dbar P = -beta^{0,1} ^ H",
        tolerance=tolerance,
        seed=seed,
    )


def gauge_witness_residual(t, t_prime, Y, s, points, suite="", seed=0, tolerance=1e-9):
    """Check beta - beta' = delta(gamma(Y)) and P - P' = -H_Y for a proposed
    witness field Y."""
    gY = s.couple.gamma_of(Y)
    acc = ResidualAccumulator()
    diff_beta = t.alpha - t_prime.alpha
    target = delta(gY, s.couple)
    for p in points:
        acc.add(form_components(diff_beta, p), form_components(target, p))
    diff_P = t.P - t_prime.P
    HY = h_form(s, Y)
    acc2 = xi_form_residual(s, diff_P, -HY, points)
    acc.samples += acc2.samples
    acc.max_abs = max(acc.max_abs, acc2.max_abs)
    return acc.report(
        suite=suite,
        identity="thm.moduli.gauge_witness",
        anchor="beta - beta' = delta i_Y gamma ; P - P' = -H_Y",
        tolerance=tolerance,
        seed=seed,
    )


def hY_decomposition_residual(Y, s, points, suite="", seed=0, tolerance=1e-9):
    """Check H_Y = dbar(Y - gamma(Y) X) + gamma(Y) H."""
    gY = s.couple.gamma_of(Y)
    tangential = Y - s.X.scaled(gY)
    lhs = h_form(s, Y)
    rhs = dbar0(s, tangential) + h_form(s).scaled(gY)
    acc = xi_form_residual(s, lhs, rhs, points)
    return acc.report(
        suite=suite,
        identity="lemma.hY_decomposition",
        anchor="H_Y = dbar(Y - gamma(Y) X) + gamma(Y) H",
        tolerance=tolerance,
        seed=seed,
    )


def dbar_hY_residual(Y, s, points, suite="", seed=0, tolerance=1e-9):
    """Check dbar H_Y = (delta gamma(Y))^{0,1} ^ H."""
    gY = s.couple.gamma_of(Y)
    lhs = dbar1(s, h_form(s, Y))
    rhs = wedge01(s, proj01_scalar(s, delta(gY, s.couple)), h_form(s))
    acc = xi_form_residual(s, lhs, rhs, points)
    return acc.report(
        suite=suite,
        identity="cor.dbar_hY",
        anchor="dbar H_Y = (delta gamma(Y))^{0,1} ^ H",
        tolerance=tolerance,
        seed=seed,
    )


def phiH_residual(beta, phi, s, points, suite="", seed=0, tolerance=1e-9):
    """Check (beta + delta phi)^{0,1} ^ H = beta^{0,1} ^ H + dbar(phi H)."""
    H = h_form(s)
    shifted = beta + delta(phi, s.couple)
    lhs = wedge01(s, proj01_scalar(s, shifted), H)
    rhs = wedge01(s, proj01_scalar(s, beta), H) + dbar1(s, H.scaled(phi))
    acc = xi_form_residual(s, lhs, rhs, points)
    return acc.report(
        suite=suite,
        identity="cor.phiH",
        anchor="(beta + delta phi)^{0,1} ^ H = beta^{0,1} ^ H + dbar(phi H)",
        tolerance=tolerance,
        seed=seed,
    )


def exactness_witness_check(U, s, points, suite="", seed=0, tolerance=1e-9):
    """Check that U witnesses exactness: H = beth(U); additionally rebuilds
    the couple (gamma, X - U) and asserts its associated (0,1)-form
    vanishes."""
    H = h_form(s)
    candidate = beth(s, XiValuedForm(0, {(): U}))
    acc = xi_form_residual(s, H, candidate, points)

    from .symfield import constant

    s_shifted = change_couple(s, constant(s.chart, 0.0), -U)
    acc2 = xi_form_zero_residual(s_shifted, h_form(s_shifted), points)
    acc.samples += acc2.samples
    acc.max_abs = max(acc.max_abs, acc2.max_abs)
    return acc.report(
        suite=suite,
        identity="lemma.exact.witness",
        anchor="H = beth(U) and H vanishes for the couple (gamma, X - U)",
        tolerance=tolerance,
        seed=seed,
    )


def tangent_witness_image(Y, s):
    """The coboundary d^0(gamma(Y), -(Y - gamma(Y) X)); its second component
    must equal -H_Y."""
    gY = s.couple.gamma_of(Y)
    tangential = Y - s.X.scaled(gY)
    pair = CochainPair(scalar_form(gY), XiValuedForm(0, {(): -tangential}))
    return dfrak(pair, s)
