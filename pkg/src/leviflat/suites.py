"""Catalogue of named identity checks.

Each identity has a stable id, a human-readable anchor formula, a default
tolerance, an applicability predicate over scenarios, and a runner producing
a CheckReport.  Seeds are derived per (seed, scenario, identity), so reports
are reproducible and independent of execution order.
"""

from __future__ import annotations

import fnmatch
import time
from dataclasses import dataclass

import numpy as np

from . import defcomplex as dc
from . import flows
from . import foliation_dgla as fd
from . import leafcx as lc
from .errors import LeviFlatError
from .excalc import (
    DifferentialForm,
    exterior_derivative,
    form_components,
    interior_product,
    lie_bracket,
    lie_derivative_form,
    wedge,
)
from .report import ResidualAccumulator
from .sampling import random_form, random_scalar, random_vector_field, sample_points, stream
from .symfield import PointEvaluator, ScalarField, constant, Coord, const, add, mul, sin as sin_node, cos as cos_node


# --------------------------------------------------------------------------
# Seeded objects living on a structure
# --------------------------------------------------------------------------


def random_z_form(s, k, rng, amplitude=1.0):
    """Seeded element of Z^k: coefficients on wedges of the dual coframe."""
    if k == 0:
        from .excalc import scalar_form

        return scalar_form(random_scalar(s.chart, rng, amplitude))
    out = None
    from itertools import combinations

    for idx in combinations(range(s.n_leaf), k):
        f = random_scalar(s.chart, rng, amplitude)
        term = s.coframe[idx[0]]
        for i in idx[1:]:
            term = wedge(term, s.coframe[i])
        term = term.scaled(f)
        out = term if out is None else out + term
    return out


def random_xi_field(s, rng, amplitude=1.0):
    coeffs = [random_scalar(s.chart, rng, amplitude) for _ in range(s.n_leaf)]
    return s.from_xi_coefficients(coeffs)


def small_scalar(chart, rng, amplitude):
    """Compact random field for matrix entries: constant + two harmonics."""
    j = int(rng.integers(0, chart.dim))
    k = int(rng.integers(0, chart.dim))
    node = add(
        const(rng.uniform(-amplitude, amplitude)),
        add(
            mul(const(rng.uniform(-amplitude, amplitude)), sin_node(Coord(j))),
            mul(const(rng.uniform(-amplitude, amplitude)), cos_node(Coord(k))),
        ),
    )
    return ScalarField(chart, node)


def random_anticommuting_S(s, rng, amplitude=0.03):
    """Seeded frame matrix anticommuting with J: C + J C J."""
    n = s.n_leaf
    C = [[small_scalar(s.chart, rng, amplitude) for _ in range(n)] for _ in range(n)]
    from .excalc import matrix_mul

    J = [list(r) for r in s.Jmat]
    JCJ = matrix_mul(s.chart, matrix_mul(s.chart, J, C), J)
    return [[C[r][c] + JCJ[r][c] for c in range(n)] for r in range(n)]


def mc_flat_alpha(scenario, points):
    """A Maurer-Cartan-flat element of Z^1 for the scenario's couple.

    gamma + tilt cuts out a constant tilt of the foliation; normalizing
    against X puts it into the couple's Z^1 slice exactly.  Candidate tilts
    are probed at the sample points and the first integrable one wins (the
    zero tilt always qualifies), so the construction works for file-defined
    couples too.
    """
    s = scenario.structure
    chart = s.chart
    one = constant(chart, 1.0)
    candidates = [
        DifferentialForm(chart, 1, {(i,): 0.1 * (i + 1) for i in range(chart.dim - 1)})
    ]
    candidates += [
        DifferentialForm(chart, 1, {(i,): 0.2}) for i in range(chart.dim - 1)
    ]
    candidates.append(DifferentialForm(chart, 1, {}))
    probe = points[:4]
    for tilt in candidates:
        base = s.gamma + tilt
        scale = base.apply_symbolic([s.X])
        alpha = base.scaled(one / scale) - s.gamma
        mc = fd.mc_residual(alpha, s.couple, probe)
        worst = max(
            (abs(v) for p in probe for v in form_components(mc, p)), default=0.0
        )
        if worst <= 1e-10:
            return alpha
    raise AssertionError("the zero tilt must always be Maurer-Cartan flat")


def _zero_xi_form(s, degree):
    from .excalc import zero_vector

    if degree == 0:
        return lc.XiValuedForm(0, {(): zero_vector(s.chart)})
    if degree == 1:
        return lc.XiValuedForm(1, {(i,): zero_vector(s.chart) for i in range(s.n_leaf)})
    return lc.XiValuedForm(2, {ij: zero_vector(s.chart) for ij in s.frame_pairs()})


def _add_form_residual(acc, form, points):
    for p in points:
        vals = form_components(form, p)
        acc.add(vals, [0.0] * len(vals))


def _add_vector_residual(acc, V, W, points, chart):
    for p in points:
        ev = PointEvaluator(chart, p)
        acc.add(V.at(p, ev), W.at(p, ev) if W is not None else [0.0] * chart.dim)


# --------------------------------------------------------------------------
# Runner context
# --------------------------------------------------------------------------


@dataclass
class RunContext:
    scenario: object
    identity: str
    points: list
    seed: int
    n_points: int

    def rng(self, label):
        return stream(self.seed, self.scenario.name, self.identity, label)


def _ctx_points(scenario, seed, identity, n_points):
    rng = stream(seed, scenario.name, identity, "points")
    return sample_points(scenario.structure.chart, n_points, rng)


# --------------------------------------------------------------------------
# Runners: exterior calculus and DGLA axioms
# --------------------------------------------------------------------------


def run_d_squared(scenario, ctx, acc):
    chart = scenario.structure.chart
    rng = ctx.rng("d_squared")
    for k in range(0, chart.dim - 1):
        for _ in range(3):
            omega = random_form(chart, k, rng)
            dd = exterior_derivative(exterior_derivative(omega))
            _add_form_residual(acc, dd, ctx.points)


def run_leibniz_wedge(scenario, ctx, acc):
    chart = scenario.structure.chart
    rng = ctx.rng("leibniz_wedge")
    for ka, kb in ((0, 1), (1, 1), (1, 2)):
        for _ in range(4):
            a = random_form(chart, ka, rng)
            b = random_form(chart, kb, rng)
            lhs = exterior_derivative(wedge(a, b))
            rhs = wedge(exterior_derivative(a), b)
            signed = wedge(a, exterior_derivative(b))
            rhs = rhs + (signed if ka % 2 == 0 else -signed)
            for p in ctx.points:
                acc.add(form_components(lhs, p), form_components(rhs, p))


def run_jacobi_vector(scenario, ctx, acc):
    chart = scenario.structure.chart
    rng = ctx.rng("jacobi_vector")
    for _ in range(4):
        U = random_vector_field(chart, rng)
        V = random_vector_field(chart, rng)
        W = random_vector_field(chart, rng)
        total = (
            lie_bracket(U, lie_bracket(V, W))
            + lie_bracket(V, lie_bracket(W, U))
            + lie_bracket(W, lie_bracket(U, V))
        )
        _add_vector_residual(acc, total, None, ctx.points, chart)


def run_bracket_antisym(scenario, ctx, acc):
    couple = scenario.structure.couple
    chart = scenario.structure.chart
    rng = ctx.rng("antisym")
    for ka, kb in ((1, 1), (1, 2), (2, 2)):
        for _ in range(5):
            a = random_form(chart, ka, rng)
            b = random_form(chart, kb, rng)
            lhs = fd.dgla_bracket(a, b, couple)
            rhs = fd.dgla_bracket(b, a, couple).scaled(-((-1.0) ** (ka * kb)))
            for p in ctx.points:
                acc.add(form_components(lhs, p), form_components(rhs, p))


def run_bracket_jacobi(scenario, ctx, acc):
    couple = scenario.structure.couple
    chart = scenario.structure.chart
    rng = ctx.rng("jacobi")
    for degrees, count in (((1, 1, 1), 8), ((1, 1, 2), 7)):
        for _ in range(count):
            a = random_form(chart, degrees[0], rng)
            b = random_form(chart, degrees[1], rng)
            c = random_form(chart, degrees[2], rng)
            lhs = fd.dgla_bracket(a, fd.dgla_bracket(b, c, couple), couple)
            rhs = fd.dgla_bracket(fd.dgla_bracket(a, b, couple), c, couple)
            signed = fd.dgla_bracket(b, fd.dgla_bracket(a, c, couple), couple)
            sign = (-1.0) ** (degrees[0] * degrees[1])
            rhs = rhs + (signed if sign > 0 else -signed)
            for p in ctx.points:
                acc.add(form_components(lhs, p), form_components(rhs, p))


def _run_leibniz(scenario, ctx, acc, use_delta):
    couple = scenario.structure.couple
    chart = scenario.structure.chart
    rng = ctx.rng("leibniz_delta" if use_delta else "leibniz_d")
    diff = (lambda w: fd.delta(w, couple)) if use_delta else exterior_derivative
    for ka, kb in ((1, 1), (1, 2), (0, 1)):
        for _ in range(5):
            a = random_form(chart, ka, rng)
            b = random_form(chart, kb, rng)
            lhs = diff(fd.dgla_bracket(a, b, couple))
            rhs = fd.dgla_bracket(diff(a), b, couple)
            signed = fd.dgla_bracket(a, diff(b), couple)
            rhs = rhs + (signed if ka % 2 == 0 else -signed)
            for p in ctx.points:
                acc.add(form_components(lhs, p), form_components(rhs, p))


def run_leibniz_d(scenario, ctx, acc):
    _run_leibniz(scenario, ctx, acc, use_delta=False)


def run_leibniz_delta(scenario, ctx, acc):
    _run_leibniz(scenario, ctx, acc, use_delta=True)


def run_delta_squared(scenario, ctx, acc):
    couple = scenario.structure.couple
    chart = scenario.structure.chart
    rng = ctx.rng("delta_squared")
    for k in (0, 1):
        for _ in range(5):
            a = random_form(chart, k, rng)
            dd = fd.delta(fd.delta(a, couple), couple)
            _add_form_residual(acc, dd, ctx.points)


def run_z_closure(scenario, ctx, acc):
    s = scenario.structure
    couple = s.couple
    rng = ctx.rng("z_closure")
    X = couple.X
    for _ in range(10):
        a = random_z_form(s, 1, rng)
        b = random_z_form(s, 1, rng)
        da = fd.delta(a, couple)
        bracket = fd.dgla_bracket(a, b, couple)
        for form in (interior_product(X, da), interior_product(X, bracket)):
            _add_form_residual(acc, form, ctx.points)


def run_z_reduced_bracket(scenario, ctx, acc):
    s = scenario.structure
    couple = s.couple
    rng = ctx.rng("z_reduced")
    for ka, kb in ((1, 1), (1, 2)):
        for _ in range(5):
            a = random_z_form(s, ka, rng)
            b = random_z_form(s, kb, rng)
            lhs = fd.dgla_bracket(a, b, couple)
            rhs = fd.dgla_bracket_reduced(a, b, couple)
            for p in ctx.points:
                acc.add(form_components(lhs, p), form_components(rhs, p))


def run_z_reduced_gamma(scenario, ctx, acc):
    s = scenario.structure
    couple = s.couple
    rng = ctx.rng("z_gamma")
    X, gamma = couple.X, couple.gamma
    d_gamma = exterior_derivative(gamma)
    for _ in range(8):
        a = random_z_form(s, 1, rng)
        lhs = fd.dgla_bracket(gamma, a, couple)
        rhs = wedge(interior_product(X, d_gamma), a) - wedge(
            gamma, interior_product(X, exterior_derivative(a))
        )
        for p in ctx.points:
            acc.add(form_components(lhs, p), form_components(rhs, p))


def run_frobenius(scenario, ctx, acc):
    s = scenario.structure
    r3, r4, r5 = fd.frobenius_residuals(s.gamma, s.X, ctx.points)
    acc.samples += [r3, r4, r5]
    acc.max_abs = max(acc.max_abs, r3, r4, r5)


def run_mc_oracle(scenario, ctx, acc):
    """mc form of alpha against the independent integrability oracle
    iota_X(d(gamma+alpha) ^ (gamma+alpha))."""
    s = scenario.structure
    couple = s.couple
    rng = ctx.rng("mc_oracle")
    for _ in range(6):
        a = random_z_form(s, 1, rng, amplitude=0.4)
        mc = fd.mc_residual(a, couple, ctx.points)
        oracle = interior_product(couple.X, fd.mc_oracle_form(a, couple))
        for p in ctx.points:
            acc.add(form_components(mc, p), form_components(oracle, p))


def run_db_closed(scenario, ctx, acc):
    s = scenario.structure
    form = fd.leafwise_d(lc.ix_dgamma(s), s.couple)
    _add_form_residual(acc, form, ctx.points)


def run_omega_alpha_inverse(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("omega_alpha")
    for _ in range(6):
        a = random_z_form(s, 1, rng, amplitude=0.5)
        V = random_vector_field(s.chart, rng)
        round_trip = fd.omega_alpha_inverse(fd.omega_alpha(V, a, s.couple), a, s.couple)
        _add_vector_residual(acc, round_trip, V, ctx.points, s.chart)
        # omega_alpha maps xi into ker(gamma + alpha)
        W = random_xi_field(s, rng)
        beta = s.gamma + a
        val = beta.apply_symbolic([fd.omega_alpha(W, a, s.couple)])
        for p in ctx.points:
            acc.add(val(p), 0.0)


# --------------------------------------------------------------------------
# Runners: flows and the gauge action
# --------------------------------------------------------------------------


def run_flow_group_law(scenario, ctx, acc):
    chart = scenario.structure.chart
    rng = ctx.rng("flow_group")
    for _ in range(3):
        Y = random_vector_field(chart, rng, amplitude=0.6)
        t1, t2 = 0.07, -0.05
        for p in ctx.points[:4]:
            q1, _ = flows.integrate_flow(Y, t2, p)
            q2, _ = flows.integrate_flow(Y, t1, tuple(q1))
            q12, _ = flows.integrate_flow(Y, t1 + t2, p)
            acc.add(list(q2), list(q12))


def run_flow_pullback_identity(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("pullback_id")
    Y = random_vector_field(s.chart, rng, amplitude=0.6)
    omega = random_form(s.chart, 1, rng)
    args = [random_vector_field(s.chart, rng)]
    from .excalc import evaluate_form

    for p in ctx.points[:6]:
        lhs = flows.pullback_form_numeric(Y, 0.0, omega, p, args)
        rhs = evaluate_form(omega, p, args)
        acc.add(lhs, rhs)


def run_flow_lie_oracle(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("lie_oracle")
    from .excalc import evaluate_form

    for _ in range(3):
        Y = random_vector_field(s.chart, rng, amplitude=0.6)
        omega = random_form(s.chart, 1, rng)
        args = [random_vector_field(s.chart, rng)]
        lie = lie_derivative_form(Y, omega)
        for p in ctx.points[:4]:
            tau = 1e-3
            d1 = (
                flows.pullback_form_numeric(Y, tau, omega, p, args)
                - flows.pullback_form_numeric(Y, -tau, omega, p, args)
            ) / (2 * tau)
            d2 = (
                flows.pullback_form_numeric(Y, tau / 2, omega, p, args)
                - flows.pullback_form_numeric(Y, -tau / 2, omega, p, args)
            ) / tau
            fd_val = (4 * d2 - d1) / 3
            acc.add(fd_val, evaluate_form(lie, p, args))


def run_gauge_chi(scenario, ctx, acc):
    s = scenario.structure
    couple = s.couple
    rng = ctx.rng("gauge_chi")
    for _ in range(10):
        Y = random_vector_field(s.chart, rng, amplitude=0.6)
        target = -fd.delta(couple.gamma_of(Y), couple)
        arg = random_vector_field(s.chart, rng)
        tval = target.apply_symbolic([arg])
        for p in ctx.points[:3]:
            fd_val = flows.gauge_derivative_fd(Y, couple, p, arg)
            acc.add(fd_val, tval(p))


def run_gauge_S(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("gauge_S")
    for _ in range(10):
        Y = random_vector_field(s.chart, rng, amplitude=0.6)
        HY = lc.h_form(s, Y)
        idx = int(rng.integers(0, s.n_leaf))
        minus_HY = -HY.value((idx,))
        for p in ctx.points[:2]:
            fd_vec = flows.s_gauge_fd(Y, s, p, idx)
            acc.add(list(fd_vec), minus_HY.at(p))


def run_gauge_preserves_mc(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("gauge_mc")
    alpha = mc_flat_alpha(scenario, ctx.points)
    mc = fd.mc_residual(alpha, s.couple, ctx.points)
    _add_form_residual(acc, mc, ctx.points)
    for _ in range(3):
        Y = random_vector_field(s.chart, rng, amplitude=0.6)
        V = random_vector_field(s.chart, rng)
        W = random_vector_field(s.chart, rng)
        for p in ctx.points[:3]:
            val = flows.gauge_mc_value(Y, 0.05, alpha, s.couple, p, V, W)
            acc.add(val, 0.0)


# --------------------------------------------------------------------------
# Runners: leafwise dbar calculus
# --------------------------------------------------------------------------


def run_dbar_antilinearity(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("dbar_antilin")
    for _ in range(4):
        W = random_xi_field(s, rng)
        omega = lc.dbar0(s, W)
        sub = lc.antilinearity_residual(s, omega, ctx.points)
        acc.samples += sub.samples
        acc.max_abs = max(acc.max_abs, sub.max_abs)


def run_dbar_commutes_J(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("dbar_J")
    for _ in range(4):
        W = random_xi_field(s, rng)
        lhs = lc.dbar0(s, s.apply_J(W))
        rhs = lc.dbar0(s, W)
        for i in range(s.n_leaf):
            _add_vector_residual(
                acc, lhs.value((i,)), s.apply_J(rhs.value((i,))), ctx.points, s.chart
            )


def run_dbar_leibniz(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("dbar_leibniz")
    for _ in range(4):
        a = random_scalar(s.chart, rng)
        W = random_xi_field(s, rng)
        lhs = lc.dbar0(s, W.scaled(a))
        da = lc.dbar_scalar(s, a)
        rhs = lc.dbar0(s, W).scaled(a) + lc.wedge01(s, da, lc.XiValuedForm(0, {(): W}))
        for i in range(s.n_leaf):
            _add_vector_residual(acc, lhs.value((i,)), rhs.value((i,)), ctx.points, s.chart)


def run_nijenhuis_bilinear(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("nijenhuis_bilinear")
    for _ in range(4):
        f = random_scalar(s.chart, rng)
        V = random_xi_field(s, rng)
        W = random_xi_field(s, rng)
        _add_vector_residual(
            acc,
            lc.nijenhuis(s, V.scaled(f), W),
            lc.nijenhuis(s, V, W).scaled(f),
            ctx.points,
            s.chart,
        )
        _add_vector_residual(
            acc,
            lc.nijenhuis(s, s.apply_J(V), W),
            -s.apply_J(lc.nijenhuis(s, V, W)),
            ctx.points,
            s.chart,
        )


def run_dbar_squared(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("dbar_squared")
    for _ in range(3):
        W = random_xi_field(s, rng)
        dd = lc.dbar1(s, lc.dbar0(s, W))
        for ij in s.frame_pairs():
            _add_vector_residual(acc, dd.value(ij), None, ctx.points, s.chart)


def run_h_linear(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("h_linear")
    for _ in range(4):
        Y = random_vector_field(s.chart, rng)
        f = random_scalar(s.chart, rng)
        V = random_xi_field(s, rng)
        lhs = lc.h_apply(s, Y, V.scaled(f))
        rhs = lc.h_apply(s, Y, V).scaled(f)
        _add_vector_residual(acc, lhs, rhs, ctx.points, s.chart)


def run_h_alternative(scenario, ctx, acc):
    """H(V) = ([V,X] + J P [JV,X]) / 2 - iota_X dgamma(V) X / 2; the real
    encoding of the projected alternative formula."""
    s = scenario.structure
    ix = lc.ix_dgamma(s)
    H = lc.h_form(s)
    for i, E in enumerate(s.frame):
        bVX = lie_bracket(E, s.X)
        bJVX = lie_bracket(s.J_frame(i), s.X)
        rhs = (bVX + s.apply_J(s.project_xi(bJVX))).scaled(0.5) - s.X.scaled(
            ix.apply_symbolic([E]) * 0.5
        )
        _add_vector_residual(acc, H.value((i,)), rhs, ctx.points, s.chart)


def run_dbarH(scenario, ctx, acc):
    s = scenario.structure
    H = lc.h_form(s)
    lhs = lc.dbar1(s, H)
    rhs = lc.wedge01(s, lc.ix_dgamma01(s), H)
    sub = lc.xi_form_residual(s, lhs, rhs, ctx.points)
    acc.samples += sub.samples
    acc.max_abs = max(acc.max_abs, sub.max_abs)


def run_ixdgamma01_closed(scenario, ctx, acc):
    s = scenario.structure
    closed = lc.dbar_scalar01(s, lc.ix_dgamma01(s))
    for ij in s.frame_pairs():
        f = closed.re[ij]
        g = lc.scalar01_re_apply(s, closed, [s.J_frame(ij[0]), s.frame[ij[1]]])
        for p in ctx.points:
            acc.add(f(p), 0.0)
            acc.add(g(p), 0.0)


def run_beth_squared(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("beth_squared")
    for _ in range(3):
        W = random_xi_field(s, rng)
        bb = lc.beth(s, lc.beth(s, lc.XiValuedForm(0, {(): W})))
        for ij in s.frame_pairs():
            _add_vector_residual(acc, bb.value(ij), None, ctx.points, s.chart)


def run_bethH(scenario, ctx, acc):
    s = scenario.structure
    bH = lc.beth(s, lc.h_form(s))
    for ij in s.frame_pairs():
        _add_vector_residual(acc, bH.value(ij), None, ctx.points, s.chart)


def run_change_couple(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("change_couple")
    lam = random_scalar(s.chart, rng, amplitude=0.4)
    U = random_xi_field(s, rng, amplitude=0.5)
    report = lc.change_couple_h_residual(s, lam, U, ctx.points)
    acc.samples += report.samples
    acc.max_abs = max(acc.max_abs, report.max_abs)


def run_iso_cohomology(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("iso_cohomology")
    lam = random_scalar(s.chart, rng, amplitude=0.4)
    U = random_xi_field(s, rng, amplitude=0.5)
    for degree in (0, 1):
        if degree == 0:
            P = lc.XiValuedForm(0, {(): random_xi_field(s, rng)})
        else:
            P = lc.XiValuedForm(1, {(i,): random_xi_field(s, rng) for i in range(s.n_leaf)})
        report = lc.beth_conjugation_residual(s, lam, U, P, ctx.points)
        acc.samples += report.samples
        acc.max_abs = max(acc.max_abs, report.max_abs)


def run_exact_witness(scenario, ctx, acc):
    s = scenario.structure
    report = dc.exactness_witness_check(scenario.exact_witness, s, ctx.points)
    acc.samples += report.samples
    acc.max_abs = max(acc.max_abs, report.max_abs)


def run_exact_transport(scenario, ctx, acc):
    """Transported witness for (e^lam gamma, e^-lam X + U'): e^-lam U + U'."""
    s = scenario.structure
    rng = ctx.rng("exact_transport")
    from .symfield import exp_of

    lam = random_scalar(s.chart, rng, amplitude=0.3)
    U_prime = random_xi_field(s, rng, amplitude=0.4)
    s_hat = lc.change_couple(s, lam, U_prime)
    witness = scenario.exact_witness.scaled(exp_of(-lam)) + U_prime
    report = dc.exactness_witness_check(witness, s_hat, ctx.points)
    acc.samples += report.samples
    acc.max_abs = max(acc.max_abs, report.max_abs)


# --------------------------------------------------------------------------
# Runners: deformed bracket and the coupled system
# --------------------------------------------------------------------------


def run_bracket_alpha(scenario, ctx, acc):
    """[V,W]_alpha = [V,W] + (alpha ^ T)(V,W) for Maurer-Cartan flat alpha."""
    s = scenario.structure
    rng = ctx.rng("bracket_alpha")
    alpha = mc_flat_alpha(scenario, ctx.points)
    for _ in range(4):
        V = random_xi_field(s, rng)
        W = random_xi_field(s, rng)
        lhs = lc.deformed_bracket(s.couple, alpha, V, W)
        rhs = lie_bracket(V, W) + lc.alpha_wedge_T(s, alpha, V, W)
        _add_vector_residual(acc, lhs, rhs, ctx.points, s.chart)


def run_bracket_alpha_expansion(scenario, ctx, acc):
    """Conjugation route against the ten-term expansion (any alpha in Z^1)."""
    s = scenario.structure
    rng = ctx.rng("bracket_expansion")
    for _ in range(4):
        alpha = random_z_form(s, 1, rng, amplitude=0.4)
        V = random_xi_field(s, rng)
        W = random_xi_field(s, rng)
        lhs = lc.deformed_bracket(s.couple, alpha, V, W)
        rhs = lc.deformed_bracket_expanded(s.couple, alpha, V, W)
        _add_vector_residual(acc, lhs, rhs, ctx.points, s.chart)


def run_bracket_alpha_leibniz(scenario, ctx, acc):
    """[aV, W]_alpha = a [V,W]_alpha - <W, a>_alpha V."""
    s = scenario.structure
    rng = ctx.rng("bracket_leibniz")
    for _ in range(4):
        alpha = random_z_form(s, 1, rng, amplitude=0.4)
        a = random_scalar(s.chart, rng)
        V = random_xi_field(s, rng)
        W = random_xi_field(s, rng)
        lhs = lc.deformed_bracket(s.couple, alpha, V.scaled(a), W)
        pairing = lc.derivation_pairing(s.couple, alpha, W, a)
        rhs = lc.deformed_bracket(s.couple, alpha, V, W).scaled(a) - V.scaled(pairing)
        _add_vector_residual(acc, lhs, rhs, ctx.points, s.chart)


def run_n_alpha(scenario, ctx, acc):
    s = scenario.structure
    alpha = mc_flat_alpha(scenario, ctx.points)
    report = lc.n_alpha_residual(s, alpha, ctx.points)
    acc.samples += report.samples
    acc.max_abs = max(acc.max_abs, report.max_abs)


def run_levi_flat_mc(scenario, ctx, acc):
    s = scenario.structure
    fam = scenario.family
    for t in (0.0, 0.1, -0.1, 0.3, -0.3):
        alpha = fam.alpha_at(t)
        Smat = fam.S_matrix_at(t)
        S = lc.xi_form_from_matrix(s, Smat) if Smat is not None else _zero_xi_form(s, 1)
        pair = dc.DeformationPair(alpha, S)
        a1, a2 = dc.levi_flat_mc_residual_pair(pair, s, ctx.points)
        acc.samples += a1.samples + a2.samples
        acc.max_abs = max(acc.max_abs, a1.max_abs, a2.max_abs)


def _family_tangent_pair(scenario):
    s = scenario.structure
    fam = scenario.family
    beta = fam.alpha_tangent()
    Smat = fam.S_matrix_tangent()
    P = lc.xi_form_from_matrix(s, Smat) if Smat is not None else _zero_xi_form(s, 1)
    return dc.CochainPair(beta, P)


def run_tangent_eqP1(scenario, ctx, acc):
    """delta(beta) = 0 for the family tangent at the origin."""
    s = scenario.structure
    pair = _family_tangent_pair(scenario)
    _add_form_residual(acc, fd.delta(pair.alpha, s.couple), ctx.points)


def run_tangent_eqP2(scenario, ctx, acc):
    """dbar P = -beta^{0,1} ^ H for the family tangent; consistency with the
    full cocycle operator is asserted inside infinitesimal_residuals."""
    s = scenario.structure
    pair = _family_tangent_pair(scenario)
    report = dc.infinitesimal_residuals(pair, s, ctx.points)
    acc.samples += report.samples
    acc.max_abs = max(acc.max_abs, report.max_abs)


def run_dfrak_squared(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("dfrak_squared")
    from .excalc import scalar_form

    for _ in range(8):
        f = random_scalar(s.chart, rng)
        P = lc.XiValuedForm(0, {(): random_xi_field(s, rng)})
        pair = dc.CochainPair(scalar_form(f), P)
        dd = dc.dfrak(dc.dfrak(pair, s), s)
        _add_form_residual(acc, dd.alpha, ctx.points)
        for ij in s.frame_pairs():
            _add_vector_residual(acc, dd.P.value(ij), None, ctx.points, s.chart)


def run_tangent_witness(scenario, ctx, acc):
    """d^0(gamma(Y), -(Y - gamma(Y)X)) = (delta gamma(Y), -H_Y), seeded Y."""
    s = scenario.structure
    rng = ctx.rng("tangent_witness")
    for _ in range(10):
        Y = random_vector_field(s.chart, rng)
        image = dc.tangent_witness_image(Y, s)
        target_alpha = fd.delta(s.couple.gamma_of(Y), s.couple)
        HY = lc.h_form(s, Y)
        for p in ctx.points[:6]:
            acc.add(form_components(image.alpha, p), form_components(target_alpha, p))
        for i in range(s.n_leaf):
            _add_vector_residual(
                acc, image.P.value((i,)), -HY.value((i,)), ctx.points[:6], s.chart
            )


def run_gauge_witness(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("gauge_witness")
    for _ in range(4):
        Y = random_vector_field(s.chart, rng)
        beta = random_z_form(s, 1, rng)
        P = lc.XiValuedForm(1, {(i,): random_xi_field(s, rng) for i in range(s.n_leaf)})
        t = dc.CochainPair(beta, P)
        image = dc.tangent_witness_image(Y, s)
        t_prime = dc.CochainPair(beta - image.alpha, P - image.P)
        report = dc.gauge_witness_residual(t, t_prime, Y, s, ctx.points)
        acc.samples += report.samples
        acc.max_abs = max(acc.max_abs, report.max_abs)


def run_hY_decomposition(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("hY_decomposition")
    for _ in range(4):
        Y = random_vector_field(s.chart, rng)
        report = dc.hY_decomposition_residual(Y, s, ctx.points)
        acc.samples += report.samples
        acc.max_abs = max(acc.max_abs, report.max_abs)


def run_dbar_hY(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("dbar_hY")
    for _ in range(3):
        Y = random_vector_field(s.chart, rng)
        report = dc.dbar_hY_residual(Y, s, ctx.points)
        acc.samples += report.samples
        acc.max_abs = max(acc.max_abs, report.max_abs)


def run_phiH(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("phiH")
    for _ in range(3):
        beta = random_z_form(s, 1, rng)
        phi = random_scalar(s.chart, rng)
        report = dc.phiH_residual(beta, phi, s, ctx.points)
        acc.samples += report.samples
        acc.max_abs = max(acc.max_abs, report.max_abs)


# --------------------------------------------------------------------------
# Runners: S-calculus
# --------------------------------------------------------------------------


def run_s_roundtrip(scenario, ctx, acc):
    s = scenario.structure
    rng = ctx.rng("s_roundtrip")
    Smat = random_anticommuting_S(s, rng)
    Jt = lc.conjugate_J(s, Smat, probe=ctx.points[0])
    recovered = lc.s_from_structures(s, Jt, ctx.points)
    n = s.n_leaf
    for p in ctx.points:
        ev = PointEvaluator(s.chart, p)
        lhs = [ev(recovered[r][c]) for r in range(n) for c in range(n)]
        rhs = [ev(Smat[r][c]) for r in range(n) for c in range(n)]
        acc.add(lhs, rhs)
    acc.add(lc.anticommutator_residual(s, recovered, ctx.points), 0.0)


def run_n_ntilde(scenario, ctx, acc):
    """The conjugated-Nijenhuis identity, both sides independently evaluated."""
    s = scenario.structure
    rng = ctx.rng("n_ntilde")
    Smat = random_anticommuting_S(s, rng)
    S = lc.xi_form_from_matrix(s, Smat)
    Jt = lc.conjugate_J(s, Smat, probe=ctx.points[0])
    s_tilde = s.with_J(Jt, leafwise_integrable=False)
    n = s.n_leaf
    for _ in range(2):
        V = random_xi_field(s, rng)
        W = random_xi_field(s, rng)
        SV = lc.xi_form_apply(s, S, [V])
        SW = lc.xi_form_apply(s, S, [W])
        lhs = lc.nijenhuis(s_tilde, V + SV, W + SW)
        NJ = lc.nijenhuis(s, V, W)
        NSS = lc.nijenhuis(s, SV, SW)
        core = (
            NJ
            + lc.xi_form_apply(s, S, [NJ - NSS])
            - (lc.dbarJ_S(s, S, V, W) + lc.square_bracket_SS(s, S, V, W).scaled(0.5)).scaled(4.0)
        )
        for p in ctx.points:
            ev = PointEvaluator(s.chart, p)
            M = s.basis_matrix_at(p, ev)
            Sp = np.array([[ev(Smat[r][c]) for c in range(n)] for r in range(n)])
            coeffs = np.linalg.solve(M, np.array(core.at(p, ev)))
            transformed = np.linalg.solve(np.eye(n) - Sp, coeffs[:n])
            rhs_chart = M[:, :n] @ transformed
            acc.add(lhs.at(p, ev), list(rhs_chart))


def run_n_jtilde_identity(scenario, ctx, acc):
    """dbar_J S + [[S,S]]/2 - N_J/4 = -(I-S) N_Jt((I+S)V,(I+S)W)/4, the
    identity behind the integrability criterion for the conjugated J; it
    pins the -1/2 coefficient in [[S,S]]."""
    s = scenario.structure
    rng = ctx.rng("n_jtilde")
    Smat = random_anticommuting_S(s, rng)
    S = lc.xi_form_from_matrix(s, Smat)
    Jt = lc.conjugate_J(s, Smat, probe=ctx.points[0])
    s_tilde = s.with_J(Jt, leafwise_integrable=False)
    n = s.n_leaf
    for _ in range(2):
        V = random_xi_field(s, rng)
        W = random_xi_field(s, rng)
        SV = lc.xi_form_apply(s, S, [V])
        SW = lc.xi_form_apply(s, S, [W])
        lhs = (
            lc.dbarJ_S(s, S, V, W)
            + lc.double_bracket_SS(s, S, V, W).scaled(0.5)
            - lc.nijenhuis(s, V, W).scaled(0.25)
        )
        Ntilde = lc.nijenhuis(s_tilde, V + SV, W + SW)
        rhs = -(Ntilde - lc.xi_form_apply(s, S, [Ntilde])).scaled(0.25)
        _add_vector_residual(acc, lhs, rhs, ctx.points, s.chart)


def run_n_jtilde_quadratic(scenario, ctx, acc):
    """N of the conjugated structure must shrink quadratically with the size
    of a dbar-closed S0: the ratio of max |N| at eps=1e-2 vs 1e-3 sits near
    100.  The stored residual is |ratio/100 - 1|."""
    from .scenarios import t5_quadratic_S0

    s = scenario.structure
    entries = t5_quadratic_S0(s)
    n = s.n_leaf
    maxima = []
    for eps in (1e-2, 1e-3):
        Smat = [[entries[r][c] * eps for c in range(n)] for r in range(n)]
        Jt = lc.conjugate_J(s, Smat, probe=ctx.points[0])
        s_tilde = s.with_J(Jt, leafwise_integrable=False)
        worst = 0.0
        for i, j in s.frame_pairs():
            N = lc.nijenhuis(s_tilde, s.frame[i], s.frame[j])
            for p in ctx.points:
                worst = max(worst, max(abs(v) for v in N.at(p)))
        maxima.append(worst)
    ratio = maxima[0] / maxima[1]
    acc.samples += [maxima[0], maxima[1]]
    acc.samples.append(abs(ratio / 100.0 - 1.0))
    acc.max_abs = abs(ratio - 100.0)


# --------------------------------------------------------------------------
# Registry
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IdentitySpec:
    identity: str
    anchor: str
    tolerance: float
    applies: object
    runner: object


def _couple_ok(sc):
    return sc.foliation_integrable


def _leafcx_ok(sc):
    return sc.foliation_integrable and sc.structure.leafwise_integrable


def _t3_couples(sc):
    # flows are integrated pointwise, so these stay affordable on 3-tori;
    # higher-dimensional charts pay ~dim^2 per step for the Jacobian
    return sc.foliation_integrable and sc.structure.chart.dim == 3


def _t5(sc):
    return sc.name in ("t5_product", "t5_perturbedJ")


def _family(sc):
    return sc.family is not None


def _shifted(sc):
    return sc.exact_witness is not None


def _any(sc):
    return True


REGISTRY = [
    IdentitySpec("excalc.d_squared", "d(d(omega)) = 0", 1e-10, _any, run_d_squared),
    IdentitySpec("excalc.leibniz_wedge", "d(a^b) = da^b + (-1)^|a| a^db", 1e-10, _any, run_leibniz_wedge),
    IdentitySpec("excalc.jacobi_vector", "[U,[V,W]] + [V,[W,U]] + [W,[U,V]] = 0", 1e-10, _any, run_jacobi_vector),
    IdentitySpec("dgla.antisym", "{a,b} = -(-1)^{|a||b|} {b,a}", 1e-9, _couple_ok, run_bracket_antisym),
    IdentitySpec("dgla.jacobi", "{a,{b,c}} = {{a,b},c} + (-1)^{|a||b|} {b,{a,c}}", 1e-9, _couple_ok, run_bracket_jacobi),
    IdentitySpec("dgla.leibniz_d", "d{a,b} = {da,b} + (-1)^|a| {a,db}", 1e-9, _couple_ok, run_leibniz_d),
    IdentitySpec("dgla.leibniz_delta", "delta{a,b} = {delta a,b} + (-1)^|a| {a,delta b}", 1e-9, _couple_ok, run_leibniz_delta),
    IdentitySpec("dgla.delta_squared", "delta(delta(a)) = 0", 1e-9, _couple_ok, run_delta_squared),
    IdentitySpec("zsub.closure", "iota_X delta(a) = 0 and iota_X {a,b} = 0 on Z*", 1e-10, _couple_ok, run_z_closure),
    IdentitySpec("zsub.reduced_bracket", "{a,b} = i_X da ^ b - a ^ i_X db on Z*", 1e-10, _couple_ok, run_z_reduced_bracket),
    IdentitySpec("zsub.reduced_gamma", "{gamma,a} = i_X dgamma ^ a - gamma ^ i_X da", 1e-10, _couple_ok, run_z_reduced_gamma),
    IdentitySpec("frobenius", "d gamma ^ gamma = 0 ; d gamma = -i_X dgamma ^ gamma ; MC(gamma) = 0", 1e-9, _any, run_frobenius),
    IdentitySpec("lemma.mc_oracle", "delta a + {a,a}/2 = i_X(d(gamma+a) ^ (gamma+a))", 1e-10, _couple_ok, run_mc_oracle),
    IdentitySpec("lemma.db_closed", "d_b(iota_X d gamma) = 0", 1e-9, _couple_ok, run_db_closed),
    IdentitySpec("lemma.omega_alpha", "omega_a^{-1} omega_a = id ; (gamma+a)(omega_a xi) = 0", 1e-10, _couple_ok, run_omega_alpha_inverse),
    IdentitySpec("flow.group_law", "Phi_{s+t} = Phi_s o Phi_t", 1e-7, _t3_couples, run_flow_group_law),
    IdentitySpec("flow.pullback_identity", "Phi_0^* omega = omega", 1e-12, _t3_couples, run_flow_pullback_identity),
    IdentitySpec("flow.lie_oracle", "d/dt|0 Phi_t^* omega = L_Y omega", 1e-5, _t3_couples, run_flow_lie_oracle),
    IdentitySpec("lemma.gauge_chi", "d/dt|0 chi(Phi_t^Y)(0) = -delta(gamma(Y))", 1e-4, _t3_couples, run_gauge_chi),
    IdentitySpec("lemma.gauge_S", "d/dt|0 S_{chi(Phi_t^Y)(0)} = -H_Y", 1e-4, _t3_couples, run_gauge_S),
    IdentitySpec("remark.gauge_mc", "MC(chi(Phi)(a)) stays within MC(a) + 1e-6", 1e-6, _t3_couples, run_gauge_preserves_mc),
    IdentitySpec("dbar.antilinearity", "(dbar W)(JV) = -J (dbar W)(V)", 1e-9, lambda sc: sc.foliation_integrable and sc.structure.n_leaf >= 2, run_dbar_antilinearity),
    IdentitySpec("dbar.commutes_J", "dbar(JW) = J dbar(W)", 1e-9, lambda sc: sc.foliation_integrable, run_dbar_commutes_J),
    IdentitySpec("dbar.leibniz", "dbar(aW) = (dbar a)(x)W + a dbar(W)", 1e-9, lambda sc: sc.foliation_integrable, run_dbar_leibniz),
    IdentitySpec("nijenhuis.bilinear", "N(fV,W) = f N(V,W) ; N(JV,W) = -J N(V,W)", 1e-10, lambda sc: sc.foliation_integrable, run_nijenhuis_bilinear),
    IdentitySpec("dbar.squared", "dbar(dbar W) = 0 on integrable leaves", 1e-9, _leafcx_ok, run_dbar_squared),
    IdentitySpec("remark.h_linear", "H_Y(fV) = f H_Y(V)", 1e-10, _leafcx_ok, run_h_linear),
    IdentitySpec("remark.h_alternative", "H(V) = ([V,X] + J P[JV,X])/2 - (i_X dgamma)(V) X/2", 1e-9, _leafcx_ok, run_h_alternative),
    IdentitySpec("lemma.dbarH", "dbar H = (i_X dgamma)^{0,1} ^ H", 1e-9, _leafcx_ok, run_dbarH),
    IdentitySpec("remark.ixdgamma01_closed", "dbar (i_X dgamma)^{0,1} = 0", 1e-9, _leafcx_ok, run_ixdgamma01_closed),
    IdentitySpec("prop.beth_squared", "beth(beth(W)) = 0", 1e-9, _leafcx_ok, run_beth_squared),
    IdentitySpec("prop.bethH", "beth(H) = 0", 1e-9, _leafcx_ok, run_bethH),
    IdentitySpec("prop.change_couple", "H(ghat,Xhat) = e^-lam H + dbar U - ((i_X dg)^{0,1} - dbar lam)(x)U", 1e-9, _leafcx_ok, run_change_couple),
    IdentitySpec("prop.iso_cohomology", "beth(ghat,Xhat) e^-lam P = e^-lam beth(g,X) P", 1e-9, _leafcx_ok, run_iso_cohomology),
    IdentitySpec("lemma.exact.witness", "H = beth(U); H = 0 for (gamma, X-U)", 1e-9, _shifted, run_exact_witness),
    IdentitySpec("lemma.exact.transport", "beth(g,X)(e^lam U) = e^lam H(ghat,Xhat)", 1e-8, _shifted, run_exact_transport),
    IdentitySpec("lemma.bracket_alpha", "[.,.]_a = [.,.] + a ^ T for MC-flat a", 1e-9, _leafcx_ok, run_bracket_alpha),
    IdentitySpec("defbracket.expansion", "conjugated bracket = ten-term expansion", 1e-10, _leafcx_ok, run_bracket_alpha_expansion),
    IdentitySpec("defbracket.leibniz", "[aV,W]_a = a[V,W]_a - <W,a>_a V", 1e-9, _leafcx_ok, run_bracket_alpha_leibniz),
    IdentitySpec("cor.n_alpha", "N_J^a = -4 a^{0,1} ^ H", 1e-8, _leafcx_ok, run_n_alpha),
    IdentitySpec("cor.levi_flat_mc", "delta a + {a,a}/2 = 0 ; dbar^a S + [[S,S]]_a/2 = -a^{0,1}^H", 1e-9, _family, run_levi_flat_mc),
    IdentitySpec("thm.tangent.eqP1", "delta beta = 0 for family tangents", 1e-7, _family, run_tangent_eqP1),
    IdentitySpec("thm.tangent.eqP2", "dbar P = -beta^{0,1} ^ H for family tangents", 1e-7, _family, run_tangent_eqP2),
    IdentitySpec("prop.dfrak_squared", "d(d(a, P)) = 0", 1e-9, _leafcx_ok, run_dfrak_squared),
    IdentitySpec("thm.tangent.witness", "d^0(gamma(Y), -(Y-gamma(Y)X)) = (delta gamma(Y), -H_Y)", 1e-9, _leafcx_ok, run_tangent_witness),
    IdentitySpec("thm.moduli.gauge_witness", "beta - beta' = delta i_Y gamma ; P - P' = -H_Y", 1e-9, _leafcx_ok, run_gauge_witness),
    IdentitySpec("lemma.hY_decomposition", "H_Y = dbar(Y - gamma(Y)X) + gamma(Y) H", 1e-9, _leafcx_ok, run_hY_decomposition),
    IdentitySpec("cor.dbar_hY", "dbar H_Y = (delta gamma(Y))^{0,1} ^ H", 1e-9, _leafcx_ok, run_dbar_hY),
    IdentitySpec("cor.phiH", "(beta + delta phi)^{0,1}^H = beta^{0,1}^H + dbar(phi H)", 1e-9, _leafcx_ok, run_phiH),
    IdentitySpec("scalc.s_roundtrip", "S = (J - Jt)(J + Jt)^{-1} ; (I+S)J(I+S)^{-1} = Jt ; SJ+JS = 0", 1e-9, _t5, run_s_roundtrip),
    IdentitySpec("prop.n_ntilde", "N_Jt((I+S)V,(I+S)W) = (I-S)^{-1}(N + S(N - N(S,S)) - 4(dbar S + [S,S]/2))", 1e-8, _t5, run_n_ntilde),
    IdentitySpec("cor.n_jtilde_identity", "dbar S + [[S,S]]/2 - N/4 = -(I-S) N_Jt((I+S).,(I+S).)/4", 1e-8, _t5, run_n_jtilde_identity),
    IdentitySpec("cor.n_jtilde_quadratic", "max|N_Jt| scales as eps^2 for S = eps S0, dbar S0 = 0", 0.2, lambda sc: sc.name == "t5_product", run_n_jtilde_quadratic),
]

REGISTRY_BY_ID = {spec.identity: spec for spec in REGISTRY}


def select_identities(selector):
    """Comma-separated identity-id globs; 'all' selects everything."""
    if not selector or selector == "all":
        return list(REGISTRY)
    chosen = []
    patterns = [pat.strip() for pat in selector.split(",") if pat.strip()]
    for spec in REGISTRY:
        if any(fnmatch.fnmatchcase(spec.identity, pat) for pat in patterns):
            chosen.append(spec)
    return chosen


def run_identity(spec, scenario, seed, n_points, tolerance=None):
    """Execute one identity on one scenario, never raising: failures inside
    a runner are recorded as a failing report with the diagnostic."""
    tol = spec.tolerance if tolerance is None else tolerance
    points = _ctx_points(scenario, seed, spec.identity, n_points)
    ctx = RunContext(
        scenario=scenario, identity=spec.identity, points=points, seed=seed, n_points=n_points
    )
    acc = ResidualAccumulator()
    started = time.perf_counter()
    error = ""
    try:
        spec.runner(scenario, ctx, acc)
    except (LeviFlatError, np.linalg.LinAlgError, ZeroDivisionError) as exc:
        error = f"{type(exc).__name__}: {exc}"
    elapsed = time.perf_counter() - started
    report = acc.report(
        suite=scenario.name,
        identity=spec.identity,
        anchor=spec.anchor,
        tolerance=tol,
        seed=seed,
        wall_time=elapsed,
    )
    if error:
        report.passed = False
        report.error = error
    return report
