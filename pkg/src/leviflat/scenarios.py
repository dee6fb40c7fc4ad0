"""Built-in structures, couples and deformation families with hand-verified
properties, plus the scenario file loader used by the CLI.

Every declared expectation is runnable through `check_expectation`.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ScenarioError
from .excalc import (
    DifferentialForm,
    VectorField,
    basis_vector,
    one_form,
)
from .foliation_dgla import DefiningCouple, frobenius_residuals
from .leafcx import LeviFlatStructure, h_form, ix_dgamma
from .report import ResidualAccumulator
from .symfield import (
    Chart,
    PointEvaluator,
    ScalarField,
    constant,
    coordinate,
    cos_of,
    fix_coordinate,
    parse_expr,
    sin_of,
    torus,
)

TWIST = 0.3
FAMILY_PARAMETER = "s"


@dataclass
class DeformationFamily:
    """Family t -> (alpha_t, S_t) held symbolically in an extra coordinate,
    so values and the tangent at 0 are exact."""

    name: str
    chart_ext: Chart
    alpha_coeffs: dict
    S_entries: list | None = None

    @property
    def _s_index(self):
        return self.chart_ext.dim - 1

    def _fix(self, f, t):
        return fix_coordinate(f, self._s_index, t)

    def alpha_at(self, t):
        chart = Chart(self.chart_ext.names[:-1], self.chart_ext.periodic[:-1])
        coeffs = {idx: self._fix(f, t) for idx, f in self.alpha_coeffs.items()}
        return DifferentialForm(chart, 1, coeffs)

    def alpha_tangent(self):
        chart = Chart(self.chart_ext.names[:-1], self.chart_ext.periodic[:-1])
        coeffs = {
            idx: self._fix(f.diff(self._s_index), 0.0)
            for idx, f in self.alpha_coeffs.items()
        }
        return DifferentialForm(chart, 1, coeffs)

    def S_matrix_at(self, t):
        if self.S_entries is None:
            return None
        return [[self._fix(f, t) for f in row] for row in self.S_entries]

    def S_matrix_tangent(self):
        if self.S_entries is None:
            return None
        return [
            [self._fix(f.diff(self._s_index), 0.0) for f in row]
            for row in self.S_entries
        ]


@dataclass
class Scenario:
    """A named structure plus optional family, witness and expectations."""

    name: str
    structure: LeviFlatStructure
    family: DeformationFamily | None = None
    exact_witness: VectorField | None = None
    expected: tuple = ()
    foliation_integrable: bool = True


BUILTIN_NAMES = (
    "t3_flat",
    "t3_twisted",
    "t3_twisted_shifted",
    "t5_product",
    "t5_perturbedJ",
    "family_t3_tilt",
    "family_t3_Jrotation",
    "broken_nonintegrable",
)

_J2 = ((0.0, -1.0), (1.0, 0.0))


def _t3_chart():
    return torus("x", "y", "t")


def _t3_flat_structure():
    chart = _t3_chart()
    gamma = one_form(chart, [0.0, 0.0, 1.0])
    X = basis_vector(chart, 2)
    frame = (basis_vector(chart, 0), basis_vector(chart, 1))
    return LeviFlatStructure.build(chart, DefiningCouple(gamma, X), frame, _J2)


def _t3_twisted_structure():
    chart = _t3_chart()
    t = coordinate(chart, "t")
    gamma = DifferentialForm(chart, 1, {(0,): TWIST * cos_of(t), (2,): 1.0})
    X = basis_vector(chart, 2)
    E1 = VectorField(chart, [constant(chart, 1.0), constant(chart, 0.0), -TWIST * cos_of(t)])
    E2 = basis_vector(chart, 1)
    return LeviFlatStructure.build(chart, DefiningCouple(gamma, X), (E1, E2), _J2)


def _t3_twisted_shifted_structure():
    base = _t3_twisted_structure()
    chart = base.chart
    y = coordinate(chart, "y")
    U = base.frame[0].scaled(sin_of(y))
    X_hat = base.X + U
    couple = DefiningCouple(base.gamma, X_hat)
    # dual coframe: eta_i - eta_i(U) gamma keeps eta_i(X_hat) = 0
    coframe = tuple(
        eta - base.gamma.scaled(eta.apply_symbolic([U])) for eta in base.coframe
    )
    return LeviFlatStructure(chart, couple, base.frame, base.Jmat, coframe)


def _t5_chart():
    return torus("x1", "x2", "x3", "x4", "t")


_J4 = (
    (0.0, -1.0, 0.0, 0.0),
    (1.0, 0.0, 0.0, 0.0),
    (0.0, 0.0, 0.0, -1.0),
    (0.0, 0.0, 1.0, 0.0),
)


def _t5_product_structure():
    chart = _t5_chart()
    gamma = one_form(chart, [0.0, 0.0, 0.0, 0.0, 1.0])
    X = basis_vector(chart, 4)
    frame = tuple(basis_vector(chart, i) for i in range(4))
    return LeviFlatStructure.build(chart, DefiningCouple(gamma, X), frame, _J4)


def _t5_perturbedJ_structure():
    base = _t5_product_structure()
    chart = base.chart
    nu = sin_of(coordinate(chart, "x1"))
    zero = constant(chart, 0.0)
    one = constant(chart, 1.0)
    # conjugation of the block J by I + nu*E with E nilpotent (E E4 = E1):
    # J' E3 = E4 + nu E1, J' E4 = -E3 - nu E2, J'^2 = -I exactly.
    Jmat = (
        (zero, -one, nu, zero),
        (one, zero, zero, -nu),
        (zero, zero, zero, -one),
        (zero, zero, one, zero),
    )
    return base.with_J(Jmat, leafwise_integrable=False)


def _family_tilt():
    chart_ext = _t3_chart().extend(FAMILY_PARAMETER)
    s = coordinate(chart_ext, FAMILY_PARAMETER)
    return DeformationFamily(
        name="family_t3_tilt",
        chart_ext=chart_ext,
        alpha_coeffs={(0,): 0.7 * s, (1,): -0.4 * s},
    )


def _family_jrotation():
    chart_ext = _t3_chart().extend(FAMILY_PARAMETER)
    s = coordinate(chart_ext, FAMILY_PARAMETER)
    p, q = 0.6, -0.35
    zero_alpha = {}
    entries = [
        [p * s, q * s],
        [q * s, (-p) * s],
    ]
    return DeformationFamily(
        name="family_t3_Jrotation",
        chart_ext=chart_ext,
        alpha_coeffs=zero_alpha,
        S_entries=entries,
    )


def _broken_structure():
    chart = _t3_chart()
    x = coordinate(chart, "x")
    gamma = DifferentialForm(chart, 1, {(1,): x, (2,): 1.0})
    X = basis_vector(chart, 2)
    frame = (basis_vector(chart, 0), basis_vector(chart, 1))
    return LeviFlatStructure.build(chart, DefiningCouple(gamma, X), frame, _J2)


def t5_quadratic_S0(structure):
    """Nonconstant dbar-closed anticommuting S0 on the product 5-torus with
    [S0, S0] != 0: the remainder of the conjugated-J integrability equation
    is then genuinely quadratic in the scaling of S0."""
    chart = structure.chart
    phi = cos_of(coordinate(chart, "x1"))
    psi = cos_of(coordinate(chart, "x3"))
    zero = constant(chart, 0.0)
    entries = [
        [zero, zero, psi, zero],
        [zero, zero, zero, -psi],
        [phi, zero, zero, zero],
        [zero, -phi, zero, zero],
    ]
    return entries


def builtin(name):
    """Construct a built-in scenario by name."""
    if name == "t3_flat":
        return Scenario(
            name=name,
            structure=_t3_flat_structure(),
            expected=("H=0", "ixdgamma=0"),
        )
    if name == "t3_twisted":
        return Scenario(
            name=name,
            structure=_t3_twisted_structure(),
            expected=("H=0", "ixdgamma!=0"),
        )
    if name == "t3_twisted_shifted":
        structure = _t3_twisted_shifted_structure()
        y = coordinate(structure.chart, "y")
        witness = structure.frame[0].scaled(sin_of(y))
        return Scenario(
            name=name,
            structure=structure,
            exact_witness=witness,
            expected=("H!=0", "ixdgamma!=0", "exact_witness"),
        )
    if name == "t5_product":
        return Scenario(
            name=name,
            structure=_t5_product_structure(),
            expected=("H=0", "ixdgamma=0"),
        )
    if name == "t5_perturbedJ":
        return Scenario(
            name=name,
            structure=_t5_perturbedJ_structure(),
            expected=("nijenhuis!=0", "J_squared"),
        )
    if name == "family_t3_tilt":
        return Scenario(
            name=name,
            structure=_t3_flat_structure(),
            family=_family_tilt(),
            expected=("H=0", "family_mc_flat"),
        )
    if name == "family_t3_Jrotation":
        return Scenario(
            name=name,
            structure=_t3_flat_structure(),
            family=_family_jrotation(),
            expected=("H=0", "family_mc_flat"),
        )
    if name == "broken_nonintegrable":
        return Scenario(
            name=name,
            structure=_broken_structure(),
            expected=("not_integrable",),
            foliation_integrable=False,
        )
    raise ScenarioError(f"unknown scenario {name!r}; built-ins: {', '.join(BUILTIN_NAMES)}")


def resolve(name_or_path):
    """Built-in name, or a path to a scenario file."""
    if name_or_path in BUILTIN_NAMES:
        return builtin(name_or_path)
    import os

    if os.path.exists(str(name_or_path)):
        return load_scenario_file(name_or_path)
    raise ScenarioError(f"unknown scenario {name_or_path!r}")


# --------------------------------------------------------------------------
# Runnable expectations
# --------------------------------------------------------------------------


def check_expectation(scenario, prop, points):
    """Evaluate one declared expectation; returns (ok, residual)."""
    s = scenario.structure
    if prop == "H=0":
        acc = ResidualAccumulator()
        H = h_form(s)
        for idx, V in H.values.items():
            for p in points:
                acc.add(V.at(p), [0.0] * s.chart.dim)
        return acc.max_rel <= 1e-9, acc.max_rel
    if prop == "H!=0":
        ok, res = check_expectation(scenario, "H=0", points)
        return (not ok), res
    if prop == "ixdgamma=0":
        form = ix_dgamma(s)
        acc = ResidualAccumulator()
        from .excalc import form_components

        for p in points:
            vals = form_components(form, p)
            acc.add(vals, [0.0] * len(vals))
        return acc.max_rel <= 1e-9, acc.max_rel
    if prop == "ixdgamma!=0":
        ok, res = check_expectation(scenario, "ixdgamma=0", points)
        return (not ok), res
    if prop == "exact_witness":
        from .defcomplex import exactness_witness_check

        report = exactness_witness_check(scenario.exact_witness, s, points, suite=scenario.name)
        return report.passed, report.max_rel
    if prop == "nijenhuis!=0":
        from .leafcx import nijenhuis

        acc = ResidualAccumulator()
        for i, j in s.frame_pairs():
            N = nijenhuis(s, s.frame[i], s.frame[j])
            for p in points:
                acc.add(N.at(p), [0.0] * s.chart.dim)
        return acc.max_rel > 1e-3, acc.max_rel
    if prop == "J_squared":
        inv = s.invariants(points)
        return inv["J_squared"] <= 1e-10, inv["J_squared"]
    if prop == "not_integrable":
        r3, _, _ = frobenius_residuals(s.gamma, s.X, points)
        return r3 > 1e-2, r3
    if prop == "family_mc_flat":
        from .foliation_dgla import mc_residual
        from .excalc import form_components

        acc = ResidualAccumulator()
        for t in (0.0, 0.1, -0.1, 0.3, -0.3):
            alpha = scenario.family.alpha_at(t)
            mc = mc_residual(alpha, s.couple, points)
            for p in points:
                vals = form_components(mc, p)
                acc.add(vals, [0.0] * len(vals))
        return acc.max_rel <= 1e-9, acc.max_rel
    raise ScenarioError(f"unknown expectation {prop!r}")


# --------------------------------------------------------------------------
# Scenario files
# --------------------------------------------------------------------------


def _parse_sections(text, path):
    sections = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = (line[1:-1].strip(), [])
            sections.append(current)
            continue
        if current is None or "=" not in line:
            raise ScenarioError(f"{path}:{lineno}: expected 'key = value' inside a section")
        key, value = line.split("=", 1)
        current[1].append((key.strip(), value.strip(), lineno))
    return sections


def load_scenario_file(path):
    """Load a scenario from a sectioned text file.

    Sections: [scenario] (optional name), [chart], [gamma], [X],
    [frame <name>] (one per frame vector, in order), [J] (row = e1, e2, ...),
    [family <name>.alpha] and [family <name>.S] (expressions may use the
    extra parameter 's').
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    sections = _parse_sections(text, path)
    by_name = {}
    frames = []
    families = {}
    for name, entries in sections:
        if name.startswith("frame"):
            frames.append((name, entries))
        elif name.startswith("family"):
            families.setdefault(name, entries)
        else:
            if name in by_name:
                raise ScenarioError(f"{path}: duplicate section [{name}]")
            by_name[name] = entries

    if "chart" not in by_name:
        raise ScenarioError(f"{path}: missing [chart] section")
    chart_kv = dict((k, v) for k, v, _ in by_name["chart"])
    if "names" not in chart_kv:
        raise ScenarioError(f"{path}: [chart] needs 'names'")
    names = tuple(chart_kv["names"].split())
    periodic = tuple(
        bool(int(tok)) for tok in chart_kv.get("periodic", " ".join("1" * len(names))).split()
    )
    chart = Chart(names, periodic)

    def parse_cov(entries, what):
        coeffs = {}
        for key, value, lineno in entries:
            try:
                i = chart.index(key)
            except Exception:
                raise ScenarioError(f"{path}:{lineno}: unknown coordinate {key!r} in {what}")
            coeffs[(i,)] = parse_expr(value, chart)
        return DifferentialForm(chart, 1, coeffs)

    def parse_vec(entries, what):
        comps = [constant(chart, 0.0) for _ in range(chart.dim)]
        for key, value, lineno in entries:
            try:
                i = chart.index(key)
            except Exception:
                raise ScenarioError(f"{path}:{lineno}: unknown coordinate {key!r} in {what}")
            comps[i] = parse_expr(value, chart)
        return VectorField(chart, comps)

    if "gamma" not in by_name or "X" not in by_name:
        raise ScenarioError(f"{path}: missing [gamma] or [X] section")
    gamma = parse_cov(by_name["gamma"], "[gamma]")
    X = parse_vec(by_name["X"], "[X]")

    if not frames:
        raise ScenarioError(f"{path}: at least one [frame ...] section required")
    frame = tuple(parse_vec(entries, f"[{name}]") for name, entries in frames)

    if "J" not in by_name:
        raise ScenarioError(f"{path}: missing [J] section")
    rows = []
    for key, value, lineno in by_name["J"]:
        if key != "row":
            raise ScenarioError(f"{path}:{lineno}: [J] entries must be 'row = ...'")
        rows.append([parse_expr(tok.strip(), chart) for tok in value.split(",")])
    n = len(frame)
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ScenarioError(f"{path}: [J] must be a {n}x{n} matrix")

    structure = LeviFlatStructure.build(chart, DefiningCouple(gamma, X), frame, rows)

    family = None
    if families:
        chart_ext = chart.extend(FAMILY_PARAMETER)
        fam_alpha = {}
        fam_S = None
        fam_name = None
        for name, entries in families.items():
            tail = name.split(None, 1)[1]
            fam_name, _, part = tail.partition(".")
            if part == "alpha":
                for key, value, lineno in entries:
                    i = chart.index(key)
                    fam_alpha[(i,)] = parse_expr(value, chart_ext)
            elif part == "S":
                fam_S = []
                for key, value, lineno in entries:
                    if key != "row":
                        raise ScenarioError(f"{path}:{lineno}: family S entries must be 'row = ...'")
                    fam_S.append([parse_expr(tok.strip(), chart_ext) for tok in value.split(",")])
            else:
                raise ScenarioError(f"{path}: family section must end in .alpha or .S")
        family = DeformationFamily(
            name=fam_name or "family",
            chart_ext=chart_ext,
            alpha_coeffs=fam_alpha,
            S_entries=fam_S,
        )

    scen_kv = dict((k, v) for k, v, _ in by_name.get("scenario", []))
    import os

    name = scen_kv.get("name", os.path.splitext(os.path.basename(str(path)))[0])
    return Scenario(name=name, structure=structure, family=family)
