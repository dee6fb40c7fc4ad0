"""Vector fields and differential forms with the classical operators.

Forms are stored sparsely on strictly increasing multi-indices, so
antisymmetry holds by construction.  All operations are pure functions over
immutable values.
"""

from __future__ import annotations

from itertools import combinations

from .errors import ChartMismatchError
from .symfield import PointEvaluator, ScalarField, ZERO, constant

_zero_cache = {}


def _zero(chart):
    f = _zero_cache.get(chart.names)
    if f is None:
        f = ScalarField(chart, ZERO)
        _zero_cache[chart.names] = f
    return f


def _as_field(chart, v):
    if isinstance(v, ScalarField):
        if v.chart != chart:
            raise ChartMismatchError("fields on different charts")
        return v
    return constant(chart, v)


def _merge_sign(left, right):
    """Merge two strictly increasing index tuples.

    Returns (sign, merged) or (0, None) when they overlap.
    """
    merged = []
    sign = 1
    i = j = 0
    while i < len(left) and j < len(right):
        a, b = left[i], right[j]
        if a == b:
            return 0, None
        if a < b:
            merged.append(a)
            i += 1
        else:
            # right[j] jumps over the remaining len(left) - i entries
            sign *= -1 if (len(left) - i) % 2 else 1
            merged.append(b)
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    return sign, tuple(merged)


def _insert_sign(i, idx):
    """Sign and result of inserting index i into increasing tuple idx."""
    pos = 0
    for k in idx:
        if k == i:
            return 0, None
        if k < i:
            pos += 1
    out = idx[:pos] + (i,) + idx[pos:]
    return (-1) ** pos, out


class VectorField:
    """Vector field as a tuple of ScalarField chart components."""

    __slots__ = ("chart", "components")

    def __init__(self, chart, components):
        comps = tuple(_as_field(chart, c) for c in components)
        if len(comps) != chart.dim:
            raise ValueError("component count must equal chart dim")
        self.chart = chart
        self.components = comps

    def __add__(self, other):
        if not isinstance(other, VectorField):
            return NotImplemented
        if other.chart != self.chart:
            raise ChartMismatchError("vector fields on different charts")
        return VectorField(self.chart, [a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other):
        if not isinstance(other, VectorField):
            return NotImplemented
        if other.chart != self.chart:
            raise ChartMismatchError("vector fields on different charts")
        return VectorField(self.chart, [a - b for a, b in zip(self.components, other.components)])

    def __neg__(self):
        return VectorField(self.chart, [-a for a in self.components])

    def scaled(self, f):
        """Multiply by a ScalarField or number."""
        f = _as_field(self.chart, f)
        return VectorField(self.chart, [f * a for a in self.components])

    def __rmul__(self, f):
        return self.scaled(f)

    def apply(self, f):
        """Directional derivative V(f) as a ScalarField."""
        f = _as_field(self.chart, f)
        out = _zero(self.chart)
        for i, comp in enumerate(self.components):
            out = out + comp * f.diff(i)
        return out

    def at(self, p, ev=None):
        """Numeric components at a point, as a list of floats."""
        ev = ev or PointEvaluator(self.chart, p)
        return [ev(c) for c in self.components]

    def __repr__(self):
        return f"VectorField({self.components!r})"


def basis_vector(chart, i):
    comps = [0.0] * chart.dim
    comps[i] = 1.0
    return VectorField(chart, comps)


def zero_vector(chart):
    return VectorField(chart, [0.0] * chart.dim)


class DifferentialForm:
    """Degree-k form with coefficients on strictly increasing index tuples."""

    __slots__ = ("chart", "degree", "coeffs")

    def __init__(self, chart, degree, coeffs=None):
        if degree < 0:
            raise ValueError("negative degree")
        self.chart = chart
        self.degree = degree
        clean = {}
        for idx, f in (coeffs or {}).items():
            idx = tuple(idx)
            if len(idx) != degree:
                raise ValueError(f"index {idx} has wrong length for degree {degree}")
            if any(a >= b for a, b in zip(idx, idx[1:])):
                raise ValueError(f"index {idx} is not strictly increasing")
            if idx and idx[-1] >= chart.dim:
                raise ValueError(f"index {idx} out of range for dim {chart.dim}")
            f = _as_field(chart, f)
            if not f.is_zero:
                clean[idx] = f
        self.coeffs = clean

    def coefficient(self, idx):
        return self.coeffs.get(tuple(idx), _zero(self.chart))

    def __add__(self, other):
        if not isinstance(other, DifferentialForm):
            return NotImplemented
        if other.chart != self.chart or other.degree != self.degree:
            raise ChartMismatchError("cannot add forms of different chart/degree")
        coeffs = dict(self.coeffs)
        for idx, f in other.coeffs.items():
            coeffs[idx] = coeffs[idx] + f if idx in coeffs else f
        return DifferentialForm(self.chart, self.degree, coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return DifferentialForm(self.chart, self.degree, {i: -f for i, f in self.coeffs.items()})

    def scaled(self, f):
        f = _as_field(self.chart, f)
        return DifferentialForm(self.chart, self.degree, {i: f * g for i, g in self.coeffs.items()})

    def __rmul__(self, f):
        return self.scaled(f)

    @property
    def is_zero(self):
        return not self.coeffs

    def apply_symbolic(self, args):
        """Evaluate on symbolic VectorField arguments, returning a ScalarField."""
        if len(args) != self.degree:
            raise ValueError(f"degree {self.degree} form applied to {len(args)} arguments")
        out = _zero(self.chart)
        if self.degree == 0:
            return self.coeffs.get((), out)
        for idx, f in self.coeffs.items():
            # determinant of the idx-rows of the argument components
            if self.degree == 1:
                det = args[0].components[idx[0]]
            elif self.degree == 2:
                a, b = idx
                det = (
                    args[0].components[a] * args[1].components[b]
                    - args[0].components[b] * args[1].components[a]
                )
            else:
                det = _zero(self.chart)
                for perm, sign in _signed_permutations(self.degree):
                    term = args[0].components[idx[perm[0]]]
                    for r in range(1, self.degree):
                        term = term * args[r].components[idx[perm[r]]]
                    det = det + term if sign > 0 else det - term
            out = out + f * det
        return out

    def at(self, p, numeric_args, ev=None):
        """Evaluate at point p on numeric argument vectors (lists of floats)."""
        if len(numeric_args) != self.degree:
            raise ValueError(f"degree {self.degree} form applied to {len(numeric_args)} arguments")
        ev = ev or PointEvaluator(self.chart, p)
        if self.degree == 0:
            c = self.coeffs.get(())
            return ev(c) if c is not None else 0.0
        total = 0.0
        for idx, f in self.coeffs.items():
            if self.degree == 1:
                det = numeric_args[0][idx[0]]
            elif self.degree == 2:
                a, b = idx
                det = numeric_args[0][a] * numeric_args[1][b] - numeric_args[0][b] * numeric_args[1][a]
            else:
                det = 0.0
                for perm, sign in _signed_permutations(self.degree):
                    term = 1.0
                    for r in range(self.degree):
                        term *= numeric_args[r][idx[perm[r]]]
                    det += sign * term
            total += ev(f) * det
        return total

    def __repr__(self):
        return f"DifferentialForm(deg={self.degree}, {self.coeffs!r})"


_perm_cache = {}


def _signed_permutations(k):
    perms = _perm_cache.get(k)
    if perms is None:
        from itertools import permutations

        perms = []
        for perm in permutations(range(k)):
            sign = 1
            for i in range(k):
                for j in range(i + 1, k):
                    if perm[i] > perm[j]:
                        sign = -sign
            perms.append((perm, sign))
        _perm_cache[k] = perms
    return perms


def zero_form(chart, degree):
    return DifferentialForm(chart, degree, {})


def scalar_form(f):
    """Wrap a ScalarField as a 0-form."""
    return DifferentialForm(f.chart, 0, {(): f})


def coordinate_differential(chart, i):
    return DifferentialForm(chart, 1, {(i,): 1.0})


def one_form(chart, components):
    return DifferentialForm(chart, 1, {(i,): c for i, c in enumerate(components)})


def exterior_derivative(omega):
    """Coordinate exterior derivative; the gradient for 0-forms."""
    chart = omega.chart
    if omega.degree >= chart.dim:
        return zero_form(chart, omega.degree + 1)
    out = {}
    for idx, f in omega.coeffs.items():
        for j in range(chart.dim):
            df = f.diff(j)
            if df.is_zero:
                continue
            sign, new_idx = _insert_sign(j, idx)
            if sign == 0:
                continue
            term = df if sign > 0 else -df
            out[new_idx] = out[new_idx] + term if new_idx in out else term
    return DifferentialForm(chart, omega.degree + 1, out)


def wedge(alpha, beta):
    """Graded-antisymmetric wedge product in the standard sign convention."""
    if alpha.chart != beta.chart:
        raise ChartMismatchError("wedge of forms on different charts")
    chart = alpha.chart
    degree = alpha.degree + beta.degree
    if degree > chart.dim:
        return zero_form(chart, degree)
    out = {}
    for i_idx, f in alpha.coeffs.items():
        for j_idx, g in beta.coeffs.items():
            sign, merged = _merge_sign(i_idx, j_idx)
            if sign == 0:
                continue
            term = f * g
            if sign < 0:
                term = -term
            out[merged] = out[merged] + term if merged in out else term
    return DifferentialForm(chart, degree, out)


def interior_product(X, omega):
    """(iota_X omega)(V1..Vk-1) = omega(X, V1..Vk-1)."""
    if X.chart != omega.chart:
        raise ChartMismatchError("interior product across charts")
    if omega.degree == 0:
        raise ValueError("interior product needs a form of degree >= 1")
    out = {}
    for idx, f in omega.coeffs.items():
        for pos, i in enumerate(idx):
            rest = idx[:pos] + idx[pos + 1 :]
            term = X.components[i] * f
            if pos % 2:
                term = -term
            if not term.is_zero:
                out[rest] = out[rest] + term if rest in out else term
    return DifferentialForm(omega.chart, omega.degree - 1, out)


def lie_bracket(V, W):
    """[V, W]^i = sum_j V^j d_j W^i - W^j d_j V^i."""
    if V.chart != W.chart:
        raise ChartMismatchError("bracket of fields on different charts")
    return VectorField(V.chart, [V.apply(w) - W.apply(v) for v, w in zip(V.components, W.components)])


def lie_derivative_form(X, omega):
    """Cartan's formula L_X = d iota_X + iota_X d."""
    if X.chart != omega.chart:
        raise ChartMismatchError("Lie derivative across charts")
    d_omega = exterior_derivative(omega)
    ix_d = interior_product(X, d_omega)
    if omega.degree == 0:
        return ix_d
    return exterior_derivative(interior_product(X, omega)) + ix_d


def evaluate_form(omega, p, args):
    """Multilinear antisymmetric evaluation at p on VectorField arguments."""
    if len(args) != omega.degree:
        raise ValueError(f"degree {omega.degree} form applied to {len(args)} arguments")
    ev = PointEvaluator(omega.chart, p)
    numeric = [arg.at(p, ev) for arg in args]
    return omega.at(p, numeric, ev)


def form_components(omega, p, ev=None):
    """Numeric coefficients of omega at p on all increasing index tuples."""
    ev = ev or PointEvaluator(omega.chart, p)
    if omega.degree == 0:
        c = omega.coeffs.get(())
        return [ev(c) if c is not None else 0.0]
    return [
        ev(omega.coeffs[idx]) if idx in omega.coeffs else 0.0
        for idx in combinations(range(omega.chart.dim), omega.degree)
    ]


def invert_matrix(chart, entries, probe=None):
    """Symbolic Gauss-Jordan inverse of a matrix of ScalarFields.

    Pivots prefer nonzero-constant entries so that the near-identity frames
    used by the built-in scenarios invert without division nodes.  When a
    probe point is supplied, the pivot with the largest magnitude there is
    chosen instead, which keeps division nodes away from zero crossings for
    matrices like J + Jtilde whose diagonal vanishes.
    """
    n = len(entries)
    a = [[_as_field(chart, entries[r][c]) for c in range(n)] for r in range(n)]
    inv = [[constant(chart, 1.0 if r == c else 0.0) for c in range(n)] for r in range(n)]
    from .symfield import Const, PointEvaluator

    ev = PointEvaluator(chart, probe) if probe is not None else None
    for col in range(n):
        pivot_row = None
        if ev is not None:
            best = 0.0
            for r in range(col, n):
                if a[r][col].is_zero:
                    continue
                mag = abs(ev(a[r][col]))
                if mag > best:
                    best, pivot_row = mag, r
        if pivot_row is None:
            for r in range(col, n):
                node = a[r][col].node
                if isinstance(node, Const) and node.value != 0.0:
                    pivot_row = r
                    break
        if pivot_row is None:
            for r in range(col, n):
                if not a[r][col].is_zero:
                    pivot_row = r
                    break
        if pivot_row is None:
            raise ValueError("matrix is structurally singular")
        if pivot_row != col:
            a[col], a[pivot_row] = a[pivot_row], a[col]
            inv[col], inv[pivot_row] = inv[pivot_row], inv[col]
        pivot = a[col][col]
        if not (isinstance(pivot.node, Const) and pivot.node.value == 1.0):
            a[col] = [f / pivot for f in a[col]]
            inv[col] = [f / pivot for f in inv[col]]
        for r in range(n):
            if r == col or a[r][col].is_zero:
                continue
            factor = a[r][col]
            a[r] = [f - factor * g for f, g in zip(a[r], a[col])]
            inv[r] = [f - factor * g for f, g in zip(inv[r], inv[col])]
    return inv


def matrix_apply(chart, matrix, vec_fields):
    """matrix (list of rows of ScalarFields) times a coefficient vector."""
    return [
        sum((matrix[r][c] * vec_fields[c] for c in range(len(vec_fields))), _zero(chart))
        for r in range(len(matrix))
    ]


def matrix_mul(chart, A, B):
    n, m, k = len(A), len(B[0]), len(B)
    return [
        [sum((A[r][t] * B[t][c] for t in range(k)), _zero(chart)) for c in range(m)]
        for r in range(n)
    ]


def matrix_eval(matrix, ev):
    return [[ev(f) for f in row] for row in matrix]
