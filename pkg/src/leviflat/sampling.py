"""Seeded sample points and random trigonometric fields.

One named PRNG stream per (seed, labels...) so that every suite, scenario and
sample index draws from its own reproducible stream.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

from .excalc import DifferentialForm, VectorField
from .symfield import ScalarField, const, cos as cos_node, sin as sin_node, Coord, add, mul

TWO_PI = 2.0 * math.pi


def derive_seed(*parts):
    """Stable 64-bit seed derived from arbitrary labels."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


def stream(*parts):
    return np.random.default_rng(derive_seed(*parts))


def sample_points(chart, n, rng):
    """n uniform points on the chart's torus."""
    return [tuple(rng.uniform(0.0, TWO_PI, chart.dim)) for _ in range(n)]


def random_scalar(chart, rng, amplitude=1.0):
    """Trigonometric polynomial of degree <= 2 per coordinate.

    Coefficients are uniform in [-amplitude, amplitude]; one second harmonic
    and one cross harmonic keep mixed second derivatives nontrivial without
    bloating the expression tree.
    """
    coeff = lambda: rng.uniform(-amplitude, amplitude)
    node = const(coeff())
    for i in range(chart.dim):
        node = add(node, mul(const(coeff()), sin_node(Coord(i))))
        node = add(node, mul(const(coeff()), cos_node(Coord(i))))
    m = int(rng.integers(0, chart.dim))
    node = add(node, mul(const(coeff()), cos_node(mul(const(2.0), Coord(m)))))
    if chart.dim >= 2:
        j = int(rng.integers(0, chart.dim))
        k = int(rng.integers(0, chart.dim - 1))
        if k >= j:
            k += 1
        node = add(node, mul(const(coeff()), sin_node(add(Coord(j), Coord(k)))))
    return ScalarField(chart, node)


def random_vector_field(chart, rng, amplitude=1.0):
    return VectorField(chart, [random_scalar(chart, rng, amplitude) for _ in range(chart.dim)])


def random_form(chart, k, rng, amplitude=1.0):
    from itertools import combinations

    if k == 0:
        from .excalc import scalar_form

        return scalar_form(random_scalar(chart, rng, amplitude))
    coeffs = {
        idx: random_scalar(chart, rng, amplitude)
        for idx in combinations(range(chart.dim), k)
    }
    return DifferentialForm(chart, k, coeffs)
