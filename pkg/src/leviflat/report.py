"""Residual bookkeeping and per-identity check reports.

Artifact-wide residual convention: for an identity LHS = RHS the residual is
max over the sample set of |LHS - RHS| / (1 + max(|LHS|, |RHS|)), taken
componentwise for vector and form values.
"""

from __future__ import annotations

from dataclasses import dataclass, field


def relative_residual(lhs, rhs):
    """Componentwise normalized deviation of two floats or float sequences."""
    if not hasattr(lhs, "__len__"):
        lhs, rhs = [lhs], [rhs]
    worst = 0.0
    for a, b in zip(lhs, rhs):
        a, b = float(a), float(b)
        r = abs(a - b) / (1.0 + max(abs(a), abs(b)))
        if r > worst:
            worst = r
    return worst


def absolute_deviation(lhs, rhs):
    if not hasattr(lhs, "__len__"):
        lhs, rhs = [lhs], [rhs]
    return max((abs(float(a) - float(b)) for a, b in zip(lhs, rhs)), default=0.0)


class ResidualAccumulator:
    """Collects LHS/RHS pairs and produces a CheckReport."""

    def __init__(self):
        self.samples = []
        self.max_abs = 0.0

    def add(self, lhs, rhs=0.0):
        rel = relative_residual(lhs, rhs)
        self.samples.append(rel)
        dev = absolute_deviation(lhs, rhs)
        if dev > self.max_abs:
            self.max_abs = dev
        return rel

    @property
    def max_rel(self):
        return max(self.samples, default=0.0)

    def report(self, *, suite, identity, anchor, tolerance, seed, wall_time=0.0):
        max_rel = float(self.max_rel)
        return CheckReport(
            suite=suite,
            identity=identity,
            anchor=anchor,
            samples=[float(v) for v in self.samples],
            max_abs=float(self.max_abs),
            max_rel=max_rel,
            tolerance=float(tolerance),
            passed=bool(max_rel <= tolerance),
            seed=int(seed),
            wall_time=float(wall_time),
        )


@dataclass
class CheckReport:
    """Residual statistics for one identity on one scenario.

    wall_time is informational only and never serialized, so reports stay
    byte-identical across runs with the same configuration.
    """

    suite: str
    identity: str
    anchor: str
    samples: list = field(default_factory=list)
    max_abs: float = 0.0
    max_rel: float = 0.0
    tolerance: float = 0.0
    passed: bool = False
    seed: int = 0
    wall_time: float = 0.0
    error: str = ""

    def to_dict(self):
        out = {
            "suite": self.suite,
            "identity": self.identity,
            "anchor": self.anchor,
            "samples": self.samples,
            "max_abs": self.max_abs,
            "max_rel": self.max_rel,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "seed": self.seed,
        }
        if self.error:
            out["error"] = self.error
        return out

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"[{status}] {self.identity:<28s} {self.suite:<20s} "
            f"max_rel={self.max_rel:.3e} tol={self.tolerance:.1e}"
        )
