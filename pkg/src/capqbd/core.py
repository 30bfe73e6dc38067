"""Phase-by-phase exact solution of class-M chains (clearing analysis on phases).

The stationary probability of a repeating state is written as

    pi[(m, j)] = sum_terms coeff * C(j - (j0 + 1) + degree, degree) * base**(j - j0)

with one scalar base per phase.  Each coefficient is propagated phase by
phase as an affine expression in the *boundary unknowns* (the boundary
probabilities and ``pi[(m, j0)]``).  Only those ``|N| + M + 1`` unknowns are
then solved for, from the balance equations at level ``j0`` and the boundary
plus normalisation.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Hashable, Mapping

import numpy as np

from . import linalg
from .clearing import ClearingParams, derive
from .errors import (CapError, ResidualTooLarge, SingularMatrix, SingularSystem,
                     UnsupportedCase, ValidationError)
from .model import ChainSpec, total_jump_rate, validate_spec
from .series import binom, equal_base_kernels, negbin_tail_sum, split_base_kernels

DEFAULT_TOL_BASE = 1e-9
RESIDUAL_TOL = 1e-9
MASS_TOL = 1e-10
CLAMP_SILENT = 1e-12
CLAMP_HARD = 1e-9


# ------------------------------------------------------------------ base terms


@dataclass(frozen=True)
class BaseTerms:
    r: tuple[float, ...]
    phi_at_alpha: tuple[float, ...]
    omega: tuple[float | None, ...]
    lam: tuple[float, ...]
    mu: tuple[float, ...]
    alpha: tuple[float, ...]

    @property
    def M(self) -> int:
        return len(self.r) - 1

    def params(self, m: int) -> ClearingParams:
        return ClearingParams(self.lam[m], self.mu[m], self.alpha[m])


def compute_base_terms(spec: ChainSpec, *, validate: bool = True) -> BaseTerms:
    if validate:
        report = validate_spec(spec)
        if not report.ok:
            raise ValidationError(report)
    rows = []
    for m, ph in enumerate(spec.phases):
        params = ClearingParams(ph.lam, ph.mu, total_jump_rate(spec, m))
        rows.append((params, derive(params)))
    return BaseTerms(
        r=tuple(d.r for _, d in rows),
        phi_at_alpha=tuple(d.phi_at_alpha for _, d in rows),
        omega=tuple(d.omega for _, d in rows),
        lam=tuple(p.lam for p, _ in rows),
        mu=tuple(p.mu for p, _ in rows),
        alpha=tuple(p.alpha for p, _ in rows),
    )


# ------------------------------------------------------------------ case tags


class Case(enum.Enum):
    DISTINCT_NONZERO = "DistinctNonzero"
    ALL_EQUAL = "AllEqual"
    ALL_BUT_LAST_EQUAL = "AllButLastEqual"
    UNSUPPORTED = "Unsupported"


@dataclass(frozen=True)
class CaseTag:
    kind: Case
    description: str = ""

    @property
    def supported(self) -> bool:
        return self.kind is not Case.UNSUPPORTED

    def __str__(self):
        return self.kind.value + (f"({self.description})" if self.description else "")


def _same(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * max(abs(a), abs(b))


def classify_case(bases: BaseTerms, tol_base: float = DEFAULT_TOL_BASE) -> CaseTag:
    r = bases.r
    M = bases.M
    nonzero = [m for m in range(M + 1) if r[m] > 0.0]
    clashes = [(a, b) for i, a in enumerate(nonzero) for b in nonzero[i + 1:]
               if _same(r[a], r[b], tol_base)]
    if not clashes:
        return CaseTag(Case.DISTINCT_NONZERO)
    positive = all(l > 0 and u > 0 for l, u in zip(bases.lam, bases.mu))
    head_equal = all(_same(r[0], r[m], tol_base) for m in range(M))
    if positive and head_equal and _same(r[0], r[M], tol_base):
        return CaseTag(Case.ALL_EQUAL)
    if positive and head_equal and M >= 2:
        return CaseTag(Case.ALL_BUT_LAST_EQUAL)
    groups: dict[int, list[int]] = {}
    for a, b in clashes:
        groups.setdefault(a, [a]).append(b)
    listed = ", ".join("r" + "=r".join(map(str, sorted(set(g)))) for g in groups.values())
    detail = f"repeated bases {listed}"
    if not positive and head_equal:
        detail += "; repeated-base solutions need every lambda_m, mu_m > 0"
    return CaseTag(Case.UNSUPPORTED, f"Unsupported multiplicity pattern: {detail}")


# ----------------------------------------------------------------- affine exprs

Unknown = tuple[str, Hashable]  # ("x", name) or ("level", m)


def boundary_unknown(name: str) -> Unknown:
    return ("x", name)


def level_unknown(m: int) -> Unknown:
    return ("level", m)


@dataclass(frozen=True)
class AffineExpr:
    """``constant + sum(coefficients[u] * value[u])`` over boundary unknowns."""

    coefficients: Mapping[Unknown, float] = field(default_factory=dict)
    constant: float = 0.0

    @classmethod
    def unknown(cls, key: Unknown) -> "AffineExpr":
        return cls({key: 1.0})

    def __add__(self, other: "AffineExpr") -> "AffineExpr":
        coeffs = dict(self.coefficients)
        for k, v in other.coefficients.items():
            coeffs[k] = coeffs.get(k, 0.0) + v
        return AffineExpr(coeffs, self.constant + other.constant)

    def __neg__(self) -> "AffineExpr":
        return self * -1.0

    def __sub__(self, other: "AffineExpr") -> "AffineExpr":
        return self + (-other)

    def __mul__(self, scale: float) -> "AffineExpr":
        return AffineExpr({k: v * scale for k, v in self.coefficients.items()},
                          self.constant * scale)

    __rmul__ = __mul__

    def evaluate(self, values: Mapping[Unknown, float]) -> float:
        return self.constant + sum(v * values[k] for k, v in self.coefficients.items())

    def row(self, order: list[Unknown]) -> np.ndarray:
        index = {k: i for i, k in enumerate(order)}
        out = np.zeros(len(order))
        for k, v in self.coefficients.items():
            out[index[k]] += v
        return out


ZERO = AffineExpr()


@dataclass(frozen=True)
class TermExpr:
    """One solution term whose coefficient is still symbolic."""

    base: float
    degree: int
    coeff: AffineExpr


@dataclass(frozen=True)
class Coefficients:
    """``terms[m][k]`` is the term ``c_{m,k}`` of phase ``m``."""

    case: CaseTag
    terms: tuple[tuple[TermExpr, ...], ...]

    def __getitem__(self, mk: tuple[int, int]) -> AffineExpr:
        m, k = mk
        return self.terms[m][k].coeff


def _check_distinct_structure(spec: ChainSpec, bases: BaseTerms):
    for m in range(spec.M + 1):
        if bases.r[m] == 0.0 and spec.alpha[m, :, 2].sum() > 0.0:
            raise UnsupportedCase(
                f"phase {m} has lambda=0 and level-increasing phase jumps; its level-j0 "
                "mass would enter the next phase off the geometric form")


def _distinct(spec: ChainSpec, bases: BaseTerms, tol_base: float) -> list[list[TermExpr]]:
    r, phi, lam, mu, alpha = bases.r, bases.phi_at_alpha, bases.lam, bases.mu, bases.alpha
    c: list[list[AffineExpr]] = []
    for m in range(spec.M + 1):
        row: list[AffineExpr] = []
        for k in range(m):
            if r[k] == 0.0:
                row.append(ZERO)
                continue
            # inflow of the r_k component from lower phases; a jump changing the
            # level by delta reads its source one level lower/higher: r_k**(-delta)
            inflow = ZERO
            for i in range(k, m):
                w = sum(spec.jump_rate(i, m, d) * r[k] ** (-d) for d in (-1, 0, 1))
                if w:
                    inflow = inflow + c[i][k] * w
            if r[m] > 0.0:
                if _same(r[k], r[m], tol_base):
                    raise CapError(f"internal: r[{k}] == r[{m}] on the distinct-base path")
                scale = r[k] * r[m] / (lam[m] * (r[k] - r[m]) * (1.0 - phi[m] * r[k]))
            else:
                scale = 1.0 / (mu[m] * (1.0 - r[k]) + alpha[m])
            row.append(inflow * scale)
        head = ZERO
        for expr in row:
            head = head + expr
        row.append(AffineExpr.unknown(level_unknown(m)) - head)
        c.append(row)
    return [[TermExpr(r[k], 0, c[m][k]) for k in range(m + 1)] for m in range(spec.M + 1)]


def _equal_phase(spec: ChainSpec, bases: BaseTerms, m: int,
                 c: list[list[AffineExpr]]) -> list[AffineExpr]:
    """Degree coefficients of phase ``m`` when phases ``0..m`` share one base."""
    acc = [AffineExpr.unknown(level_unknown(m))] + [ZERO] * m
    kernels = {}
    for i in range(m):
        for delta in (-1, 0, 1):
            a = spec.jump_rate(i, m, delta)
            if not a:
                continue
            for u in range(i + 1):
                if u not in kernels:
                    kernels[u] = equal_base_kernels(bases.params(m), u)
                for k, w in kernels[u][delta + 1].items():
                    if delta == 1 and u == 0 and k == 0:
                        # cancelled by the source term at level j0 itself
                        continue
                    acc[k] = acc[k] + c[i][u] * (a * w)
    return acc


def _all_equal(spec: ChainSpec, bases: BaseTerms, last: int) -> list[list[AffineExpr]]:
    c: list[list[AffineExpr]] = []
    for m in range(last + 1):
        c.append(_equal_phase(spec, bases, m, c))
    return c


def _split_last(spec: ChainSpec, bases: BaseTerms, c: list[list[AffineExpr]]) -> list[AffineExpr]:
    M = spec.M
    r0 = bases.r[0]
    acc = [ZERO] * M
    kernels = {}
    for i in range(M):
        for delta in (-1, 0, 1):
            a = spec.jump_rate(i, M, delta)
            if not a:
                continue
            for u in range(i + 1):
                if u not in kernels:
                    kernels[u] = split_base_kernels(bases.params(M), r0, u)
                _, coeffs = kernels[u][delta + 1]
                for k, w in coeffs.items():
                    acc[k] = acc[k] + c[i][u] * (a * w)
    # The r_M coefficient is fixed by pi[(M, j0)] = c_{M,0} + c_{M,M}.
    acc.append(AffineExpr.unknown(level_unknown(M)) - acc[0])
    return acc


def propagate_coefficients(spec: ChainSpec, bases: BaseTerms, case: CaseTag,
                           tol_base: float = DEFAULT_TOL_BASE) -> Coefficients:
    """Express every ``c_{m,k}`` as an affine function of the boundary unknowns."""
    if not case.supported:
        raise UnsupportedCase(case.description or "Unsupported multiplicity pattern")
    if case.kind is Case.DISTINCT_NONZERO:
        _check_distinct_structure(spec, bases)
        terms = _distinct(spec, bases, tol_base)
    else:
        r0 = bases.r[0]
        last = spec.M if case.kind is Case.ALL_EQUAL else spec.M - 1
        c = _all_equal(spec, bases, last)
        terms = [[TermExpr(r0, k, expr) for k, expr in enumerate(row)] for row in c]
        if case.kind is Case.ALL_BUT_LAST_EQUAL:
            row = _split_last(spec, bases, c)
            rM = bases.r[spec.M]
            terms.append([TermExpr(r0, k, e) for k, e in enumerate(row[:-1])]
                         + [TermExpr(rM, 0, row[-1])])
    return Coefficients(case, tuple(tuple(t) for t in terms))


# -------------------------------------------------------------- boundary system


def level_mass_weight(base: float, degree: int) -> float:
    """``sum_{j >= j0} C(j - (j0+1) + degree, degree) * base**(j - j0)``."""
    if degree == 0:
        return 1.0 / (1.0 - base)
    if base == 0.0:
        return 0.0
    return negbin_tail_sum(base, degree)


@dataclass(frozen=True)
class BoundarySystem:
    matrix: np.ndarray
    rhs: np.ndarray
    unknowns: tuple[Unknown, ...]
    row_labels: tuple[str, ...]


def unknown_order(spec: ChainSpec) -> list[Unknown]:
    return ([boundary_unknown(x) for x in spec.boundary.states]
            + [level_unknown(m) for m in range(spec.M + 1)])


def first_level_expr(terms: tuple[TermExpr, ...]) -> AffineExpr:
    """``pi[(m, j0 + 1)]`` as an affine expression (every binomial factor is 1)."""
    out = ZERO
    for t in terms:
        if t.base:
            out = out + t.coeff * t.base
    return out


def assemble_boundary_system(spec: ChainSpec, bases: BaseTerms,
                             coeffs: Coefficients) -> BoundarySystem:
    """Balance rows for every level-``j0`` and boundary state, then normalisation."""
    order = unknown_order(spec)
    b = spec.boundary
    U = lambda key: AffineExpr.unknown(key)  # noqa: E731
    level1 = [first_level_expr(coeffs.terms[m]) for m in range(spec.M + 1)]
    rows, labels = [], []
    for m in range(spec.M + 1):
        out_rate = bases.lam[m]
        out_rate += sum(spec.jump_rate(m, i, d) for i in range(m + 1, spec.M + 1) for d in (0, 1))
        out_rate += sum(rate for (mm, _), rate in b.out_of_repeating.items() if mm == m)
        inflow = level1[m] * bases.mu[m]
        for (x, mm), rate in b.into_repeating.items():
            if mm == m:
                inflow = inflow + U(boundary_unknown(x)) * rate
        for i in range(m):
            inflow = inflow + U(level_unknown(i)) * spec.jump_rate(i, m, 0)
            inflow = inflow + level1[i] * spec.jump_rate(i, m, -1)
        rows.append((U(level_unknown(m)) * out_rate - inflow).row(order))
        labels.append(f"balance({m},{spec.j0})")
    for x in b.states:
        out_rate = sum(rate for (s, _), rate in b.internal.items() if s == x)
        out_rate += sum(rate for (s, _), rate in b.into_repeating.items() if s == x)
        inflow = ZERO
        for (y, t), rate in b.internal.items():
            if t == x:
                inflow = inflow + U(boundary_unknown(y)) * rate
        for (m, t), rate in b.out_of_repeating.items():
            if t == x:
                inflow = inflow + U(level_unknown(m)) * rate
        rows.append((U(boundary_unknown(x)) * out_rate - inflow).row(order))
        labels.append(f"balance({x})")
    norm = ZERO
    for x in b.states:
        norm = norm + U(boundary_unknown(x))
    for m in range(spec.M + 1):
        for t in coeffs.terms[m]:
            norm = norm + t.coeff * level_mass_weight(t.base, t.degree)
    rows.append(norm.row(order))
    labels.append("normalization")
    rhs = np.zeros(len(rows))
    rhs[-1] = 1.0
    return BoundarySystem(np.array(rows), rhs, tuple(order), tuple(labels))


# --------------------------------------------------------------------- solution


@dataclass(frozen=True)
class SolutionTerm:
    coeff: float
    base: float
    degree: int

    def value(self, n: int) -> float:
        """Contribution at ``n = j - j0`` levels above the base level."""
        return self.coeff * binom(n - 1 + self.degree, self.degree) * self.base**n


@dataclass(frozen=True)
class StationaryDistribution:
    j0: int
    boundary_probs: Mapping[str, float]
    level_j0_probs: tuple[float, ...]
    phase_solutions: tuple[tuple[SolutionTerm, ...], ...]
    case: CaseTag
    bases: BaseTerms
    diagnostics: Mapping[str, float] = field(default_factory=dict)

    @property
    def M(self) -> int:
        return len(self.level_j0_probs) - 1

    def evaluate(self, m: int, j: int) -> float:
        return evaluate(self, m, j)

    def probability(self, state) -> float:
        if isinstance(state, str):
            return self.boundary_probs[state]
        return evaluate(self, *state)

    def phase_mass(self, m: int) -> float:
        return sum(t.coeff * level_mass_weight(t.base, t.degree) for t in self.phase_solutions[m])

    def total_mass(self) -> float:
        return sum(self.boundary_probs.values()) + sum(self.phase_mass(m) for m in range(self.M + 1))


def evaluate(dist: StationaryDistribution, m: int, j: int) -> float:
    """``pi[(m, j)]`` from the closed form."""
    if not 0 <= m <= dist.M:
        raise IndexError(f"phase {m} out of range 0..{dist.M}")
    if j < dist.j0:
        raise IndexError(f"level {j} is below j0={dist.j0}")
    if j == dist.j0:
        return dist.level_j0_probs[m]
    n = j - dist.j0
    return math.fsum(t.value(n) for t in dist.phase_solutions[m])


def _clamp(name: str, value: float) -> float:
    if value >= 0.0:
        return value
    if value < -CLAMP_HARD:
        raise ResidualTooLarge(f"{name} = {value:.3e} is negative beyond rounding")
    if value < -CLAMP_SILENT:
        warnings.warn(f"clamping {name} = {value:.3e} to 0", RuntimeWarning, stacklevel=3)
    return 0.0


def solve(spec: ChainSpec, tol_base: float = DEFAULT_TOL_BASE) -> StationaryDistribution:
    """Exact stationary distribution of a class-M chain."""
    bases = compute_base_terms(spec)
    case = classify_case(bases, tol_base)
    coeffs = propagate_coefficients(spec, bases, case, tol_base)
    system = assemble_boundary_system(spec, bases, coeffs)
    keep = [i for i, lab in enumerate(system.row_labels) if lab != f"balance(0,{spec.j0})"]
    dropped = system.row_labels.index(f"balance(0,{spec.j0})")
    A, rhs = system.matrix[keep], system.rhs[keep]
    try:
        factors = linalg.lu_factor(A)
    except SingularMatrix as exc:
        raise SingularSystem(f"boundary system is singular: {exc}", math.inf) from None
    cond = linalg.condition_estimate(factors)
    x = linalg.lu_solve(A, rhs)
    residual = linalg.residual_inf_norm(A, x, rhs)
    dropped_residual = abs(float(system.matrix[dropped] @ x))
    scale = max(1.0, linalg.inf_norm(system.matrix[dropped]) * linalg.inf_norm(x))
    if dropped_residual > RESIDUAL_TOL * scale:
        raise ResidualTooLarge(
            f"omitted balance row has residual {dropped_residual:.3e} (condition {cond:.3e})")
    values = dict(zip(system.unknowns, (float(v) for v in x)))
    for key, v in values.items():
        values[key] = _clamp(f"pi{key[1]!r}", v)
    terms = tuple(
        tuple(SolutionTerm(t.coeff.evaluate(values), t.base, t.degree) for t in coeffs.terms[m])
        for m in range(spec.M + 1))
    dist = StationaryDistribution(
        j0=spec.j0,
        boundary_probs={x_: values[boundary_unknown(x_)] for x_ in spec.boundary.states},
        level_j0_probs=tuple(values[level_unknown(m)] for m in range(spec.M + 1)),
        phase_solutions=terms,
        case=case,
        bases=bases,
        diagnostics={"condition": cond, "residual": residual,
                     "dropped_row_residual": dropped_residual},
    )
    mass = dist.total_mass()
    if abs(mass - 1.0) > MASS_TOL:
        raise ResidualTooLarge(f"total mass {mass!r} differs from 1")
    return dist
