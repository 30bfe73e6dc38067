"""Class-M chain specifications: types, JSON I/O, validation, truncated generators.

A chain has a finite boundary (non-repeating) set of named states and a
repeating portion of ``M + 1`` phases by levels ``j >= j0``.  Within a phase
the level moves up at rate ``lambda_m`` and down at rate ``mu_m``; between
phases the chain may only move to a higher phase, changing level by at most
one (a :class:`PhaseJump`).
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Union

import numpy as np

from .errors import SpecError, StateCapExceeded

DEFAULT_STATE_CAP = 2_000_000

State = Union[str, tuple[int, int]]


def _check_rate(value, where: str, *, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"expected a number, got {value!r}", where)
    value = float(value)
    if not math.isfinite(value):
        raise SpecError("rate must be finite", where)
    if positive and value <= 0.0:
        raise SpecError(f"rate must be positive, got {value}", where)
    if value < 0.0:
        raise SpecError(f"rate must be nonnegative, got {value}", where)
    return value


def _check_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecError(f"expected an integer, got {value!r}", where)
    return value


@dataclass(frozen=True)
class PhaseRates:
    """Within-phase level-up (``lam``) and level-down (``mu``) rates."""

    lam: float
    mu: float

    def __post_init__(self):
        object.__setattr__(self, "lam", _check_rate(self.lam, "lambda"))
        object.__setattr__(self, "mu", _check_rate(self.mu, "mu"))


@dataclass(frozen=True)
class PhaseJump:
    """Transition ``(from_phase, j) -> (to_phase, j + delta_level)``."""

    from_phase: int
    to_phase: int
    delta_level: int
    rate: float

    def __post_init__(self):
        _check_int(self.from_phase, "from")
        _check_int(self.to_phase, "to")
        _check_int(self.delta_level, "delta")
        object.__setattr__(self, "rate", _check_rate(self.rate, "rate", positive=True))
        if self.from_phase < 0 or self.to_phase < 0:
            raise SpecError("phase indices must be nonnegative", "jump")
        if self.to_phase <= self.from_phase:
            raise SpecError(
                f"unidirectional violated: jump {self.from_phase}->{self.to_phase} "
                "must go to a strictly higher phase",
                "jump",
            )
        if self.delta_level not in (-1, 0, 1):
            raise SpecError(
                f"skip-free violated: delta={self.delta_level} not in {{-1, 0, 1}}", "jump"
            )


@dataclass(frozen=True)
class BoundarySpec:
    """Finite non-repeating portion and its coupling to level ``j0``.

    ``internal`` maps ``(x, y)`` to a rate, ``into_repeating`` maps
    ``(x, m)`` (target ``(m, j0)``) and ``out_of_repeating`` maps ``(m, x)``
    (source ``(m, j0)``).
    """

    states: tuple[str, ...] = ()
    internal: Mapping[tuple[str, str], float] = field(default_factory=dict)
    into_repeating: Mapping[tuple[str, int], float] = field(default_factory=dict)
    out_of_repeating: Mapping[tuple[int, str], float] = field(default_factory=dict)

    def __post_init__(self):
        states = tuple(self.states)
        object.__setattr__(self, "states", states)
        if len(set(states)) != len(states):
            raise SpecError("duplicate state names", "boundary.states")
        for name in states:
            if not isinstance(name, str) or not name:
                raise SpecError(f"state names must be nonempty strings, got {name!r}",
                                "boundary.states")
        known = set(states)
        for (x, y), rate in self.internal.items():
            where = f"boundary.internal[{x}->{y}]"
            if x not in known or y not in known:
                raise SpecError("unknown boundary state", where)
            if x == y:
                raise SpecError("self-loops are not allowed", where)
            _check_rate(rate, where, positive=True)
        for (x, m), rate in self.into_repeating.items():
            where = f"boundary.into_repeating[{x}->phase {m}]"
            if x not in known:
                raise SpecError("unknown boundary state", where)
            _check_int(m, where)
            _check_rate(rate, where, positive=True)
        for (m, x), rate in self.out_of_repeating.items():
            where = f"boundary.out_of_repeating[phase {m}->{x}]"
            if x not in known:
                raise SpecError("unknown boundary state", where)
            _check_int(m, where)
            _check_rate(rate, where, positive=True)


@dataclass(frozen=True)
class ChainSpec:
    """Full description of a class-M chain."""

    j0: int
    phases: tuple[PhaseRates, ...]
    jumps: tuple[PhaseJump, ...] = ()
    boundary: BoundarySpec = field(default_factory=BoundarySpec)

    def __post_init__(self):
        _check_int(self.j0, "j0")
        if self.j0 < 0:
            raise SpecError("must be a nonnegative integer", "j0")
        object.__setattr__(self, "phases", tuple(self.phases))
        object.__setattr__(self, "jumps", tuple(self.jumps))
        if not self.phases:
            raise SpecError("at least one phase is required", "phases")
        n = len(self.phases)
        seen = set()
        for idx, jump in enumerate(self.jumps):
            if jump.to_phase >= n:
                raise SpecError(f"to={jump.to_phase} exceeds last phase {n - 1}",
                                f"jumps[{idx}]")
            key = (jump.from_phase, jump.to_phase, jump.delta_level)
            if key in seen:
                raise SpecError(f"duplicate jump {key}", f"jumps[{idx}]")
            seen.add(key)
        for (_, m) in self.boundary.into_repeating:
            if not 0 <= m < n:
                raise SpecError(f"phase {m} out of range", "boundary.into_repeating")
        for (m, _) in self.boundary.out_of_repeating:
            if not 0 <= m < n:
                raise SpecError(f"phase {m} out of range", "boundary.out_of_repeating")

    @property
    def M(self) -> int:
        return len(self.phases) - 1

    @property
    def lam(self) -> np.ndarray:
        return np.array([p.lam for p in self.phases])

    @property
    def mu(self) -> np.ndarray:
        return np.array([p.mu for p in self.phases])

    @cached_property
    def alpha(self) -> np.ndarray:
        """``alpha[m, i, delta + 1]``: rate from phase ``m`` to ``i`` with level change ``delta``."""
        a = np.zeros((len(self.phases), len(self.phases), 3))
        for jump in self.jumps:
            a[jump.from_phase, jump.to_phase, jump.delta_level + 1] = jump.rate
        a.setflags(write=False)
        return a

    def jump_rate(self, m: int, i: int, delta: int) -> float:
        return float(self.alpha[m, i, delta + 1])


def total_jump_rate(spec: ChainSpec, m: int) -> float:
    """Total rate of leaving phase ``m`` for higher phases (from levels above ``j0``)."""
    if not 0 <= m <= spec.M:
        raise IndexError(f"phase {m} out of range 0..{spec.M}")
    return float(spec.alpha[m].sum())


# --------------------------------------------------------------------------- JSON


def spec_to_dict(spec: ChainSpec) -> dict:
    b = spec.boundary
    return {
        "j0": spec.j0,
        "phases": [{"lambda": p.lam, "mu": p.mu} for p in spec.phases],
        "jumps": [
            {"from": j.from_phase, "to": j.to_phase, "delta": j.delta_level, "rate": j.rate}
            for j in spec.jumps
        ],
        "boundary": {
            "states": list(b.states),
            "internal": [{"from": x, "to": y, "rate": r} for (x, y), r in b.internal.items()],
            "into_repeating": [
                {"from": x, "phase": m, "rate": r} for (x, m), r in b.into_repeating.items()
            ],
            "out_of_repeating": [
                {"phase": m, "to": x, "rate": r} for (m, x), r in b.out_of_repeating.items()
            ],
        },
    }


def serialize_spec(spec: ChainSpec, indent: int | None = 2) -> str:
    return json.dumps(spec_to_dict(spec), indent=indent)


def _expect_keys(obj, where: str, required: Iterable[str], optional: Iterable[str] = ()):
    if not isinstance(obj, dict):
        raise SpecError(f"expected an object, got {type(obj).__name__}", where)
    required = set(required)
    missing = required - obj.keys()
    if missing:
        raise SpecError(f"missing field(s) {sorted(missing)}", where)
    unknown = obj.keys() - required - set(optional)
    if unknown:
        raise SpecError(f"unknown field(s) {sorted(unknown)}", where)


def _expect_list(obj, where: str) -> list:
    if not isinstance(obj, list):
        raise SpecError(f"expected an array, got {type(obj).__name__}", where)
    return obj


def spec_from_dict(doc) -> ChainSpec:
    _expect_keys(doc, "$", ["j0", "phases"], ["jumps", "boundary"])
    phases = []
    for m, ph in enumerate(_expect_list(doc["phases"], "phases")):
        where = f"phases[{m}]"
        _expect_keys(ph, where, ["lambda", "mu"])
        try:
            phases.append(PhaseRates(ph["lambda"], ph["mu"]))
        except SpecError as exc:
            raise SpecError(exc.message, where) from None
    jumps = []
    for idx, jp in enumerate(_expect_list(doc.get("jumps", []), "jumps")):
        where = f"jumps[{idx}]"
        _expect_keys(jp, where, ["from", "to", "delta", "rate"])
        try:
            jumps.append(PhaseJump(jp["from"], jp["to"], jp["delta"], jp["rate"]))
        except SpecError as exc:
            raise SpecError(exc.message, where) from None

    bdoc = doc.get("boundary", {})
    _expect_keys(bdoc, "boundary", [], ["states", "internal", "into_repeating", "out_of_repeating"])

    def collect(name, keys, make_key):
        out = {}
        for idx, item in enumerate(_expect_list(bdoc.get(name, []), f"boundary.{name}")):
            where = f"boundary.{name}[{idx}]"
            _expect_keys(item, where, keys)
            key = make_key(item)
            if key in out:
                raise SpecError(f"duplicate transition {key}", where)
            out[key] = _check_rate(item["rate"], where, positive=True)
        return out

    boundary = BoundarySpec(
        states=tuple(_expect_list(bdoc.get("states", []), "boundary.states")),
        internal=collect("internal", ["from", "to", "rate"], lambda d: (d["from"], d["to"])),
        into_repeating=collect("into_repeating", ["from", "phase", "rate"],
                               lambda d: (d["from"], d["phase"])),
        out_of_repeating=collect("out_of_repeating", ["phase", "to", "rate"],
                                 lambda d: (d["phase"], d["to"])),
    )
    return ChainSpec(j0=doc["j0"], phases=tuple(phases), jumps=tuple(jumps), boundary=boundary)


def parse_spec(text: str) -> ChainSpec:
    """Parse the JSON chain-spec format; raises :class:`SpecError` with a location."""
    if not text or not text.strip():
        raise SpecError("empty document", "$")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
                        "$") from None
    return spec_from_dict(doc)


def load_spec(path) -> ChainSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())


# --------------------------------------------------------------------- validation


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" | "warning"
    code: str
    message: str

    def __str__(self):
        return f"{self.severity.upper()} [{self.code}] {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def __str__(self):
        return "\n".join(str(i) for i in self.issues) or "OK"


def _transitions(spec: ChainSpec, levels: range, clip: int | None = None):
    """Yield ``(src, dst, rate)`` for boundary states and the given source levels.

    Targets above ``clip`` are mapped to ``clip`` when given, otherwise dropped.
    """
    b = spec.boundary
    j0 = spec.j0
    for (x, y), rate in b.internal.items():
        yield x, y, rate
    for (x, m), rate in b.into_repeating.items():
        yield x, (m, j0), rate
    for (m, x), rate in b.out_of_repeating.items():
        yield (m, j0), x, rate
    top = levels[-1]
    for j in levels:
        for m, ph in enumerate(spec.phases):
            targets = []
            if ph.lam > 0:
                targets.append((m, j + 1, ph.lam))
            if ph.mu > 0 and j > j0:
                targets.append((m, j - 1, ph.mu))
            for i in range(m + 1, spec.M + 1):
                for delta in (-1, 0, 1):
                    rate = spec.jump_rate(m, i, delta)
                    if rate > 0 and not (delta == -1 and j == j0):
                        targets.append((i, j + delta, rate))
            for i, jj, rate in targets:
                if jj > top:
                    if clip is None:
                        continue
                    jj = clip
                yield (m, j), (i, jj), rate


def _reachable(adj: dict, start) -> set:
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in adj.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def validate_spec(spec: ChainSpec) -> ValidationReport:
    """Check the structural conditions implied by ergodicity.

    Errors are definite violations; warnings flag conditions that the
    structural checks cannot settle (full ergodicity is assumed, not proven).
    """
    issues: list[Issue] = []
    err = lambda code, msg: issues.append(Issue("error", code, msg))  # noqa: E731
    warn = lambda code, msg: issues.append(Issue("warning", code, msg))  # noqa: E731

    M = spec.M
    for idx, jump in enumerate(spec.jumps):
        if not (0 <= jump.from_phase < jump.to_phase <= M):
            err("malformed-jump", f"jumps[{idx}] {jump.from_phase}->{jump.to_phase} out of range")
        if jump.delta_level not in (-1, 0, 1):
            err("malformed-jump", f"jumps[{idx}] skip-free violated (delta={jump.delta_level})")

    for m, ph in enumerate(spec.phases):
        alpha = total_jump_rate(spec, m)
        if m == M:
            if ph.lam >= ph.mu:
                err("unstable-final-phase",
                    f"unstable final phase: phase {M} has lambda={ph.lam} >= mu={ph.mu} "
                    "and no way out of the phase")
        elif ph.lam >= ph.mu and alpha == 0.0:
            err("unstable-phase",
                f"phase {m} has lambda={ph.lam} >= mu={ph.mu} but no phase jumps")
        if ph.lam == 0.0:
            fed = any(spec.alpha[i, m].sum() > 0 for i in range(m))
            if not fed:
                err("unreachable-phase",
                    f"phase {m} has lambda=0 and no jump from a lower phase enters it")

    # Exact quotient of the infinite chain: levels >= j0+2 collapse onto j0+2,
    # and level j0+3 stands in for every deeper level.
    j0 = spec.j0
    nodes: set = set(spec.boundary.states)
    nodes.update((m, j) for m in range(M + 1) for j in range(j0, j0 + 3))
    adj: dict = {n: set() for n in nodes}
    radj: dict = {n: set() for n in nodes}
    clip = lambda s: s if isinstance(s, str) else (s[0], min(s[1], j0 + 2))  # noqa: E731
    for src, dst, _ in _transitions(spec, range(j0, j0 + 4), clip=None):
        src, dst = clip(src), clip(dst)
        if src != dst:
            adj[src].add(dst)
            radj[dst].add(src)

    for x in spec.boundary.states:
        if not adj[x]:
            err("boundary-absorbing", f"boundary state {x!r} has no outgoing transitions")
        if not radj[x]:
            err("boundary-unreachable", f"boundary state {x!r} has no incoming transitions")

    if not any(isinstance(i, Issue) and i.code.startswith("boundary") for i in issues):
        anchor = (0, j0)
        fwd = _reachable(adj, anchor)
        bwd = _reachable(radj, anchor)
        for x in spec.boundary.states:
            if x not in fwd:
                err("boundary-unreachable",
                    f"boundary state {x!r} cannot be reached from the repeating portion")
            elif x not in bwd:
                err("boundary-absorbing",
                    f"boundary state {x!r} cannot return to the repeating portion")
        stuck = sorted(n for n in nodes if not isinstance(n, str) and (n not in fwd or n not in bwd))
        if stuck:
            phases = sorted({m for m, _ in stuck})
            warn("not-irreducible",
                 f"states in phase(s) {phases} are not mutually reachable with (0, j0); "
                 "ergodicity cannot be confirmed")
    return ValidationReport(tuple(issues))


# ------------------------------------------------------------ truncated generator


@dataclass(frozen=True)
class TruncatedGenerator:
    matrix: np.ndarray
    states: tuple[State, ...]
    j_max: int

    @cached_property
    def index(self) -> dict:
        return {s: k for k, s in enumerate(self.states)}


def truncated_state_count(spec: ChainSpec, j_max: int) -> int:
    return (spec.M + 1) * (j_max - spec.j0 + 1) + len(spec.boundary.states)


def build_truncated_generator(spec: ChainSpec, j_max: int,
                              state_cap: int = DEFAULT_STATE_CAP) -> TruncatedGenerator:
    """Generator restricted to the boundary plus levels ``j0..j_max``.

    Level-increasing transitions out of ``j_max`` are dropped, so every row
    still sums to zero.
    """
    if j_max < spec.j0 + 2:
        raise ValueError(f"j_max={j_max} must be at least j0 + 2 = {spec.j0 + 2}")
    n = truncated_state_count(spec, j_max)
    if n > state_cap:
        raise StateCapExceeded(f"{n} states exceeds the cap of {state_cap}")
    states: list[State] = list(spec.boundary.states)
    states += [(m, j) for j in range(spec.j0, j_max + 1) for m in range(spec.M + 1)]
    index = {s: k for k, s in enumerate(states)}
    Q = np.zeros((n, n))
    for src, dst, rate in _transitions(spec, range(spec.j0, j_max + 1)):
        Q[index[src], index[dst]] += rate
    np.fill_diagonal(Q, 0.0)
    Q[np.diag_indices(n)] = -Q.sum(axis=1)
    return TruncatedGenerator(Q, tuple(states), j_max)
