"""The Willmore sequence: repeated Backlund transforms in both directions.

``run_sequence`` walks forward (``ker A``) and backward (``im Q``) from the
input surface, re-deriving the sphere congruence of every new surface from its
samples.  It stops a direction when the relevant Hopf field vanishes
(twistor case), when the transform is a constant map (minimal case) or after
``max_steps``.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from . import backlund as bl
from . import quaternion as qt
from .mcs import (
    DegreeWarning,
    SurfaceChart,
    curvature_scale,
    degree,
    harmonicity_residual,
    willmore_energy,
)
from .tolerances import Tolerances


class NonWillmoreError(ValueError):
    """The input fails the harmonicity gate."""

    def __init__(self, residual: float, threshold: float):
        super().__init__(f"harmonicity residual {residual:.3g} exceeds the Willmore gate {threshold:.3g}")
        self.residual = residual
        self.threshold = threshold


class Kind(str, Enum):
    TWISTOR = "Twistor"
    MINIMAL = "Minimal"
    ROUND_SPHERE = "RoundSphere"
    NOT_TERMINATED = "NotTerminated"
    MAX_STEPS = "MaxSteps"


@dataclass
class Termination:
    kind: Kind
    side: str
    evidence: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "side": self.side, "evidence": dict(self.evidence)}


@dataclass
class LedgerEntry:
    index: int
    W: float
    v: int | None
    degree: float | None
    harmonicity: float
    A_norm: float
    Q_norm: float
    flags: dict = field(default_factory=dict)


@dataclass
class SequenceLedger:
    entries: list
    genus: int
    local: bool
    terminations: dict
    classification: Termination
    tolerances: dict = field(default_factory=dict)

    @property
    def degK(self) -> int:
        return 2 * self.genus - 2

    @property
    def length(self) -> int:
        return len(self.entries)

    def entry(self, index: int) -> LedgerEntry:
        for e in self.entries:
            if e.index == index:
                return e
        raise KeyError(index)

    def to_dict(self) -> dict:
        return {
            "genus": self.genus,
            "degK": self.degK,
            "local": self.local,
            "length": self.length,
            "entries": [asdict(e) for e in self.entries],
            "terminations": {k: t.to_dict() for k, t in self.terminations.items()},
            "classification": self.classification.to_dict(),
        }

    def table(self) -> str:
        head = f"{'i':>4} {'W':>14} {'v':>4} {'harm':>10} {'|A|':>10} {'|Q|':>10}"
        rows = [head]
        for e in self.entries:
            v = "-" if e.v is None else str(e.v)
            rows.append(f"{e.index:>4} {e.W:>14.8f} {v:>4} {e.harmonicity:>10.3e} {e.A_norm:>10.3e} {e.Q_norm:>10.3e}")
        return "\n".join(rows)


def _entry(index: int, s: SurfaceChart, flags=None) -> LedgerEntry:
    hd = s.hopf
    harm = harmonicity_residual(s.chart, hd, s)
    v = deg = None
    if s.chart.closed:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegreeWarning)
            d = degree(s.chart, s.S, hd)
        v, deg = d.rounded, d.deg
    return LedgerEntry(
        index,
        willmore_energy(s.chart, hd),
        v,
        deg,
        max(harm["dstarA"], harm["dstarQ"]),
        s.form_norm(hd.A),
        s.form_norm(hd.Q),
        dict(flags or {}),
    )


def willmore_gate(s: SurfaceChart, tol: Tolerances | None = None) -> float:
    """Raise :class:`NonWillmoreError` unless ``d*A`` and ``d*Q`` are below the gate."""
    tol = tol or Tolerances()
    h = harmonicity_residual(s.chart, s.hopf, s)
    res = max(h["dstarA"], h["dstarQ"])
    thr = tol.harmonicity(s.chart, curvature_scale(s))
    if res > thr:
        raise NonWillmoreError(res, thr)
    return res


def _is_zero(s: SurfaceChart, which: str, tol: Tolerances) -> bool:
    form = s.hopf.A if which == "A" else s.hopf.Q
    return s.form_norm(form) <= tol.hopf_zero(s.chart, curvature_scale(s))


def _walk(f0: SurfaceChart, direction: str, max_steps: int, tol: Tolerances, seed: int):
    """Transforms in one direction; returns (steps, termination, last_result)."""
    step = bl.backlund_forward if direction == "forward" else bl.backlund_backward
    sign = 1 if direction == "forward" else -1
    cur = f0
    steps = []
    for k in range(1, max_steps + 1):
        try:
            res = step(cur, seed=seed, tol=tol)
        except bl.HopfFieldVanishes as exc:
            return steps, Termination(Kind.TWISTOR, direction, {"at_index": sign * (k - 1), "hopf_norm": exc.norm}), None
        if res.constant:
            c = res.lines.lines
            point = c[c.shape[0] // 2, c.shape[1] // 2]
            ev = {"at_index": sign * k, "diameter": res.diameter}
            return steps, Termination(Kind.MINIMAL, direction, ev), point
        new = res.surface
        if direction == "forward":
            ident = bl.hopf_identity_residual(cur, new, "forward")
        else:
            ident = bl.hopf_identity_residual(cur, new, "backward")
        steps.append((sign * k, new, {"theorem1": ident, "parent": sign * (k - 1)}))
        cur = new
    return steps, Termination(Kind.MAX_STEPS, direction, {"steps": max_steps}), None


def run_sequence(
    f0: SurfaceChart,
    max_steps: int = 3,
    tol: Tolerances | None = None,
    seed: int = 0,
    threads: int = 1,
    gate: bool = True,
) -> SequenceLedger:
    """Build the ledger ``f_-m .. f_0 .. f_n``.

    The two directions are independent; ``threads > 1`` runs them
    concurrently with identical arithmetic, so the ledger does not depend on
    the thread count.
    """
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    tol = tol or Tolerances()
    closed = f0.chart.closed
    genus = 1 if closed else 0
    e0 = _entry(0, f0)

    if _is_zero(f0, "A", tol) and _is_zero(f0, "Q", tol):
        term = Termination(Kind.ROUND_SPHERE, "both", {"A_norm": e0.A_norm, "Q_norm": e0.Q_norm})
        return SequenceLedger([e0], genus, not closed, {"forward": term, "backward": term}, term, tol.as_dict())
    if gate:
        willmore_gate(f0, tol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            futs = [pool.submit(_walk, f0, d, max_steps, tol, seed) for d in ("forward", "backward")]
            (fw, bw) = [f.result() for f in futs]
    else:
        fw = _walk(f0, "forward", max_steps, tol, seed)
        bw = _walk(f0, "backward", max_steps, tol, seed)

    surfaces = {0: f0}
    entries = [e0]
    for steps in (fw[0], bw[0]):
        for idx, surf, flags in steps:
            surfaces[idx] = surf
            entries.append(_entry(idx, surf, flags))
    entries.sort(key=lambda e: e.index)
    terms = {"forward": fw[1], "backward": bw[1]}
    classification = classify_termination(terms, surfaces, {"forward": fw[2], "backward": bw[2]}, tol, seed)
    ledger = SequenceLedger(entries, genus, not closed, terms, classification, tol.as_dict())
    ledger.surfaces = surfaces
    return ledger


def classify_termination(terms: dict, surfaces: dict, points: dict, tol: Tolerances | None = None, seed: int = 0) -> Termination:
    """Overall classification plus the rigidity evidence of the terminated case.

    Minimal: both directions end in constant maps at the same point.
    Twistor: a vanishing Hopf field on one side; on the other side the
    transform has ``S^ = -S`` and terminates after one step.
    """
    tol = tol or Tolerances()
    kinds = {terms["forward"].kind, terms["backward"].kind}
    if Kind.MINIMAL in kinds:
        ev = {}
        if points["forward"] is not None and points["backward"] is not None:
            ev["endpoint_distance"] = float(qt.chordal_distance(points["forward"], points["backward"]))
            ev["endpoint_agree"] = ev["endpoint_distance"] < 1e-3
        side = "both" if kinds == {Kind.MINIMAL} else ("forward" if terms["forward"].kind is Kind.MINIMAL else "backward")
        if points["forward"] is not None:
            ev["point"] = [float(x) for x in np.asarray(points["forward"]).ravel()]
        return Termination(Kind.MINIMAL, side, ev)
    if Kind.TWISTOR in kinds:
        side = "forward" if terms["forward"].kind is Kind.TWISTOR else "backward"
        ev = {"length": len(surfaces)}
        other = -1 if side == "forward" else 1
        if other in surfaces:
            f0, f1 = surfaces[0], surfaces[other]
            ev["full_sphere_relation"] = bl.sphere_relation_residual(f0, f1, f1.lines(), "backward", full=True)
        if kinds == {Kind.TWISTOR}:
            side = "both"
        return Termination(Kind.TWISTOR, side, ev)
    if Kind.MAX_STEPS in kinds:
        return Termination(Kind.MAX_STEPS, "both", {})
    return Termination(Kind.NOT_TERMINATED, "both", {})


def quantization_check(ledger: SequenceLedger) -> float:
    """``max |W_i - W_{i-1} - 4 pi v_i|`` over consecutive recorded indices (torus charts)."""
    if ledger.local:
        return 0.0
    by = {e.index: e for e in ledger.entries}
    worst = 0.0
    for i, e in by.items():
        j = i - 1 if i > 0 else i + 1
        if i == 0 or j not in by:
            continue
        lo, hi = (by[j], e) if i > 0 else (e, by[j])
        # step from f_{k-1} to f_k uses the degree of f_k
        v = hi.v if hi.v is not None else 0
        worst = max(worst, abs((hi.W - lo.W) - 4 * math.pi * v))
    return worst


@dataclass
class LengthBound:
    lhs: float | None
    satisfied: bool | None
    n: int
    note: str = ""


def length_bound_check(ledger: SequenceLedger) -> LengthBound:
    """``n v + W/(4 pi) + 2 n (n + 1) deg K >= 0`` with ``n`` the realised forward length."""
    if ledger.local:
        return LengthBound(None, None, 0, "local")
    e0 = ledger.entry(0)
    n = max(e.index for e in ledger.entries)
    v = e0.v or 0
    lhs = n * v + e0.W / (4 * math.pi) + 2 * n * (n + 1) * ledger.degK
    return LengthBound(lhs, lhs >= 0, n)
