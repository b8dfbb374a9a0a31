"""Coordinate-level evaluator and counterexample search.

Assigns concrete coordinates to points, lines and circles and evaluates
ground formulas numerically.  This is the independent oracle used to
cross-check definition semantics and to vet statements before trusting a
proof attempt; it never contributes to a "proved" verdict.

Comparisons are relative: x ~ y iff |x - y| <= eps * max(1, |x|, |y|), so
predicate verdicts are stable under uniform coordinate scaling.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional

from . import logic
from .logic import (
    CIRCLE,
    LINE,
    POINT,
    REAL,
    App,
    Cmp,
    Exists,
    FalseF,
    Forall,
    Formula,
    NumLit,
    PredApp,
    Rule,
    Term,
    TrueF,
    Var,
)
from .theory import DefinitionRegistry, Theory


class NumericError(Exception):
    pass


class UnassignedName(NumericError):
    pass


class DegenerateAngle(NumericError):
    """A ray of the angle has zero length."""


class UnexpandedDefinition(NumericError):
    pass


Point = tuple[float, float]
LineCoeffs = tuple[float, float, float]  # a*x + b*y + c = 0 with a^2+b^2 = 1
CircleSpec = tuple[float, float, float]  # centre x, centre y, radius > 0


@dataclass
class Assignment:
    points: dict[str, Point] = field(default_factory=dict)
    lines: dict[str, LineCoeffs] = field(default_factory=dict)
    circles: dict[str, CircleSpec] = field(default_factory=dict)

    def point(self, name: str) -> Point:
        try:
            return self.points[name]
        except KeyError:
            raise UnassignedName(f"point {name!r} not assigned")

    def line(self, name: str) -> LineCoeffs:
        try:
            return self.lines[name]
        except KeyError:
            raise UnassignedName(f"line {name!r} not assigned")

    def circle(self, name: str) -> CircleSpec:
        try:
            return self.circles[name]
        except KeyError:
            raise UnassignedName(f"circle {name!r} not assigned")


@dataclass(frozen=True)
class EvalConfig:
    eps: float = 1e-9
    trials: int = 10000
    seed: int = 0


# ---------------------------------------------------------------------------
# Vector helpers


def _sub(p: Point, q: Point) -> Point:
    return (p[0] - q[0], p[1] - q[1])


def _dot(p: Point, q: Point) -> float:
    return p[0] * q[0] + p[1] * q[1]


def _cross(p: Point, q: Point) -> float:
    return p[0] * q[1] - p[1] * q[0]


def _norm(p: Point) -> float:
    return math.hypot(p[0], p[1])


def dist(p: Point, q: Point) -> float:
    return _norm(_sub(p, q))


def line_through(p: Point, q: Point) -> LineCoeffs:
    dx, dy = q[0] - p[0], q[1] - p[1]
    n = math.hypot(dx, dy)
    if n == 0.0:
        raise NumericError("line through coincident points")
    a, b = -dy / n, dx / n
    return (a, b, -(a * p[0] + b * p[1]))


def line_value(L: LineCoeffs, p: Point) -> float:
    return L[0] * p[0] + L[1] * p[1] + L[2]


def project_onto(L: LineCoeffs, p: Point) -> Point:
    v = line_value(L, p)
    return (p[0] - v * L[0], p[1] - v * L[1])


def circumcenter(a: Point, b: Point, c: Point) -> Optional[Point]:
    d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    if d == 0.0:
        return None
    ux = (
        (a[0] ** 2 + a[1] ** 2) * (b[1] - c[1])
        + (b[0] ** 2 + b[1] ** 2) * (c[1] - a[1])
        + (c[0] ** 2 + c[1] ** 2) * (a[1] - b[1])
    ) / d
    uy = (
        (a[0] ** 2 + a[1] ** 2) * (c[0] - b[0])
        + (b[0] ** 2 + b[1] ** 2) * (a[0] - c[0])
        + (c[0] ** 2 + c[1] ** 2) * (b[0] - a[0])
    ) / d
    return (ux, uy)


# ---------------------------------------------------------------------------
# Relative comparisons


def _scale(*values: float) -> float:
    return max(1.0, *(abs(v) for v in values))


def close(x: float, y: float, eps: float) -> bool:
    return abs(x - y) <= eps * _scale(x, y)


def _point_scale(a: Assignment) -> float:
    coords = [abs(c) for p in a.points.values() for c in p]
    coords += [abs(c) for cx, cy, r in a.circles.values() for c in (cx, cy, r)]
    return max(coords + [1.0])


# ---------------------------------------------------------------------------
# Term evaluation


def eval_term(a: Assignment, t: Term) -> float:
    if isinstance(t, NumLit):
        return float(t.value)
    if isinstance(t, Var):
        raise UnassignedName(
            f"variable {t.name!r} of sort {t.sort} has no numeric value"
        )
    if not isinstance(t, App):
        raise NumericError(f"not a term: {t!r}")
    fn = t.fn
    if fn == "length":
        p, q = (_point_arg(a, x) for x in t.args)
        return dist(p, q)
    if fn == "angle":
        p, v, q = (_point_arg(a, x) for x in t.args)
        u, w = _sub(p, v), _sub(q, v)
        nu, nw = _norm(u), _norm(w)
        if nu == 0.0 or nw == 0.0:
            raise DegenerateAngle("angle with a zero-length ray")
        cosv = max(-1.0, min(1.0, _dot(u, w) / (nu * nw)))
        return math.acos(cosv)
    if fn == "area":
        p, q, r = (_point_arg(a, x) for x in t.args)
        return abs(_cross(_sub(q, p), _sub(r, p))) / 2.0
    if fn == "rightAngle":
        return math.pi / 2.0
    if fn == "pi":
        return math.pi
    if fn == "sin":
        return math.sin(eval_term(a, t.args[0]))
    if fn == "cos":
        return math.cos(eval_term(a, t.args[0]))
    if fn == "add":
        return eval_term(a, t.args[0]) + eval_term(a, t.args[1])
    if fn == "sub":
        return eval_term(a, t.args[0]) - eval_term(a, t.args[1])
    if fn == "mul":
        return eval_term(a, t.args[0]) * eval_term(a, t.args[1])
    if fn == "div":
        denom = eval_term(a, t.args[1])
        if denom == 0.0:
            raise NumericError("division by zero")
        return eval_term(a, t.args[0]) / denom
    if fn == "neg":
        return -eval_term(a, t.args[0])
    raise NumericError(f"unknown function {fn!r}")


def _point_arg(a: Assignment, t: Term) -> Point:
    if isinstance(t, Var):
        return a.point(t.name)
    raise NumericError(f"expected a point variable, got {t!r}")


# ---------------------------------------------------------------------------
# Formula evaluation


def eval_formula(a: Assignment, f: Formula, cfg: EvalConfig) -> bool:
    eps = cfg.eps
    s = _point_scale(a)

    def off(v: float) -> bool:  # clearly nonzero relative to the figure
        return abs(v) > eps * s

    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, PredApp):
        name, args = f.pred, f.args
        if name == "onLine":
            p = a.point(args[0].name)
            return not off(line_value(a.line(args[1].name), p))
        if name == "between":
            p, q, r = (a.point(x.name) for x in args)
            d1, d2, d3 = dist(p, q), dist(q, r), dist(p, r)
            return off(d1) and off(d2) and not off(d1 + d2 - d3)
        if name == "onCircle":
            p = a.point(args[0].name)
            cx, cy, r = a.circle(args[1].name)
            return not off(dist(p, (cx, cy)) - r)
        if name == "insideCircle":
            p = a.point(args[0].name)
            cx, cy, r = a.circle(args[1].name)
            return dist(p, (cx, cy)) < r and off(dist(p, (cx, cy)) - r)
        if name == "outsideCircle":
            p = a.point(args[0].name)
            cx, cy, r = a.circle(args[1].name)
            return dist(p, (cx, cy)) > r and off(dist(p, (cx, cy)) - r)
        if name == "isCentre":
            p = a.point(args[0].name)
            cx, cy, _ = a.circle(args[1].name)
            return not off(dist(p, (cx, cy)))
        if name == "sameSide":
            L = a.line(args[2].name)
            v1 = line_value(L, a.point(args[0].name))
            v2 = line_value(L, a.point(args[1].name))
            return off(v1) and off(v2) and (v1 > 0) == (v2 > 0)
        if name == "opposingSides":
            L = a.line(args[2].name)
            v1 = line_value(L, a.point(args[0].name))
            v2 = line_value(L, a.point(args[1].name))
            return off(v1) and off(v2) and (v1 > 0) != (v2 > 0)
        if name == "intersectsLine":
            l1, l2 = a.line(args[0].name), a.line(args[1].name)
            return abs(_cross((l1[0], l1[1]), (l2[0], l2[1]))) > eps
        if name == "intersectsCircle":
            L = a.line(args[0].name)
            cx, cy, r = a.circle(args[1].name)
            return abs(line_value(L, (cx, cy))) < r and off(
                abs(line_value(L, (cx, cy))) - r
            )
        if name == "eqPoint":
            return not off(dist(a.point(args[0].name), a.point(args[1].name)))
        if name == "eqLine":
            l1, l2 = a.line(args[0].name), a.line(args[1].name)
            same = all(not off(x - y) for x, y in zip(l1, l2))
            flipped = all(not off(x + y) for x, y in zip(l1, l2))
            return same or flipped
        if name == "eqCircle":
            c1, c2 = a.circle(args[0].name), a.circle(args[1].name)
            return all(not off(x - y) for x, y in zip(c1, c2))
        raise UnexpandedDefinition(
            f"predicate {name!r} reached numeric evaluation unexpanded"
        )
    if isinstance(f, Cmp):
        x, y = eval_term(a, f.lhs), eval_term(a, f.rhs)
        if f.op == "=":
            return close(x, y, eps)
        if f.op == "<":
            return x < y and not close(x, y, eps)
        return x < y or close(x, y, eps)
    if isinstance(f, logic.Not):
        return not eval_formula(a, f.body, cfg)
    if isinstance(f, logic.And):
        return all(eval_formula(a, g, cfg) for g in f.args)
    if isinstance(f, logic.Or):
        return any(eval_formula(a, g, cfg) for g in f.args)
    if isinstance(f, logic.Implies):
        return (not eval_formula(a, f.lhs, cfg)) or eval_formula(a, f.rhs, cfg)
    if isinstance(f, logic.Iff):
        return eval_formula(a, f.lhs, cfg) == eval_formula(a, f.rhs, cfg)
    if isinstance(f, (Forall, Exists)):
        return _eval_quantifier(a, f, cfg)
    raise NumericError(f"not a formula: {f!r}")


def _eval_quantifier(a: Assignment, f, cfg: EvalConfig) -> bool:
    """Quantifiers range over the objects registered in the assignment."""
    domains = {
        POINT: list(a.points),
        LINE: list(a.lines),
        CIRCLE: list(a.circles),
    }
    want_all = isinstance(f, Forall)

    def rec(i: int, sub: dict[str, Term]) -> bool:
        if i == len(f.binders):
            body = logic.substitute(f.body, sub)
            return eval_formula(a, body, cfg)
        name, sort = f.binders[i]
        if sort not in domains:
            raise NumericError(f"cannot enumerate sort {sort}")
        values = domains[sort]
        results = (
            rec(i + 1, {**sub, name: Var(obj, sort)}) for obj in values
        )
        return all(results) if want_all else any(results)

    return rec(0, {})


# ---------------------------------------------------------------------------
# Direct definition semantics (independent of expansion)


def _d_coll(a: Assignment, eps: float, s: float, A, B, C) -> bool:
    return abs(_cross(_sub(B, A), _sub(C, A))) <= eps * s * s


def _direct(name: str):
    return _DIRECT[name]


def direct_definition(
    a: Assignment, name: str, args: tuple[str, ...], cfg: EvalConfig
) -> bool:
    """Hand-coded coordinate semantics for a shipped definition."""
    fn = _DIRECT.get(name)
    if fn is None:
        raise NumericError(f"no direct semantics for {name!r}")
    return fn(a, cfg, *args)


def _pts(a: Assignment, *names: str):
    return tuple(a.point(n) for n in names)


def _D_Coll(a, cfg, A, B, C):
    s = _point_scale(a)
    return _d_coll(a, cfg.eps, s, *_pts(a, A, B, C))


def _D_Triangle(a, cfg, A, B, C):
    return not _D_Coll(a, cfg, A, B, C)


def _D_distinctPointsOnLine(a, cfg, A, B, L):
    s = _point_scale(a)
    p, q = _pts(a, A, B)
    line = a.line(L)
    return (
        dist(p, q) > cfg.eps * s
        and abs(line_value(line, p)) <= cfg.eps * s
        and abs(line_value(line, q)) <= cfg.eps * s
    )


def _D_IsoTriangle(a, cfg, A, B, C):
    p, q, r = _pts(a, A, B, C)
    return _D_Triangle(a, cfg, A, B, C) and close(dist(p, q), dist(p, r), cfg.eps)


def _D_RightTriangle(a, cfg, A, B, C):
    p, q, r = _pts(a, A, B, C)
    s = _point_scale(a)
    return (
        _D_Triangle(a, cfg, A, B, C)
        and abs(_dot(_sub(q, p), _sub(r, p))) <= cfg.eps * s * s
    )


def _D_AcuteTriangle(a, cfg, A, B, C):
    if not _D_Triangle(a, cfg, A, B, C):
        return False
    s = _point_scale(a)
    p, q, r = _pts(a, A, B, C)
    for v, x, y in ((p, q, r), (q, p, r), (r, p, q)):
        if _dot(_sub(x, v), _sub(y, v)) <= cfg.eps * s * s:
            return False
    return True


def _D_formAcuteTriangle(a, cfg, A, B, C, AB, BC, CA):
    return (
        _D_AcuteTriangle(a, cfg, A, B, C)
        and _D_distinctPointsOnLine(a, cfg, A, B, AB)
        and _D_distinctPointsOnLine(a, cfg, B, C, BC)
        and _D_distinctPointsOnLine(a, cfg, C, A, CA)
    )


def _D_MidPoint(a, cfg, B, M, C):
    s = _point_scale(a)
    p, m, q = _pts(a, B, M, C)
    if dist(p, q) <= cfg.eps * s:
        return False
    mid = ((p[0] + q[0]) / 2, (p[1] + q[1]) / 2)
    return dist(m, mid) <= cfg.eps * s


def _D_Foot(a, cfg, A, D, L):
    s = _point_scale(a)
    p, d = _pts(a, A, D)
    line = a.line(L)
    if abs(line_value(line, p)) <= cfg.eps * s:
        return False
    return dist(d, project_onto(line, p)) <= cfg.eps * s


def _D_PerpLine(a, cfg, L, M):
    l1, l2 = a.line(L), a.line(M)
    return abs(_dot((l1[0], l1[1]), (l2[0], l2[1]))) <= cfg.eps


def _D_PerpBisector(a, cfg, A, B, L):
    s = _point_scale(a)
    p, q = _pts(a, A, B)
    if dist(p, q) <= cfg.eps * s:
        return False
    line = a.line(L)
    mid = ((p[0] + q[0]) / 2, (p[1] + q[1]) / 2)
    if abs(line_value(line, mid)) > cfg.eps * s:
        return False
    # direction of L must be perpendicular to AB
    dirv = (-line[1], line[0])
    return abs(_dot(dirv, _sub(q, p))) <= cfg.eps * s


def _D_Cyclic(a, cfg, A, B, C, D):
    pts = _pts(a, A, B, C, D)
    s = _point_scale(a)
    import itertools

    for i, j, k in itertools.combinations(range(4), 3):
        centre = circumcenter(pts[i], pts[j], pts[k])
        if centre is None:
            continue
        r = dist(centre, pts[i])
        if abs(_cross(_sub(pts[j], pts[i]), _sub(pts[k], pts[i]))) <= cfg.eps * s * s:
            continue
        return all(close(dist(centre, p), r, 1e-7) for p in pts)
    return False


def _D_Circumcentre(a, cfg, O, A, B, C):
    if not _D_Triangle(a, cfg, A, B, C):
        return False
    s = _point_scale(a)
    o = a.point(O)
    centre = circumcenter(*_pts(a, A, B, C))
    return centre is not None and dist(o, centre) <= cfg.eps * s


def _cosv(v: Point, x: Point, y: Point) -> float:
    u, w = _sub(x, v), _sub(y, v)
    return _dot(u, w) / (_norm(u) * _norm(w))


def _D_SimilarTriangles(a, cfg, A, B, C, D, E, F):
    if not (_D_Triangle(a, cfg, A, B, C) and _D_Triangle(a, cfg, D, E, F)):
        return False
    p = _pts(a, A, B, C, D, E, F)
    ab, bc, ca = dist(p[0], p[1]), dist(p[1], p[2]), dist(p[2], p[0])
    de, ef, fd = dist(p[3], p[4]), dist(p[4], p[5]), dist(p[5], p[3])
    return (
        close(ab * ef, bc * de, cfg.eps)
        and close(bc * fd, ca * ef, cfg.eps)
        and close(_cosv(p[1], p[0], p[2]), _cosv(p[4], p[3], p[5]), 1e-7)
    )


def _D_CongruentTriangles(a, cfg, A, B, C, D, E, F):
    if not (_D_Triangle(a, cfg, A, B, C) and _D_Triangle(a, cfg, D, E, F)):
        return False
    p = _pts(a, A, B, C, D, E, F)
    return (
        close(dist(p[0], p[1]), dist(p[3], p[4]), cfg.eps)
        and close(dist(p[1], p[2]), dist(p[4], p[5]), cfg.eps)
        and close(dist(p[2], p[0]), dist(p[5], p[3]), cfg.eps)
    )


def _D_formQuadrilateral(a, cfg, A, B, C, D, AB, BC, CD, DA):
    if not (
        _D_distinctPointsOnLine(a, cfg, A, B, AB)
        and _D_distinctPointsOnLine(a, cfg, B, C, BC)
        and _D_distinctPointsOnLine(a, cfg, C, D, CD)
        and _D_distinctPointsOnLine(a, cfg, D, A, DA)
    ):
        return False
    s = _point_scale(a)

    def same_side(L, x, y):
        v1, v2 = line_value(a.line(L), a.point(x)), line_value(a.line(L), a.point(y))
        return abs(v1) > cfg.eps * s and abs(v2) > cfg.eps * s and (v1 > 0) == (v2 > 0)

    return (
        same_side(AB, C, D)
        and same_side(BC, D, A)
        and same_side(CD, A, B)
        and same_side(DA, B, C)
    )


def _D_TangentLineCircleAtPoint(a, cfg, A, O, L, W):
    s = _point_scale(a)
    p, o = _pts(a, A, O)
    line = a.line(L)
    cx, cy, r = a.circle(W)
    return (
        abs(line_value(line, p)) <= cfg.eps * s
        and close(dist(p, (cx, cy)), r, cfg.eps)
        and dist(o, (cx, cy)) <= cfg.eps * s
        and close(abs(line_value(line, (cx, cy))), r, cfg.eps)
    )


def _D_CirclesIntersectAtTwoPoints(a, cfg, W1, W2, M, N):
    s = _point_scale(a)
    m, n = _pts(a, M, N)
    c1, c2 = a.circle(W1), a.circle(W2)
    if dist(m, n) <= cfg.eps * s:
        return False
    for p in (m, n):
        for cx, cy, r in (c1, c2):
            if not close(dist(p, (cx, cy)), r, cfg.eps):
                return False
    return True


def _D_TwoLinesIntersectAtPoint(a, cfg, L, M, P):
    l1, l2 = a.line(L), a.line(M)
    det = _cross((l1[0], l1[1]), (l2[0], l2[1]))
    if abs(det) <= cfg.eps:
        return False
    x = (-l1[2] * l2[1] + l2[2] * l1[1]) / det
    y = (-l1[0] * l2[2] + l2[0] * l1[2]) / det
    s = _point_scale(a)
    return dist(a.point(P), (x, y)) <= cfg.eps * s * 10


def _D_RadicalAxis(a, cfg, W1, W2, L):
    (x1, y1, r1), (x2, y2, r2) = a.circle(W1), a.circle(W2)
    line = a.line(L)
    # radical axis: 2(c2-c1).x = (|c2|^2 - r2^2) - (|c1|^2 - r1^2)
    ax, ay = 2 * (x2 - x1), 2 * (y2 - y1)
    n = math.hypot(ax, ay)
    if n == 0.0:
        return False
    c = ((x1 * x1 + y1 * y1 - r1 * r1) - (x2 * x2 + y2 * y2 - r2 * r2)) / n
    cand = (ax / n, ay / n, c)
    same = all(close(u, v, 1e-7) for u, v in zip(cand, line))
    flip = all(close(u, -v, 1e-7) for u, v in zip(cand, line))
    return same or flip


def _D_DistinctFourPoints(a, cfg, A, B, C, D):
    s = _point_scale(a)
    pts = _pts(a, A, B, C, D)
    import itertools

    return all(dist(p, q) > cfg.eps * s for p, q in itertools.combinations(pts, 2))


_DIRECT: dict[str, Callable] = {
    "Coll": _D_Coll,
    "Triangle": _D_Triangle,
    "distinctPointsOnLine": _D_distinctPointsOnLine,
    "IsoTriangle": _D_IsoTriangle,
    "RightTriangle": _D_RightTriangle,
    "AcuteTriangle": _D_AcuteTriangle,
    "formAcuteTriangle": _D_formAcuteTriangle,
    "MidPoint": _D_MidPoint,
    "Foot": _D_Foot,
    "PerpLine": _D_PerpLine,
    "PerpBisector": _D_PerpBisector,
    "Cyclic": _D_Cyclic,
    "Circumcentre": _D_Circumcentre,
    "SimilarTriangles": _D_SimilarTriangles,
    "CongruentTriangles": _D_CongruentTriangles,
    "formQuadrilateral": _D_formQuadrilateral,
    "TangentLineCircleAtPoint": _D_TangentLineCircleAtPoint,
    "CirclesIntersectAtTwoPoints": _D_CirclesIntersectAtTwoPoints,
    "TwoLinesIntersectAtPoint": _D_TwoLinesIntersectAtPoint,
    "RadicalAxis": _D_RadicalAxis,
    "DistinctFourPoints": _D_DistinctFourPoints,
}


def direct_semantics_names() -> list[str]:
    return sorted(_DIRECT)


# ---------------------------------------------------------------------------
# Hypothesis-directed sampling


def _sample_assignment(
    rule: Rule, rng: random.Random, registry: DefinitionRegistry
) -> Optional[Assignment]:
    """One constructive sampling pass keyed by hypothesis patterns.

    Points are sampled uniformly, then deterministic hypotheses (midpoints,
    feet, isosceles apexes, ...) reposition their determined point, then
    lines and circles are built from the points they must contain.  Returns
    None for a sample made degenerate by construction.
    """
    a = Assignment()
    point_names = [n for n, s in rule.params if s == POINT]
    line_names = [n for n, s in rule.params if s == LINE]
    circle_names = [n for n, s in rule.params if s == CIRCLE]
    for n in point_names:
        a.points[n] = (rng.uniform(-10, 10), rng.uniform(-10, 10))

    hyps = logic.conjuncts(rule.premise)

    def arg_names(atom: PredApp) -> list[str]:
        return [t.name for t in atom.args if isinstance(t, Var)]

    # pass 1: reposition determined points
    for h in hyps:
        if not isinstance(h, PredApp):
            continue
        ns = arg_names(h)
        if h.pred == "MidPoint":
            b, m, c = (a.points[n] for n in ns)
            a.points[ns[1]] = ((b[0] + c[0]) / 2, (b[1] + c[1]) / 2)
        elif h.pred == "between":
            p, q, r = (a.points[n] for n in ns)
            t = rng.uniform(0.2, 0.8)
            a.points[ns[1]] = (p[0] + t * (r[0] - p[0]), p[1] + t * (r[1] - p[1]))
        elif h.pred == "IsoTriangle":
            p, q, r = (a.points[n] for n in ns)
            d = dist(p, q)
            if d == 0.0:
                return None
            theta = rng.uniform(0.3, math.pi - 0.3)
            base = math.atan2(q[1] - p[1], q[0] - p[0])
            a.points[ns[2]] = (
                p[0] + d * math.cos(base + theta),
                p[1] + d * math.sin(base + theta),
            )
        elif h.pred == "RightTriangle":
            p, q, r = (a.points[n] for n in ns)
            u = _sub(q, p)
            if _norm(u) == 0.0:
                return None
            k = rng.uniform(0.3, 2.0) * (1 if rng.random() < 0.5 else -1)
            a.points[ns[2]] = (p[0] - u[1] * k, p[1] + u[0] * k)
        elif h.pred in ("AcuteTriangle", "formAcuteTriangle"):
            b = a.points[ns[1]]
            c = a.points[ns[2]]
            if dist(b, c) == 0.0:
                return None
            mid = ((b[0] + c[0]) / 2, (b[1] + c[1]) / 2)
            u = _sub(c, b)
            h_par = rng.uniform(-0.35, 0.35)
            h_perp = rng.uniform(0.6, 1.4)
            a.points[ns[0]] = (
                mid[0] + h_par * u[0] - h_perp * u[1] / 2,
                mid[1] + h_par * u[1] + h_perp * u[0] / 2,
            )
        elif h.pred == "Circumcentre":
            centre = circumcenter(*(a.points[n] for n in ns[1:]))
            if centre is None:
                return None
            a.points[ns[0]] = centre

    # pass 2: lines from their incident points
    def want_on_line(line_name: str) -> list[str]:
        out = []
        for h in hyps:
            if not isinstance(h, PredApp):
                continue
            ns = arg_names(h)
            if h.pred == "onLine" and ns[1] == line_name:
                out.append(ns[0])
            elif h.pred == "distinctPointsOnLine" and ns[2] == line_name:
                out.extend(ns[:2])
            elif h.pred == "Foot" and ns[2] == line_name:
                pass
            elif h.pred == "formQuadrilateral":
                sides = {ns[4]: ns[0:2], ns[5]: ns[1:3], ns[6]: ns[2:4], ns[7]: [ns[3], ns[0]]}
                if line_name in sides:
                    out.extend(sides[line_name])
            elif h.pred == "formAcuteTriangle":
                sides = {ns[3]: ns[0:2], ns[4]: ns[1:3], ns[5]: [ns[2], ns[0]]}
                if line_name in sides:
                    out.extend(sides[line_name])
        return out

    for ln in line_names:
        carriers = want_on_line(ln)
        uniq: list[str] = []
        for n in carriers:
            if n not in uniq:
                uniq.append(n)
        if len(uniq) >= 2:
            p, q = a.points[uniq[0]], a.points[uniq[1]]
            if dist(p, q) == 0.0:
                return None
            a.lines[ln] = line_through(p, q)
            for other in uniq[2:]:
                a.points[other] = project_onto(a.lines[ln], a.points[other])
        elif len(uniq) == 1:
            p = a.points[uniq[0]]
            q = (p[0] + rng.uniform(-5, 5), p[1] + rng.uniform(-5, 5))
            if dist(p, q) == 0.0:
                return None
            a.lines[ln] = line_through(p, q)
        else:
            p = (rng.uniform(-10, 10), rng.uniform(-10, 10))
            q = (rng.uniform(-10, 10), rng.uniform(-10, 10))
            if dist(p, q) == 0.0:
                return None
            a.lines[ln] = line_through(p, q)

    # pass 3: feet (need lines)
    for h in hyps:
        if isinstance(h, PredApp) and h.pred == "Foot":
            ns = arg_names(h)
            a.points[ns[1]] = project_onto(a.line(ns[2]), a.points[ns[0]])

    # pass 4: circles from centres and incident points
    for cn in circle_names:
        centre: Optional[Point] = None
        on: list[str] = []
        for h in hyps:
            if not isinstance(h, PredApp):
                continue
            ns = arg_names(h)
            if h.pred == "isCentre" and ns[1] == cn:
                centre = a.points[ns[0]]
            elif h.pred == "onCircle" and ns[1] == cn:
                on.append(ns[0])
            elif h.pred == "Circumcentre":
                pass
            elif h.pred == "TangentLineCircleAtPoint" and ns[3] == cn:
                centre = a.points[ns[1]]
                on.append(ns[0])
            elif h.pred == "CirclesIntersectAtTwoPoints" and ns[0] == cn:
                on.extend(ns[2:4])
            elif h.pred == "CirclesIntersectAtTwoPoints" and ns[1] == cn:
                on.extend(ns[2:4])
        if centre is None and len(on) >= 3:
            centre = circumcenter(*(a.points[n] for n in on[:3]))
            if centre is None:
                return None
        if centre is None and len(on) == 2:
            p, q = a.points[on[0]], a.points[on[1]]
            mid = ((p[0] + q[0]) / 2, (p[1] + q[1]) / 2)
            u = _sub(q, p)
            k = rng.uniform(-1.0, 1.0)
            centre = (mid[0] - u[1] * k, mid[1] + u[0] * k)
        if centre is None:
            centre = (rng.uniform(-10, 10), rng.uniform(-10, 10))
        if on:
            r = dist(centre, a.points[on[0]])
            if r == 0.0:
                return None
            for other in on[1:]:
                p = a.points[other]
                d = dist(centre, p)
                if d == 0.0:
                    return None
                a.points[other] = (
                    centre[0] + (p[0] - centre[0]) * r / d,
                    centre[1] + (p[1] - centre[1]) * r / d,
                )
        else:
            r = rng.uniform(0.5, 8.0)
        a.circles[cn] = (centre[0], centre[1], r)

    # tangency: slide the line to touch the circle at the tangent point
    for h in hyps:
        if isinstance(h, PredApp) and h.pred == "TangentLineCircleAtPoint":
            ns = arg_names(h)
            cx, cy, r = a.circle(ns[3])
            p = a.points[ns[0]]
            d = dist((cx, cy), p)
            if d == 0.0:
                return None
            p = (cx + (p[0] - cx) * r / d, cy + (p[1] - cy) * r / d)
            a.points[ns[0]] = p
            n = ((p[0] - cx) / r, (p[1] - cy) / r)
            a.lines[ns[2]] = (n[0], n[1], -(n[0] * p[0] + n[1] * p[1]))

    return a


def enrich_assignment(a: Assignment) -> Assignment:
    """Add derived candidate witnesses (midpoints, pair lines, circumcircles,
    circumcentres) so existential goals can be checked over the assignment."""
    out = Assignment(dict(a.points), dict(a.lines), dict(a.circles))
    names = list(a.points)
    import itertools

    for p, q in itertools.combinations(names, 2):
        pp, qq = a.points[p], a.points[q]
        if dist(pp, qq) == 0.0:
            continue
        out.points.setdefault(f"mid<{p}{q}>", ((pp[0] + qq[0]) / 2, (pp[1] + qq[1]) / 2))
        out.lines.setdefault(f"ln<{p}{q}>", line_through(pp, qq))
    for p, q, r in itertools.combinations(names, 3):
        centre = circumcenter(a.points[p], a.points[q], a.points[r])
        if centre is None:
            continue
        out.points.setdefault(f"cc<{p}{q}{r}>", centre)
        out.circles.setdefault(
            f"cw<{p}{q}{r}>", (centre[0], centre[1], dist(centre, a.points[p]))
        )
    return out


@dataclass
class SearchResult:
    witness: Optional[Assignment]
    trials: int
    hypothesis_hits: int
    vacuous: bool


def search_counterexample(
    statement: Rule,
    cfg: EvalConfig,
    theory: Theory,
) -> SearchResult:
    """Seeded random search for an assignment satisfying the hypotheses but
    violating the goal.  Returns a witness assignment or None; a run whose
    hypotheses were never satisfied is flagged vacuous."""
    rng = random.Random(cfg.seed)
    registry = theory.registry
    premise = registry.expand(statement.premise)
    goal = registry.expand(statement.conclusion)
    hits = 0
    for trial in range(cfg.trials):
        a = _sample_assignment(statement, rng, registry)
        if a is None:
            continue
        try:
            ok = eval_formula(a, premise, cfg)
        except NumericError:
            continue
        if not ok:
            continue
        hits += 1
        try:
            holds = eval_formula(enrich_assignment(a), goal, cfg)
        except NumericError:
            continue
        if not holds:
            return SearchResult(a, trial + 1, hits, False)
    return SearchResult(None, cfg.trials, hits, hits == 0)
