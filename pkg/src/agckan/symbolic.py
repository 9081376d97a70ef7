"""Symbolic extraction: fit each learned edge to a primitive library and
compose a closed-form expression for the network logit.

Each active edge's sampled (input, output) pairs are fitted to
``c * f(a*x + b) + d`` for every library primitive f; the best R-squared
wins.  Guards keep every primitive total: log uses log(|u| + 1e-8), sqrt
uses sqrt(|u|); tan is evaluated directly and flagged near poles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ExpressionEvaluationError, InvalidArgumentError, SchemaError
from .features import FEATURE_DESCRIPTIONS
from .kan import KanNetwork, _forward_cached
from .splines import SplineGrid  # noqa: F401  (checkpoint round-trips reuse it)

SYMBOLIC_VERSION = 1

LOG_GUARD = 1e-8
TAN_POLE_TOL = 1e-6

A_RANGE = (-10.0, 10.0)
GRID_POINTS = 41
REFINE_PASSES = 2


@dataclass(frozen=True)
class Primitive:
    name: str
    func: callable
    template: str  # format string over {u}

    def render_call(self, u):
        return self.template.format(u=u)


PRIMITIVES = (
    Primitive("x", lambda u: u, "({u})"),
    Primitive("x^2", lambda u: u * u, "({u})^2"),
    Primitive("x^3", lambda u: u ** 3, "({u})^3"),
    Primitive("x^4", lambda u: u ** 4, "({u})^4"),
    Primitive("exp", np.exp, "exp({u})"),
    Primitive("log", lambda u: np.log(np.abs(u) + LOG_GUARD), "log(|{u}| + 1e-8)"),
    Primitive("sqrt", lambda u: np.sqrt(np.abs(u)), "sqrt(|{u}|)"),
    Primitive("tanh", np.tanh, "tanh({u})"),
    Primitive("sin", np.sin, "sin({u})"),
    Primitive("tan", np.tan, "tan({u})"),
    Primitive("abs", np.abs, "abs({u})"),
)

_PRIM_BY_NAME = {p.name: p for p in PRIMITIVES}


@dataclass
class FittedEdge:
    primitive: str
    a: float
    b: float
    c: float
    d: float
    r2: float

    def __call__(self, x):
        f = _PRIM_BY_NAME[self.primitive].func
        return self.c * f(self.a * np.asarray(x, dtype=np.float64) + self.b) + self.d

    def to_dict(self):
        return {"primitive": self.primitive, "a": self.a, "b": self.b,
                "c": self.c, "d": self.d, "r2": self.r2}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _affine_grid_fit(xs, ys, func, a_vals, b_vals):
    """Best (a, b, c, d, r2) over the candidate (a, b) grid; c, d closed form."""
    u = a_vals[:, None, None] * xs[None, None, :] + b_vals[None, :, None]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        t = func(u)
        ym = ys.mean()
        yvar = float(((ys - ym) ** 2).mean())
        tm = t.mean(axis=2)
        cov = (t * ys[None, None, :]).mean(axis=2) - tm * ym
        var = (t * t).mean(axis=2) - tm * tm
        ok = np.isfinite(tm) & np.isfinite(cov) & np.isfinite(var) & (var > 1e-14)
        c = np.where(ok, cov / np.where(ok, var, 1.0), 0.0)
        # Evaluate the residual directly: the closed form yvar - c*cov
        # cancels catastrophically when |c| is huge and can report R^2 > 1,
        # letting a garbage candidate outrank an exact fit.
        resid = (ys - ym)[None, None, :] - c[:, :, None] * (t - tm[:, :, None])
        ssres = np.mean(resid * resid, axis=2)
        r2 = np.where(ok & np.isfinite(ssres), 1.0 - ssres / yvar, -np.inf)
    # Among (a, b) candidates tying on R^2 (within 1e-9), prefer the one
    # closest to the canonical affine identity (a=1, b=0).
    tied = r2 >= np.max(r2) - 1e-9
    penalty = (a_vals[:, None] - 1.0) ** 2 + b_vals[None, :] ** 2
    idx = int(np.argmin(np.where(tied, penalty, np.inf)))
    ia, ib = divmod(idx, len(b_vals))
    a, b = float(a_vals[ia]), float(b_vals[ib])
    cc = float(c[ia, ib])
    return a, b, cc, float(ym - cc * tm[ia, ib]), float(r2[ia, ib])


def fit_primitive(xs, ys, primitive) -> FittedEdge:
    """Fit c*f(a*x + b) + d by coarse-to-fine grid search over (a, b).

    primitive may be a Primitive or its library name.  Degenerate targets
    (variance < 1e-12) get the constant fit c=0, d=mean, R^2=1.
    """
    prim = primitive if isinstance(primitive, Primitive) else _PRIM_BY_NAME[primitive]
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.size != ys.size or xs.size < 10:
        raise InvalidArgumentError("need at least 10 matching sample pairs")
    if float(np.var(ys)) < 1e-12:
        return FittedEdge(prim.name, a=1.0, b=0.0, c=0.0, d=float(ys.mean()), r2=1.0)
    lo, hi = A_RANGE
    pitch = (hi - lo) / (GRID_POINTS - 1)
    a_vals = np.linspace(lo, hi, GRID_POINTS)
    b_vals = np.linspace(lo, hi, GRID_POINTS)
    best = _affine_grid_fit(xs, ys, prim.func, a_vals, b_vals)
    for _ in range(REFINE_PASSES):
        a0, b0 = best[0], best[1]
        a_vals = np.linspace(a0 - pitch, a0 + pitch, GRID_POINTS)
        b_vals = np.linspace(b0 - pitch, b0 + pitch, GRID_POINTS)
        cand = _affine_grid_fit(xs, ys, prim.func, a_vals, b_vals)
        if cand[4] > best[4]:
            best = cand
        pitch = 2.0 * pitch / (GRID_POINTS - 1)
    a, b, c, d, r2 = best
    return FittedEdge(prim.name, a=a, b=b, c=c, d=d, r2=r2)


# ---------------------------------------------------------------------------
# Expression AST

@dataclass
class Node:
    node_id: int


@dataclass
class VarNode(Node):
    index: int  # 0-based feature index


@dataclass
class SumNode(Node):
    children: list


@dataclass
class PrimNode(Node):
    fit: FittedEdge
    child: Node


def _eval_node(node, fv):
    if isinstance(node, VarNode):
        return float(fv[node.index])
    if isinstance(node, SumNode):
        return sum(_eval_node(ch, fv) for ch in node.children)
    if isinstance(node, PrimNode):
        u = node.fit.a * _eval_node(node.child, fv) + node.fit.b
        if node.fit.primitive == "tan" and abs(np.cos(u)) < TAN_POLE_TOL:
            raise ExpressionEvaluationError(node.node_id, f"tan pole near node {node.node_id}")
        with np.errstate(over="ignore", invalid="ignore"):
            v = node.fit.c * _PRIM_BY_NAME[node.fit.primitive].func(u) + node.fit.d
        if not np.isfinite(v):
            raise ExpressionEvaluationError(node.node_id)
        return float(v)
    raise InvalidArgumentError(f"unknown AST node {node!r}")


@dataclass
class SymbolicModel:
    widths: list
    edges: dict                 # (layer, i, j) -> FittedEdge, active edges only
    expression: Node = None
    standardizer: object = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.expression is None:
            self.expression = _compose_ast(self.widths, self.edges)

    def surviving_inputs(self):
        return sorted({i for (t, i, _j) in self.edges if t == 0})

    def to_dict(self):
        return {"format": "agckan-symbolic", "version": SYMBOLIC_VERSION,
                "widths": list(self.widths),
                "edges": [{"layer": t, "i": i, "j": j, "fit": fe.to_dict()}
                          for (t, i, j), fe in sorted(self.edges.items())],
                "standardizer": self.standardizer.to_dict() if self.standardizer else None,
                "metadata": self.metadata}

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "agckan-symbolic":
            raise SchemaError("not an agckan symbolic model file")
        if d.get("version") != SYMBOLIC_VERSION:
            raise SchemaError(f"unsupported symbolic model version {d.get('version')}")
        edges = {(e["layer"], e["i"], e["j"]): FittedEdge.from_dict(e["fit"])
                 for e in d["edges"]}
        std = None
        if d.get("standardizer"):
            from .features import Standardizer
            std = Standardizer.from_dict(d["standardizer"])
        return cls(widths=d["widths"], edges=edges, standardizer=std,
                   metadata=d.get("metadata", {}))

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _compose_ast(widths, edges):
    counter = [0]

    def nid():
        counter[0] += 1
        return counter[0]

    values = [VarNode(nid(), i) for i in range(widths[0])]
    for t in range(len(widths) - 1):
        nxt = []
        for j in range(widths[t + 1]):
            terms = [PrimNode(nid(), edges[(t, i, j)], values[i])
                     for i in range(widths[t]) if (t, i, j) in edges and values[i] is not None]
            nxt.append(SumNode(nid(), terms) if terms else None)
        values = nxt
    root = values[0]
    return root if root is not None else SumNode(nid(), [])


def symbolify(net: KanNetwork, batch, lib=PRIMITIVES, seed: int = 0,
              max_points: int = 1000) -> SymbolicModel:
    """Fit every active edge of net to the library and compose the expression.

    batch provides the per-edge input samples (standardized features); up to
    max_points pairs per edge are used, subsampled deterministically.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.shape[0] == 0:
        raise InvalidArgumentError("batch must be non-empty")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x51b]))
    _, caches = _forward_cached(net, x)
    fitted = {}
    for t, layer in enumerate(net.layers):
        xin = caches[t]["inputs"]
        if xin.shape[0] > max_points:
            pick = rng.choice(xin.shape[0], size=max_points, replace=False)
            pick.sort()
        else:
            pick = slice(None)
        for i in range(layer.n_in):
            xs = xin[pick, i]
            for j in range(layer.n_out):
                e = layer.edges[i][j]
                if not e.active:
                    continue
                ys = np.asarray(e(xs))
                cands = [fit_primitive(xs, ys, prim) for prim in lib]
                best = max(enumerate(cands), key=lambda kv: (kv[1].r2, -kv[0]))[1]
                # Tie-break within 1e-9 toward the earliest library entry.
                for cand in cands:
                    if cand.r2 >= best.r2 - 1e-9:
                        best = cand
                        break
                fitted[(t, i, j)] = best
    return SymbolicModel(widths=net.widths, edges=fitted,
                         standardizer=net.standardizer,
                         metadata={"seed": seed, "n_points": int(x.shape[0])})


def _layered_eval(widths, edges, params, x):
    """Vectorized ξ(x) over a batch for the given flat (a,b,c,d) params.

    params holds 4 values per edge in sorted-key order.
    """
    keys = sorted(edges)
    acts = [x[:, i] for i in range(widths[0])]
    for t in range(len(widths) - 1):
        nxt = [np.zeros(x.shape[0]) for _ in range(widths[t + 1])]
        for k, key in enumerate(keys):
            lt, i, j = key
            if lt != t:
                continue
            a, b, c, d = params[4 * k:4 * k + 4]
            f = _PRIM_BY_NAME[edges[key].primitive].func
            nxt[j] = nxt[j] + c * f(a * acts[i] + b) + d
        acts = nxt
    return acts[0]


def polish(model: SymbolicModel, x, target_logits, max_iter: int = 500) -> SymbolicModel:
    """Jointly refine all edge affine parameters (a, b, c, d) so the composed
    expression matches the target logits in least squares.

    Primitive choices and topology are frozen; only the affine wrappers move.
    Per-edge fitting is local and its errors compound through composition —
    this global pass removes that systematic drift.  Returns a new model;
    per-edge R² records keep describing the pre-polish local fits.
    """
    from scipy.optimize import minimize

    x = np.asarray(x, dtype=np.float64)
    target = np.asarray(target_logits, dtype=np.float64)
    if x.shape[0] == 0 or x.shape[0] != target.shape[0]:
        raise InvalidArgumentError("batch and target logits must match and be non-empty")
    keys = sorted(model.edges)
    p0 = np.concatenate([[model.edges[k].a, model.edges[k].b,
                          model.edges[k].c, model.edges[k].d] for k in keys])

    def _sigmoid(z):
        ez = np.exp(-np.abs(z))
        return np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))

    # Match probabilities, not raw logits: squared logit error is dominated
    # by confidently-classified points, while accuracy is decided near the
    # boundary where sigmoid differences are largest.
    target_p = _sigmoid(target)

    def objective(p):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            logits = _layered_eval(model.widths, model.edges, p, x)
            bad = ~np.isfinite(logits)
            if bad.any():
                logits = np.where(bad, 0.0, logits)
                return float(np.mean((_sigmoid(logits) - target_p) ** 2)
                             + 1e6 * bad.mean())
            return float(np.mean((_sigmoid(logits) - target_p) ** 2))

    # The landscape mixes saturated-sigmoid plateaus with steep walls;
    # the default ftol stops after a handful of iterations, far from the
    # attainable fit.
    res = minimize(objective, p0, method="L-BFGS-B",
                   options={"maxiter": max_iter, "ftol": 1e-14, "gtol": 1e-10})
    p = res.x if objective(res.x) <= objective(p0) else p0
    new_edges = {}
    for k, key in enumerate(keys):
        fe = model.edges[key]
        a, b, c, d = (float(v) for v in p[4 * k:4 * k + 4])
        new_edges[key] = FittedEdge(fe.primitive, a, b, c, d, fe.r2)
    return SymbolicModel(widths=model.widths, edges=new_edges,
                         standardizer=model.standardizer,
                         metadata=dict(model.metadata, polished=True))


def eval_expression(model: SymbolicModel, fv) -> float:
    """Logit of the composed expression at a standardized feature vector."""
    fv = np.asarray(fv, dtype=np.float64)
    if fv.ndim != 1 or fv.size != model.widths[0]:
        raise InvalidArgumentError("feature vector length mismatch")
    return _eval_node(model.expression, fv)


def eval_expression_batch(model: SymbolicModel, x):
    return np.array([eval_expression(model, row) for row in np.asarray(x, dtype=np.float64)])


def classify(logit: float) -> int:
    """1 (attacked) iff sigmoid(logit) > 0.5, i.e. logit > 0."""
    return int(logit > 0.0)


def _fmt(v: float, precision: int) -> str:
    s = f"{v:.{precision}f}"
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s if s not in ("-0", "") else "0"


def _render_node(node, precision, var_names):
    if isinstance(node, VarNode):
        return var_names[node.index]
    if isinstance(node, SumNode):
        if not node.children:
            return "0"
        return " + ".join(_render_node(ch, precision, var_names) for ch in node.children)
    fit = node.fit
    inner = _render_node(node.child, precision, var_names)
    a_s, b_s = _fmt(fit.a, precision), _fmt(abs(fit.b), precision)
    u = f"{a_s}*{inner}" if a_s != "1" else inner
    if fit.b > 0 and b_s != "0":
        u = f"{u} + {b_s}"
    elif fit.b < 0 and b_s != "0":
        u = f"{u} - {b_s}"
    call = _PRIM_BY_NAME[fit.primitive].render_call(u)
    c_s, d_s = _fmt(fit.c, precision), _fmt(abs(fit.d), precision)
    out = call if c_s == "1" else f"{c_s}*{call}"
    if fit.d > 0 and d_s != "0":
        out = f"{out} + {d_s}"
    elif fit.d < 0 and d_s != "0":
        out = f"{out} - {d_s}"
    return out


def render(model: SymbolicModel, precision: int = 2) -> str:
    """Human-readable expression plus a legend of surviving input features.

    Coefficients are rounded for display only; evaluation always uses the
    stored full-precision parameters.
    """
    n_in = model.widths[0]
    var_names = [f"x{i + 1}" for i in range(n_in)]
    body = _render_node(model.expression, precision, var_names)
    lines = [f"xi(x) = {body}", "", "where:"]
    for i in model.surviving_inputs():
        desc = FEATURE_DESCRIPTIONS[i] if i < len(FEATURE_DESCRIPTIONS) else f"feature {i + 1}"
        lines.append(f"  x{i + 1} = {desc}")
    return "\n".join(lines)


def export_r2_csv(model: SymbolicModel, path, manifest_digest=None):
    with open(path, "w", encoding="utf-8") as fh:
        if manifest_digest:
            fh.write(f"# manifest_digest={manifest_digest}\n")
        fh.write("layer,input,output,primitive,a,b,c,d,r2\n")
        for (t, i, j), fe in sorted(model.edges.items()):
            fh.write(f"{t},{i},{j},{fe.primitive},{fe.a:.17g},{fe.b:.17g},"
                     f"{fe.c:.17g},{fe.d:.17g},{fe.r2:.17g}\n")
