"""Kolmogorov-Arnold network with B-spline edge activations.

Edges carry the learnable univariate functions
``w_b * silu(x) + w_s * sum_i c_i B_i(x)``; nodes only sum their incoming
edge values.  Gradients are exact reverse-mode derivatives computed in
numpy; the trainable parameter vector concatenates, per active edge,
``[c_0..c_{G+k-1}, w_b, w_s]`` in layer-major, input-major order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError, SchemaError
from .features import Standardizer
from .splines import SplineGrid, fit_coefficients

CHECKPOINT_VERSION = 1


def sigmoid(x):
    ez = np.exp(-np.abs(x))
    return np.where(np.asarray(x) >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))


def silu(x):
    return x * sigmoid(x)


def silu_deriv(x):
    s = sigmoid(x)
    return s * (1.0 + x * (1.0 - s))


@dataclass
class EdgeActivation:
    grid: SplineGrid
    coef: np.ndarray
    w_b: float = 1.0
    w_s: float = 1.0
    active: bool = True

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=np.float64)
        if self.coef.size != self.grid.n_basis:
            raise InvalidArgumentError("coefficient count must equal G + k")

    def __call__(self, x):
        """Edge output at x (scalar or array); inactive edges are identically 0."""
        if not self.active:
            return np.zeros_like(np.asarray(x, dtype=np.float64))
        return self.w_b * silu(x) + self.w_s * (self.grid.basis(x) @ self.coef)

    def input_deriv(self, x):
        if not self.active:
            return np.zeros_like(np.asarray(x, dtype=np.float64))
        return self.w_b * silu_deriv(x) + self.w_s * (self.grid.basis_deriv(x) @ self.coef)

    def n_params(self):
        return self.coef.size + 2

    def to_dict(self):
        return {"grid": self.grid.to_dict(), "coef": self.coef.tolist(),
                "w_b": self.w_b, "w_s": self.w_s, "active": self.active}

    @classmethod
    def from_dict(cls, d):
        return cls(grid=SplineGrid.from_dict(d["grid"]), coef=np.array(d["coef"]),
                   w_b=d["w_b"], w_s=d["w_s"], active=d["active"])


def edge_eval(edge: EdgeActivation, x):
    return edge(x)


@dataclass
class KanLayer:
    n_in: int
    n_out: int
    edges: list  # edges[i][j] for input i, output j

    def forward(self, x):
        """x: (batch, n_in) -> (batch, n_out); sums incoming edge values."""
        out = np.zeros((x.shape[0], self.n_out))
        for i in range(self.n_in):
            xi = x[:, i]
            for j in range(self.n_out):
                e = self.edges[i][j]
                if e.active:
                    out[:, j] += e(xi)
        return out


@dataclass
class KanNetwork:
    layers: list
    standardizer: Optional[Standardizer] = None
    metadata: dict = field(default_factory=dict)

    @property
    def widths(self):
        return [self.layers[0].n_in] + [l.n_out for l in self.layers]

    def active_edges(self):
        """Yield (layer_index, i, j, edge) over active edges in parameter order."""
        for t, layer in enumerate(self.layers):
            for i in range(layer.n_in):
                for j in range(layer.n_out):
                    e = layer.edges[i][j]
                    if e.active:
                        yield t, i, j, e

    def n_params(self):
        return sum(e.n_params() for *_, e in self.active_edges())


def build_network(widths, grid_lo=-3.0, grid_hi=3.0, num_intervals=5, order=3,
                  coef_std=0.1, seed=0, standardizer=None) -> KanNetwork:
    """Fresh network with N(0, coef_std^2) spline coefficients and w_b = w_s = 1."""
    if len(widths) < 2:
        raise InvalidArgumentError("need at least input and output widths")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x4b41]))
    layers = []
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        edges = [[EdgeActivation(grid=SplineGrid(grid_lo, grid_hi, num_intervals, order),
                                 coef=rng.normal(0.0, coef_std, num_intervals + order))
                  for _ in range(n_out)] for _ in range(n_in)]
        layers.append(KanLayer(n_in=n_in, n_out=n_out, edges=edges))
    return KanNetwork(layers=layers, standardizer=standardizer,
                      metadata={"seed": seed})


def forward(net: KanNetwork, x):
    """Logit(s) for one input vector or a (batch, n_in) matrix."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.shape[1] != net.layers[0].n_in:
        raise InvalidArgumentError(
            f"input dimension {arr.shape[1]} != network input {net.layers[0].n_in}")
    for layer in net.layers:
        arr = layer.forward(arr)
    if arr.shape[1] != 1:
        return arr[0] if single else arr
    return float(arr[0, 0]) if single else arr[:, 0]


def _forward_cached(net: KanNetwork, x):
    """Forward pass storing per-layer inputs and per-edge outputs/bases."""
    caches = []
    arr = np.asarray(x, dtype=np.float64)
    for layer in net.layers:
        cache = {"inputs": arr, "basis": {}, "edge_out": {}}
        out = np.zeros((arr.shape[0], layer.n_out))
        for i in range(layer.n_in):
            xi = arr[:, i]
            for j in range(layer.n_out):
                e = layer.edges[i][j]
                if not e.active:
                    continue
                bmat = e.grid.basis(xi)  # grids may differ per edge
                eo = e.w_b * silu(xi) + e.w_s * (bmat @ e.coef)
                cache["basis"][(i, j)] = bmat
                cache["edge_out"][(i, j)] = eo
                out[:, j] += eo
        caches.append(cache)
        arr = out
    return arr[:, 0], caches


def get_params(net: KanNetwork):
    parts = []
    for *_ids, e in net.active_edges():
        parts.append(e.coef)
        parts.append(np.array([e.w_b, e.w_s]))
    return np.concatenate(parts) if parts else np.zeros(0)


def set_params(net: KanNetwork, vec):
    if len(vec) != net.n_params():
        raise InvalidArgumentError("parameter vector length mismatch")
    off = 0
    for *_ids, e in net.active_edges():
        n = e.coef.size
        e.coef = np.array(vec[off:off + n])
        e.w_b = float(vec[off + n])
        e.w_s = float(vec[off + n + 1])
        off += n + 2


def loss_and_gradient(net: KanNetwork, x, y, l1: float = 0.0):
    """Mean BCE-with-logits (+ optional L1 of mean |edge output|) and its gradient.

    Returns (loss, grad, logits) with grad laid out like get_params.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] == 0:
        raise InvalidArgumentError("batch must be non-empty")
    batch = x.shape[0]
    logits, caches = _forward_cached(net, x)

    z = logits
    loss = float(np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))
    dz = (sigmoid(z) - y) / batch  # dL/dz per sample

    # L1 penalty: sum over active edges of the batch-mean |edge output|.
    reg_scale = l1 / batch if l1 > 0.0 else 0.0
    if l1 > 0.0:
        acc = 0.0
        for cache in caches:
            for eo in cache["edge_out"].values():
                acc += np.abs(eo).sum()
        loss += l1 * acc / batch

    # Reverse pass: g holds dL/d(node output) for the current layer.
    grads = {}
    g = dz[:, None]
    for t in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[t]
        cache = caches[t]
        xin = cache["inputs"]
        g_in = np.zeros_like(xin)
        for i in range(layer.n_in):
            xi = xin[:, i]
            sb = None
            sdb = None
            for j in range(layer.n_out):
                e = layer.edges[i][j]
                if not e.active:
                    continue
                adj = g[:, j]
                if reg_scale:
                    adj = adj + reg_scale * np.sign(cache["edge_out"][(i, j)])
                bmat = cache["basis"][(i, j)]
                if sb is None:
                    sb = silu(xi)
                    sdb = silu_deriv(xi)
                grads[(t, i, j)] = (
                    bmat.T @ (adj * e.w_s),          # d/dcoef
                    float(adj @ sb),                  # d/dw_b
                    float(adj @ (bmat @ e.coef)),     # d/dw_s
                )
                g_in[:, i] += adj * (e.w_b * sdb + e.w_s * (e.grid.basis_deriv(xi) @ e.coef))
        g = g_in

    parts = []
    for t, i, j, e in net.active_edges():
        dcoef, dwb, dws = grads[(t, i, j)]
        parts.append(dcoef)
        parts.append(np.array([dwb, dws]))
    grad = np.concatenate(parts) if parts else np.zeros(0)
    return loss, grad, logits


def gradient(net: KanNetwork, x, y, l1: float = 0.0):
    """Flat gradient of the mean loss over the batch (see loss_and_gradient)."""
    return loss_and_gradient(net, x, y, l1)[1]


def update_grid(net: KanNetwork, x, quantiles=(0.01, 0.99), pad: float = 0.1):
    """Re-fit per-edge grids to the observed input range on a batch.

    Each active edge whose padded [q01, q99] input range escapes its current
    grid gets a new grid over that range with coefficients least-squares
    re-fitted so its outputs on the batch are preserved.  Returns net.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] == 0:
        raise InvalidArgumentError("batch must be non-empty")
    _, caches = _forward_cached(net, x)
    for t, layer in enumerate(net.layers):
        xin = caches[t]["inputs"]
        for i in range(layer.n_in):
            xi = xin[:, i]
            qlo, qhi = np.quantile(xi, quantiles)
            span = max(qhi - qlo, 1e-12)
            new_lo = qlo - pad * span
            new_hi = qhi + pad * span
            for j in range(layer.n_out):
                e = layer.edges[i][j]
                if not e.active:
                    continue
                if new_lo >= e.grid.lo and new_hi <= e.grid.hi:
                    continue  # batch already covered; keep the grid
                # Extend by whole knot pitches so the old knots stay a
                # subset of the new ones, then refit coefficients on dense
                # samples of the old edge function over the new range.  This
                # keeps every coefficient constrained; when the batch lies in
                # a single continuity region of the old spline the refit is
                # exact (the old linear extrapolation has a curvature jump at
                # the old range boundary that a C^2 uniform spline cannot
                # reproduce exactly, so mixed-region batches drift by O(h^2)).
                h = (e.grid.hi - e.grid.lo) / e.grid.num_intervals
                ext_lo = max(0, int(np.ceil((e.grid.lo - new_lo) / h)))
                ext_hi = max(0, int(np.ceil((new_hi - e.grid.hi) / h)))
                new_grid = SplineGrid(e.grid.lo - ext_lo * h, e.grid.hi + ext_hi * h,
                                      e.grid.num_intervals + ext_lo + ext_hi,
                                      e.grid.order)
                if new_lo >= e.grid.hi or new_hi <= e.grid.lo:
                    # Batch lies entirely in one linear-extrapolation branch
                    # of the old spline: fit over the batch range only, where
                    # the old function is exactly representable.
                    xs_lo, xs_hi = new_lo, new_hi
                else:
                    xs_lo = min(new_lo, e.grid.lo)
                    xs_hi = max(new_hi, e.grid.hi)
                xs_fit = np.linspace(xs_lo, xs_hi,
                                     20 * (new_grid.num_intervals + new_grid.order))
                ys_fit = e.grid.basis(xs_fit) @ e.coef
                e.coef = fit_coefficients(new_grid, xs_fit, ys_fit)
                e.grid = new_grid
    return net


def save_checkpoint(net: KanNetwork, path):
    payload = {
        "format": "agckan-model",
        "version": CHECKPOINT_VERSION,
        "widths": net.widths,
        "layers": [[[e.to_dict() for e in row] for row in layer.edges]
                   for layer in net.layers],
        "standardizer": net.standardizer.to_dict() if net.standardizer else None,
        "metadata": net.metadata,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))


def load_checkpoint(path) -> KanNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "agckan-model":
        raise SchemaError("not an agckan model checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise SchemaError(f"unsupported checkpoint version {payload.get('version')}")
    layers = []
    for rows in payload["layers"]:
        edges = [[EdgeActivation.from_dict(d) for d in row] for row in rows]
        layers.append(KanLayer(n_in=len(edges), n_out=len(edges[0]), edges=edges))
    std = Standardizer.from_dict(payload["standardizer"]) if payload["standardizer"] else None
    return KanNetwork(layers=layers, standardizer=std, metadata=payload["metadata"])
