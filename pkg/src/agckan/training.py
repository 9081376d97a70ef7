"""Full-batch L-BFGS training, edge pruning, and fine-tuning.

One "epoch" is one full-batch L-BFGS iteration (two-loop recursion with a
strong Wolfe line search; Armijo-backtracked steepest descent as the
fallback when the line search fails).  The objective is mean BCE-with-
logits plus an optional L1 penalty on the mean absolute edge activations.
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateNetworkError, InvalidArgumentError
from .kan import (KanNetwork, get_params, loss_and_gradient, set_params)


@dataclass
class TrainConfig:
    epochs: int = 50
    history_size: int = 10
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    l1: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidArgumentError("epochs must be >= 0")
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise InvalidArgumentError("need 0 < c1 < c2 < 1")
        if self.l1 < 0:
            raise InvalidArgumentError("l1 weight must be >= 0")


@dataclass
class TrainReport:
    loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)
    fallback_steps: list = field(default_factory=list)
    params_digest: str = ""

    def to_dict(self):
        return {"loss": self.loss, "train_acc": self.train_acc,
                "val_acc": self.val_acc, "fallback_steps": self.fallback_steps,
                "params_digest": self.params_digest}

    def export_csv(self, path, manifest_digest=None):
        with open(path, "w", encoding="utf-8") as fh:
            if manifest_digest:
                fh.write(f"# manifest_digest={manifest_digest}\n")
            fh.write("epoch,loss,train_acc,val_acc\n")
            for i, (l, ta, va) in enumerate(zip(self.loss, self.train_acc, self.val_acc), 1):
                fh.write(f"{i},{l:.17g},{ta:.17g},{va:.17g}\n")


def bce_with_logits(logits, labels) -> float:
    """Numerically stable mean binary cross-entropy with logits."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if z.shape != y.shape:
        raise InvalidArgumentError("logits and labels must have equal length")
    if z.size == 0:
        raise InvalidArgumentError("need a non-empty batch")
    return float(np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))


def accuracy_from_logits(logits, labels) -> float:
    preds = (np.asarray(logits) > 0.0).astype(int)
    return float(np.mean(preds == np.asarray(labels)))


def _strong_wolfe(f_df, p, d, f0, g0, c1, c2, max_iter=25):
    """Line search satisfying the strong Wolfe conditions along d from p.

    f_df(alpha) must return (f, directional derivative) at p + alpha*d.
    Returns (alpha, f_alpha) or (None, None) on failure.
    """
    dphi0 = g0
    if dphi0 >= 0.0:
        return None, None

    def zoom(a_lo, a_hi, f_lo, df_lo, f_hi):
        for _ in range(max_iter):
            # Cubic-ish bisection; plain midpoint is robust enough here.
            a = 0.5 * (a_lo + a_hi)
            fa, dfa = f_df(a)
            if fa > f0 + c1 * a * dphi0 or fa >= f_lo:
                a_hi, f_hi = a, fa
            else:
                if abs(dfa) <= -c2 * dphi0:
                    return a, fa
                if dfa * (a_hi - a_lo) >= 0.0:
                    a_hi, f_hi = a_lo, f_lo
                a_lo, f_lo, df_lo = a, fa, dfa
            if abs(a_hi - a_lo) < 1e-16:
                break
        return (a_lo, f_lo) if f_lo < f0 else (None, None)

    a_prev, f_prev, df_prev = 0.0, f0, dphi0
    a = 1.0
    for it in range(max_iter):
        fa, dfa = f_df(a)
        if fa > f0 + c1 * a * dphi0 or (it > 0 and fa >= f_prev):
            return zoom(a_prev, a, f_prev, df_prev, fa)
        if abs(dfa) <= -c2 * dphi0:
            return a, fa
        if dfa >= 0.0:
            return zoom(a, a_prev, fa, dfa, f_prev)
        a_prev, f_prev, df_prev = a, fa, dfa
        a *= 2.0
    return None, None


def _lbfgs_direction(grad, s_list, y_list):
    q = grad.copy()
    alphas = []
    for s, y in zip(reversed(s_list), reversed(y_list)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        alphas.append((a, rho, s, y))
        q -= a * y
    if s_list:
        s, y = s_list[-1], y_list[-1]
        q *= (s @ y) / (y @ y)
    for a, rho, s, y in reversed(alphas):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def train(net: KanNetwork, x_train, y_train, x_val, y_val,
          config: TrainConfig = None):
    """L-BFGS-train the active parameters of net; returns (net, TrainReport).

    net is modified in place (and also returned).  Deterministic in
    (net, data, config).
    """
    config = config or TrainConfig()
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    report = TrainReport()

    def evaluate(vec):
        set_params(net, vec)
        loss, grad, logits = loss_and_gradient(net, x_train, y_train, l1=config.l1)
        return loss, grad, logits

    p = get_params(net)
    f, g, logits = evaluate(p)
    s_list, y_list = [], []
    for epoch in range(config.epochs):
        gnorm = np.linalg.norm(g)
        if gnorm > 1e-14:
            d = _lbfgs_direction(g, s_list, y_list)
            if d @ g >= 0.0:  # not a descent direction; reset memory
                s_list, y_list = [], []
                d = -g

            def f_df(alpha, _d=d, _p=p):
                loss, grad, _ = evaluate(_p + alpha * _d)
                return loss, grad @ _d

            alpha, f_new = _strong_wolfe(f_df, p, d, f, g @ d,
                                         config.wolfe_c1, config.wolfe_c2)
            if alpha is None:
                # Armijo backtracking along steepest descent.
                report.fallback_steps.append(epoch)
                d = -g / max(gnorm, 1.0)
                alpha = 1.0
                f_new = None
                for _ in range(40):
                    trial, _, _ = evaluate(p + alpha * d)
                    if trial <= f + config.wolfe_c1 * alpha * (d @ g):
                        f_new = trial
                        break
                    alpha *= 0.5
                if f_new is None:
                    alpha = 0.0
                    f_new = f

            p_new = p + alpha * d
            f_val, g_new, logits = evaluate(p_new)
            if alpha > 0.0:
                s = p_new - p
                yv = g_new - g
                if s @ yv > 1e-12:
                    s_list.append(s)
                    y_list.append(yv)
                    if len(s_list) > config.history_size:
                        s_list.pop(0)
                        y_list.pop(0)
            p, f, g = p_new, f_val, g_new
        else:
            set_params(net, p)

        report.loss.append(f)
        report.train_acc.append(accuracy_from_logits(logits, y_train))
        if x_val is not None and len(x_val):
            _, _, val_logits = loss_and_gradient_readonly(net, x_val, y_val)
            report.val_acc.append(accuracy_from_logits(val_logits, y_val))
        else:
            report.val_acc.append(float("nan"))

    set_params(net, p)
    report.params_digest = hashlib.sha256(p.tobytes()).hexdigest()
    return net, report


def loss_and_gradient_readonly(net, x, y):
    return loss_and_gradient(net, x, y, l1=0.0)


def finetune(net: KanNetwork, x_train, y_train, x_val, y_val,
             config: TrainConfig = None):
    """Retrain only the surviving (active) parameters; topology unchanged."""
    return train(net, x_train, y_train, x_val, y_val, config)


def edge_importance(net: KanNetwork, x):
    """{(layer, i, j): mean |edge output| over the batch}; inactive edges score 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] == 0:
        raise InvalidArgumentError("batch must be non-empty")
    scores = {}
    arr = x
    for t, layer in enumerate(net.layers):
        out = np.zeros((arr.shape[0], layer.n_out))
        for i in range(layer.n_in):
            xi = arr[:, i]
            for j in range(layer.n_out):
                e = layer.edges[i][j]
                if not e.active:
                    scores[(t, i, j)] = 0.0
                    continue
                eo = e(xi)
                scores[(t, i, j)] = float(np.mean(np.abs(eo)))
                out[:, j] += eo
        arr = out
    return scores


def prune(net: KanNetwork, x, threshold: float) -> KanNetwork:
    """Copy of net with low-importance edges (and dead hidden nodes) removed.

    An edge is deactivated iff its score is below threshold; a hidden node
    is removed (all incident edges deactivated) iff its best incoming or
    best outgoing score is below threshold.  Raises DegenerateNetworkError
    if no input-to-output path survives.
    """
    if threshold < 0:
        raise InvalidArgumentError("threshold must be >= 0")
    scores = edge_importance(net, x)
    pruned = copy.deepcopy(net)
    for (t, i, j), s in scores.items():
        if s < threshold:
            pruned.layers[t].edges[i][j].active = False
    # Hidden node rule: node j between layer t and t+1.
    for t in range(len(pruned.layers) - 1):
        layer, nxt = pruned.layers[t], pruned.layers[t + 1]
        for j in range(layer.n_out):
            best_in = max(scores[(t, i, j)] for i in range(layer.n_in))
            best_out = max(scores[(t + 1, j, m)] for m in range(nxt.n_out))
            if best_in < threshold or best_out < threshold:
                for i in range(layer.n_in):
                    layer.edges[i][j].active = False
                for m in range(nxt.n_out):
                    nxt.edges[j][m].active = False
    if not _has_path(pruned):
        raise DegenerateNetworkError("pruning removed every input-to-output path")
    return pruned


def _has_path(net: KanNetwork) -> bool:
    reachable = set(range(net.layers[0].n_in))
    for layer in net.layers:
        nxt = {j for i in reachable for j in range(layer.n_out)
               if layer.edges[i][j].active}
        if not nxt:
            return False
        reachable = nxt
    return True
