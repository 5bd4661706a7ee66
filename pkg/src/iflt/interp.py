"""Order-p interpolation filter: fitting, application, residuals, serialization.

The filter estimates a reference signal from an observation stream as

    x_hat = sum_j T_j w_j

where v_j = Q_j(stream at position i) are p transformed observations, the
w_j are their deflation-cascade outputs, and the coefficient matrices T_j are
chosen so that, at each of p training nodes (x_k, y_k), the filter's
covariance with the node's own cascade output matches that of the reference:

    sum_j T_j C(w_jk, w_kk) = C(x_k, w_kk),  k = 1..p.

Because the per-node cascade outputs are mutually orthogonal, each condition
collapses to a single equation solved by

    T_j = C(x_j, w_jj) C(w_jj, w_jj)^+ + A_j (I - C(w_jj, w_jj) C(w_jj, w_jj)^+),

with free matrices A_j (zero by default). Everything is expressed through
pseudo-inverses, so fitting succeeds for any covariance rank; a collapsed
cascade output simply yields a zero coefficient block, which is flagged in
the model metadata.

Deflation matrices are recomputed from each input's own transformed
observations by default (this is what makes the cascade outputs orthogonal
for unseen inputs); ``fixed_r=True`` replays the deflation matrices frozen at
fit time instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInput, ParseError
from .linalg import pseudo_inverse
from .ortho import OrthoResult, orthogonalize
from .signals import Ensemble, QOperatorSpec, SignalSequence, TrainingSet, apply_q, cov

MODEL_VERSION = 1
RESIDUAL_RTOL = 1e-6


@dataclass(frozen=True)
class FilterContext:
    """Observation window an input position is evaluated against."""

    history: SignalSequence


@dataclass
class FilterModel:
    """Trained filter: transform specs, coefficient blocks, optional free terms.

    ``r_mats[j]`` stores the deflation matrices of training node j's cascade
    (used only when applying with ``fixed_r=True``). ``meta`` records fit
    diagnostics: residuals, tolerances, sample counts, degenerate terms.
    """

    p: int
    q_specs: list[QOperatorSpec]
    t_mats: list[np.ndarray]
    a_mats: list[np.ndarray] | None = None
    r_mats: list[list[np.ndarray]] | None = None
    meta: dict = field(default_factory=dict)

    def required_window(self) -> int:
        return max(q.window() for q in self.q_specs)


def node_cascades(train: TrainingSet, q_specs) -> list[OrthoResult]:
    """Deflation cascade of the transformed observations at every training node."""
    out = []
    for idx in train.s_y_indices:
        vs = [apply_q(q, train.s_y_context, idx) for q in q_specs]
        out.append(orthogonalize(vs))
    return out


def _coefficients(x: Ensemble, w: Ensemble, a_mat: np.ndarray | None) -> np.ndarray:
    eww = cov(w, w)
    eww_pinv = pseudo_inverse(eww)
    t = cov(x, w) @ eww_pinv
    if a_mat is not None:
        t = t + a_mat @ (np.eye(eww.shape[0]) - eww @ eww_pinv)
    return t


def fit(
    train: TrainingSet,
    q_specs,
    a_mats=None,
    residual_tol: float = RESIDUAL_RTOL,
) -> FilterModel:
    """Fit the order-p filter on a training set.

    ``a_mats``, when given, supplies one free matrix per term (the free term
    only acts outside the range of the node covariance, so the matching
    conditions hold for any choice). Fitting records the per-node matching
    residuals in ``meta`` and flags terms whose cascade output collapsed to
    zero; it never fails on rank-deficient covariances.
    """
    q_specs = list(q_specs)
    p = train.p
    if len(q_specs) != p:
        raise InvalidInput(f"{len(q_specs)} transforms for {p} training nodes")
    if a_mats is not None:
        a_mats = [np.asarray(a, dtype=float) for a in a_mats]
        if len(a_mats) != p:
            raise InvalidInput("need one free matrix per term")
    cascades = node_cascades(train, q_specs)
    t_mats = []
    degenerate = []
    for j in range(p):
        wjj = cascades[j].ws[j]
        if not np.any(wjj.data):
            degenerate.append(j)
        t_mats.append(
            _coefficients(train.s_x[j], wjj, a_mats[j] if a_mats else None)
        )
    residuals, scales = _matching_residuals(t_mats, train, cascades)
    r_mats = [list(cascades[j].k_mats[j]) for j in range(p)]
    meta = {
        "p": p,
        "m": train.s_x[0].m,
        "n": train.s_y_context.m,
        "s": train.s_y_context.s,
        "node_positions": list(train.s_y_indices),
        "residuals": residuals,
        "residual_scales": scales,
        "residual_tol": residual_tol,
        "residual_ok": all(
            r <= residual_tol * s if s > 0 else r <= residual_tol
            for r, s in zip(residuals, scales)
        ),
        "degenerate_terms": degenerate,
    }
    return FilterModel(p=p, q_specs=q_specs, t_mats=t_mats, a_mats=a_mats,
                       r_mats=r_mats, meta=meta)


def _matching_residuals(t_mats, train: TrainingSet, cascades) -> tuple[list, list]:
    residuals, scales = [], []
    for k in range(train.p):
        wkk = cascades[k].ws[k]
        target = cov(train.s_x[k], wkk)
        acc = np.zeros_like(target)
        for j, t in enumerate(t_mats):
            acc += t @ cov(cascades[k].ws[j], wkk)
        residuals.append(float(np.linalg.norm(acc - target)))
        scales.append(float(np.linalg.norm(target)))
    return residuals, scales


def interp_residual(model: FilterModel, train: TrainingSet) -> list[float]:
    """Recompute the per-node matching residuals from scratch.

    Returns ``||sum_j T_j C(w_jk, w_kk) - C(x_k, w_kk)||_F`` for each node k.
    """
    cascades = node_cascades(train, model.q_specs)
    residuals, _ = _matching_residuals(model.t_mats, train, cascades)
    return residuals


def input_cascade(model: FilterModel, ctx: FilterContext, i: int) -> list[Ensemble]:
    """Transformed observations at position ``i``, passed through the cascade."""
    if len(ctx.history) < model.required_window():
        raise InvalidInput(
            f"history of {len(ctx.history)} positions is shorter than the "
            f"required window {model.required_window()}"
        )
    vs = [apply_q(q, ctx.history, i) for q in model.q_specs]
    return list(orthogonalize(vs).ws)


def apply_filter(
    model: FilterModel, ctx: FilterContext, i: int, fixed_r: bool = False
) -> Ensemble:
    """Estimate the reference ensemble for observation position ``i``.

    With ``fixed_r=True`` the deflation matrices stored at fit time are
    replayed instead of being recomputed from the input's own covariances.
    """
    if len(ctx.history) < model.required_window():
        raise InvalidInput(
            f"history of {len(ctx.history)} positions is shorter than the "
            f"required window {model.required_window()}"
        )
    vs = [apply_q(q, ctx.history, i) for q in model.q_specs]
    if fixed_r:
        if model.r_mats is None:
            raise InvalidInput("model carries no frozen deflation matrices")
        ws_data = []
        for j, v in enumerate(vs):
            data = v.data.copy()
            for l, k_mat in enumerate(model.r_mats[j]):
                data -= k_mat @ ws_data[l]
            ws_data.append(data)
    else:
        ws_data = [w.data for w in orthogonalize(vs).ws]
    mdim = model.t_mats[0].shape[0]
    acc = np.zeros((mdim, vs[0].s))
    for t, w in zip(model.t_mats, ws_data):
        acc += t @ w
    acc -= acc.mean(axis=1, keepdims=True)
    return Ensemble(acc, centered=True)


def save_model(model: FilterModel) -> bytes:
    """Serialize to JSON (full-precision floats, arrays as nested lists)."""
    doc = {
        "version": MODEL_VERSION,
        "p": model.p,
        "q_specs": [q.to_dict() for q in model.q_specs],
        "t_mats": [t.tolist() for t in model.t_mats],
        "a_mats": [a.tolist() for a in model.a_mats] if model.a_mats else None,
        "r_mats": (
            [[k.tolist() for k in row] for row in model.r_mats]
            if model.r_mats is not None
            else None
        ),
        "meta": model.meta,
    }
    return json.dumps(doc, sort_keys=True).encode()


def load_model(blob: bytes | str) -> FilterModel:
    """Inverse of save_model; raises ParseError on malformed input."""
    try:
        doc = json.loads(blob)
    except json.JSONDecodeError as exc:
        raise ParseError("model blob is not valid JSON") from exc
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object")
    if doc.get("version") != MODEL_VERSION:
        raise ParseError(f"unsupported model version {doc.get('version')!r}")
    try:
        p = int(doc["p"])
        q_specs = [QOperatorSpec.from_dict(d) for d in doc["q_specs"]]
        t_mats = [np.asarray(t, dtype=float) for t in doc["t_mats"]]
    except (KeyError, TypeError, ValueError, InvalidInput) as exc:
        raise ParseError(f"malformed model document: {exc}") from exc
    if len(q_specs) != p or len(t_mats) != p:
        raise ParseError("q_specs/t_mats length does not match p")
    shapes = {t.shape for t in t_mats}
    if len(shapes) != 1 or any(t.ndim != 2 for t in t_mats):
        raise ParseError("coefficient matrices must share one 2-D shape")
    a_mats = doc.get("a_mats")
    if a_mats is not None:
        a_mats = [np.asarray(a, dtype=float) for a in a_mats]
    r_mats = doc.get("r_mats")
    if r_mats is not None:
        r_mats = [[np.asarray(k, dtype=float) for k in row] for row in r_mats]
    return FilterModel(
        p=p,
        q_specs=q_specs,
        t_mats=t_mats,
        a_mats=a_mats,
        r_mats=r_mats,
        meta=doc.get("meta") or {},
    )
