"""Error formulas, the a-priori error bound, and epsilon-net selection.

Distances and errors between ensembles use the mean squared Euclidean norm
over realizations, ``(1/s) ||A - B||_F^2``, the sample analogue of the
mean-square signal norm used everywhere else in the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import InvalidInput, ParseError
from .interp import FilterModel, _coefficients
from .linalg import frob_norm_sq, pseudo_inverse, sym_sqrt
from .ortho import cross_cov_residual, orthogonalize
from .signals import Ensemble, TrainingSet, apply_q, cov, energy

ORTHO_RTOL = 1e-8


@dataclass(frozen=True)
class EpsNet:
    """Indices of selected centers plus the realized covering radius."""

    center_indices: tuple[int, ...]
    achieved_eps: float


@dataclass(frozen=True)
class ErrorBoundInputs:
    """Constants feeding the a-priori error bound.

    ``eps_x`` / ``eps_y`` are the covering radii of the training sets inside
    the reference and observation families. ``lambda_e`` bounds how fast the
    pseudo-inverse of a cascade-output covariance moves with the output,
    ``lambda_q`` how fast the observation transforms move with their input,
    and ``r_hat[k]`` the squared gain of the k-th deflation stage. These are
    assumptions about the signal families, supplied by the caller (probes in
    the benchmark module give crude empirical lower bounds). ``x_energy``
    stands in for the unknown target's mean squared norm; ``w_covs`` /
    ``xw_covs`` are the per-term covariances C(w_k, w_k) and C(x_k, w_k).
    """

    eps_x: float
    eps_y: float
    lambda_e: float
    lambda_q: float
    r_hat: tuple[float, ...]
    w_covs: tuple[np.ndarray, ...]
    xw_covs: tuple[np.ndarray, ...]
    x_energy: float
    a_mats: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        consts = (self.eps_x, self.eps_y, self.lambda_e, self.lambda_q,
                  self.x_energy, *self.r_hat)
        if not all(np.isfinite(c) and c >= 0.0 for c in consts):
            raise InvalidInput("bound constants must be finite and nonnegative")
        p = len(self.r_hat)
        if not (len(self.w_covs) == len(self.xw_covs) == p):
            raise InvalidInput("need one covariance pair per term")
        if self.a_mats is not None and len(self.a_mats) != p:
            raise InvalidInput("need one free matrix per term")


def ensemble_sq_distance(a: Ensemble, b: Ensemble) -> float:
    """Mean squared distance over realizations, ``(1/s) ||A - B||_F^2``."""
    if (a.m, a.s) != (b.m, b.s):
        raise InvalidInput(f"shape mismatch: {(a.m, a.s)} vs {(b.m, b.s)}")
    return float(np.sum((a.data - b.data) ** 2)) / a.s


def empirical_error(x: Ensemble, x_hat: Ensemble) -> float:
    """Realized estimation error, ``(1/s) ||X - X_hat||_F^2``."""
    return ensemble_sq_distance(x, x_hat)


def optimal_error(x: Ensemble, ws, residual_rtol: float = ORTHO_RTOL) -> float:
    """Smallest error any filter ``sum_j T_j w_j`` can achieve for ``x``.

    Requires mutually orthogonal ``ws``; equals the energy of ``x`` minus the
    energy captured by the best coefficient for each term,

        energy(x) - sum_j ||C(x, w_j) (C(w_j, w_j)^{1/2})^+||_F^2.
    """
    ws = tuple(ws)
    if not ws:
        raise InvalidInput("need at least one ensemble")
    scale = max(float(np.linalg.norm(cov(w, w))) for w in ws)
    if cross_cov_residual(ws) > residual_rtol * scale:
        raise InvalidInput("ensembles are not mutually orthogonal within tolerance")
    captured = 0.0
    for w in ws:
        half_pinv = pseudo_inverse(sym_sqrt(cov(w, w)))
        captured += frob_norm_sq(cov(x, w) @ half_pinv)
    return energy(x) - captured


def node_error_decomposition(model: FilterModel, train: TrainingSet, k: int) -> dict:
    """Exact error split at training node k when the training pairs are the
    whole family.

    In that regime every input is one of the training observations, so the
    filter's j-th coefficient block acts on the node's own cascade output and
    can be written against it; the realized error then splits exactly into
    the optimal error plus the cross-node mismatch of each term:

        lhs = error at node k of the filter evaluated in this regime
        rhs = optimal_error(x_k, ws)
              + sum_j ||(C(x_j, w_j) - C(x_k, w_j)) (C(w_j, w_j)^{1/2})^+||_F^2

    with ws the cascade outputs of node k's observation (the k-th coefficient
    block coincides with the trained one). Returns ``{"lhs", "rhs", "gap"}``;
    the identity assumes the fit used zero free terms.
    """
    if not 0 <= k < model.p:
        raise InvalidInput(f"node index {k} out of range [0, {model.p - 1}]")
    idx = train.s_y_indices[k]
    vs = [apply_q(q, train.s_y_context, idx) for q in model.q_specs]
    ws = orthogonalize(vs).ws
    a_mats = model.a_mats or [None] * model.p
    x_k = train.s_x[k]
    estimate = np.zeros((x_k.m, x_k.s))
    mismatch = 0.0
    for j, w in enumerate(ws):
        t_j = _coefficients(train.s_x[j], w, a_mats[j])
        estimate += t_j @ w.data
        half_pinv = pseudo_inverse(sym_sqrt(cov(w, w)))
        mismatch += frob_norm_sq((cov(train.s_x[j], w) - cov(x_k, w)) @ half_pinv)
    lhs = float(np.sum((x_k.data - estimate) ** 2)) / x_k.s
    rhs = optimal_error(x_k, ws) + mismatch
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs)}


def error_upper_bound(
    optimal_err: float, inputs: ErrorBoundInputs, w_energies
) -> float:
    """A-priori bound on the filter error for any member of the signal family.

    Adds to the optimal error one penalty per term for the reference-side
    covering radius (scaled by the term's energy and inverse-covariance mass)
    and one for the observation-side radius (scaled by the Lipschitz and gain
    constants), plus the free-term leakage outside each covariance range:

        bound = optimal_err
                + sum_k (eps_x * w_energy_k * E_k + eps_y * D_k) + C,
        E_k = ||(C(w_k, w_k)^{1/2})^+||_F^2,
        D_k = lambda_e * lambda_q * r_hat_k
              * (x_energy * E_k + ||C(x_k, w_k)||_F^2) * ||C(w_k, w_k)^{1/2}||_F^2,
        C   = sum_k ||A_k (I - C(w_k, w_k) C(w_k, w_k)^+)||_F^2
              * ||C(w_k, w_k)^{1/2}||_F^2.
    """
    if not (np.isfinite(optimal_err) and optimal_err >= 0.0):
        raise InvalidInput("optimal_err must be finite and nonnegative")
    w_energies = tuple(float(e) for e in w_energies)
    if len(w_energies) != len(inputs.r_hat):
        raise InvalidInput("need one energy per term")
    if not all(np.isfinite(e) and e >= 0.0 for e in w_energies):
        raise InvalidInput("term energies must be finite and nonnegative")
    total = optimal_err
    for k, (eww, exw) in enumerate(zip(inputs.w_covs, inputs.xw_covs)):
        half = sym_sqrt(eww)
        e_k = frob_norm_sq(pseudo_inverse(half))
        half_sq = frob_norm_sq(half)
        d_k = (
            inputs.lambda_e
            * inputs.lambda_q
            * inputs.r_hat[k]
            * (inputs.x_energy * e_k + frob_norm_sq(exw))
            * half_sq
        )
        total += inputs.eps_x * w_energies[k] * e_k + inputs.eps_y * d_k
        if inputs.a_mats is not None:
            eww_pinv = pseudo_inverse(eww)
            leak = inputs.a_mats[k] @ (np.eye(eww.shape[0]) - eww @ eww_pinv)
            total += frob_norm_sq(leak) * half_sq
    return float(total)


def greedy_eps_net(pool, eps: float) -> EpsNet:
    """Greedy cover of a pool of aligned ensembles at squared radius ``eps``.

    Scans the pool in order and promotes every candidate not within ``eps``
    of an existing center (ties break toward the lowest index). The result
    covers the pool by construction; ``achieved_eps`` is the realized
    max-min squared distance.
    """
    pool = tuple(pool)
    if not pool:
        raise InvalidInput("pool must be nonempty")
    if not (np.isfinite(eps) and eps > 0.0):
        raise InvalidInput("eps must be positive")
    centers: list[int] = []
    for idx, cand in enumerate(pool):
        covered = any(
            ensemble_sq_distance(cand, pool[c]) <= eps for c in centers
        )
        if not covered:
            centers.append(idx)
    achieved = max(
        min(ensemble_sq_distance(cand, pool[c]) for c in centers) for cand in pool
    )
    return EpsNet(tuple(centers), achieved)


def net_radius(pool, center_indices) -> float:
    """Max over the pool of the min squared distance to the given centers."""
    pool = tuple(pool)
    centers = tuple(center_indices)
    if not pool or not centers:
        raise InvalidInput("pool and centers must be nonempty")
    return max(
        min(ensemble_sq_distance(cand, pool[c]) for c in centers) for cand in pool
    )


def param_to_signal_eps(eps_delta: float, lambda_x: float) -> float:
    """Covering radius induced on signals by a parameter-space net.

    A parameter net of squared radius ``eps_delta`` yields a signal net of
    squared radius ``lambda_x * eps_delta`` when the family is Lipschitz in
    its parameter with constant ``lambda_x``.
    """
    if eps_delta < 0.0 or lambda_x < 0.0:
        raise InvalidInput("eps_delta and lambda_x must be nonnegative")
    return lambda_x * eps_delta


def load_bound_constants(path) -> dict:
    """Read bound constants from a JSON file.

    Expected keys: ``eps_x``, ``eps_y``, ``lambda_e``, ``lambda_q``,
    ``r_hat`` (list, one entry per term) and ``x_energy``. Values must be
    nonnegative and finite.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON") from exc
    required = ("eps_x", "eps_y", "lambda_e", "lambda_q", "r_hat", "x_energy")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ParseError(f"{path}: missing bound constant {missing[0]!r}")
    out = {k: doc[k] for k in required}
    scalars = [out[k] for k in ("eps_x", "eps_y", "lambda_e", "lambda_q", "x_energy")]
    try:
        values = [float(v) for v in scalars] + [float(v) for v in out["r_hat"]]
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: bound constants must be numbers") from exc
    if not all(np.isfinite(v) and v >= 0.0 for v in values):
        raise ParseError(f"{path}: bound constants must be finite and nonnegative")
    out["r_hat"] = [float(v) for v in out["r_hat"]]
    return out


def probe_transform_gain(q_specs, seq, index_pairs) -> float:
    """Largest observed squared-distance ratio of the transforms over index pairs.

    A crude empirical stand-in for the transform Lipschitz constant; it is a
    lower bound on the true constant.
    """
    worst = 0.0
    for i1, i2 in index_pairs:
        base = ensemble_sq_distance(seq[i1], seq[i2])
        if base <= 0.0:
            continue
        for q in q_specs:
            moved = ensemble_sq_distance(
                apply_q(q, seq, i1), apply_q(q, seq, i2)
            )
            worst = max(worst, moved / base)
    return worst


def probe_inverse_cov_sensitivity(cascade_pairs) -> float:
    """Largest observed ratio of pseudo-inverse covariance change to output change.

    ``cascade_pairs`` iterates over pairs of cascade-output lists taken at two
    inputs; for matching terms a and b the probe measures
    ``||C(a,a)^+ - C(b,b)^+||_F^2 / dist(a, b)`` and keeps the maximum. A
    lower bound on the true sensitivity constant.
    """
    worst = 0.0
    for ws_a, ws_b in cascade_pairs:
        for a, b in zip(ws_a, ws_b):
            base = ensemble_sq_distance(a, b)
            if base <= 0.0:
                continue
            moved = frob_norm_sq(pseudo_inverse(cov(a, a)) - pseudo_inverse(cov(b, b)))
            worst = max(worst, moved / base)
    return worst


def probe_stage_gains(v_lists, w_lists) -> list[float]:
    """Per-term max observed output/input energy ratio of the deflation stages.

    A lower bound on each stage's squared operator gain.
    """
    if not v_lists or not w_lists:
        raise InvalidInput("need at least one cascade sample")
    p = len(v_lists[0])
    gains = [0.0] * p
    for vs, ws in zip(v_lists, w_lists):
        for k in range(p):
            base = energy(vs[k])
            if base > 0.0:
                gains[k] = max(gains[k], energy(ws[k]) / base)
    return gains
