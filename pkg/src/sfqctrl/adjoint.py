"""Relaxed gradient of the objective by backward adjoint sweeps.

Each component of the gradient treats one binary bit as a real variable and
differentiates the propagator product through the cached sensitivities B0/B1.
Writing A_k = D_{a_k} and B_k = dD/dalpha at the bit's value, one backward
pass evaluates every component in O(p) small matrix products:

    Lam_p = V,                Lam_{k-1} = A_k' Lam_k,
    dJ1/da_k = -(2/E^2) Re( conj(S_T) <B_k U_{k-1} P, Lam_k P>_F ),

    Lt_p = 1/2 W U_p P,       Lt_{k-1} = W U_{k-1} P + A_k' Lt_k,
    dJ2/da_k = (2/p) Re <B_k U_{k-1} P, Lt_k>_F,

with Lt kept N x E (already projected).  grad_total runs one fused sweep
carrying both adjoints; the separate sweeps are retained for testing.
"""

from __future__ import annotations

import numpy as np

from .errors import MissingSnapshots
from .model import PropagatorSet, SystemConfig
from .objective import (
    ForwardTrajectory,
    GateTarget,
    PulseSequence,
    guard_weight_vector,
    overlap,
    propagate,
)


def _require_snapshots(traj: ForwardTrajectory) -> np.ndarray:
    if traj.snapshots is None:
        raise MissingSnapshots("gradient sweeps need a trajectory propagated with store_all")
    return traj.snapshots


def _weight_diagonal(weights: np.ndarray) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    return np.diag(w).copy() if w.ndim == 2 else w


def grad_infidelity(
    traj: ForwardTrajectory,
    alpha: PulseSequence,
    props: PropagatorSet,
    target: GateTarget,
) -> np.ndarray:
    """dJ1/da by the backward recursion on Lam."""
    snaps = _require_snapshots(traj)
    e = target.n_essential
    s_conj = np.conj(overlap(traj.final, target))
    scale = -2.0 / (e * e)
    adj = (props.d0.conj().T, props.d1.conj().T)
    sens = (props.b0, props.b1)

    p = len(alpha)
    grad = np.empty(p)
    lam = target.embedded
    for k in range(p, 0, -1):
        bit = alpha.bits[k - 1]
        bu = sens[bit] @ snaps[k - 1][:, :e]
        grad[k - 1] = scale * np.real(s_conj * np.vdot(bu, lam[:, :e]))
        if k > 1:
            lam = adj[bit] @ lam
    return grad


def grad_leakage(
    traj: ForwardTrajectory,
    alpha: PulseSequence,
    props: PropagatorSet,
    weights: np.ndarray,
    n_essential: int,
) -> np.ndarray:
    """dJ2/da by the backward recursion on the projected adjoint Lt."""
    snaps = _require_snapshots(traj)
    w = _weight_diagonal(weights)[:, None]
    e = n_essential
    adj = (props.d0.conj().T, props.d1.conj().T)
    sens = (props.b0, props.b1)

    p = len(alpha)
    grad = np.empty(p)
    lam_t = 0.5 * w * snaps[p][:, :e]
    for k in range(p, 0, -1):
        bit = alpha.bits[k - 1]
        bu = sens[bit] @ snaps[k - 1][:, :e]
        grad[k - 1] = (2.0 / p) * np.real(np.vdot(bu, lam_t))
        if k > 1:
            lam_t = w * snaps[k - 1][:, :e] + adj[bit] @ lam_t
    return grad


def fused_sweep(
    traj: ForwardTrajectory,
    alpha: PulseSequence,
    props: PropagatorSet,
    target: GateTarget,
    weights: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """One backward pass carrying both adjoints; returns (dJ1/da, dJ2/da)."""
    snaps = _require_snapshots(traj)
    e = target.n_essential
    w = _weight_diagonal(weights)[:, None]
    s_conj = np.conj(overlap(traj.final, target))
    scale = -2.0 / (e * e)
    adj = (props.d0.conj().T, props.d1.conj().T)
    sens = (props.b0, props.b1)

    p = len(alpha)
    g1 = np.empty(p)
    g2 = np.empty(p)
    lam = target.embedded
    lam_t = 0.5 * w * snaps[p][:, :e]
    for k in range(p, 0, -1):
        bit = alpha.bits[k - 1]
        bu = sens[bit] @ snaps[k - 1][:, :e]
        g1[k - 1] = scale * np.real(s_conj * np.vdot(bu, lam[:, :e]))
        g2[k - 1] = (2.0 / p) * np.real(np.vdot(bu, lam_t))
        if k > 1:
            a_h = adj[bit]
            lam = a_h @ lam
            lam_t = w * snaps[k - 1][:, :e] + a_h @ lam_t
    return g1, g2


def grad_total(
    alpha: PulseSequence,
    props: PropagatorSet,
    target: GateTarget,
    cfg: SystemConfig,
) -> np.ndarray:
    """Gradient of J = J1 + c1*J2: one forward pass plus one fused backward sweep."""
    traj = propagate(alpha, props, store_all=True)
    g1, g2 = fused_sweep(traj, alpha, props, target, guard_weight_vector(cfg))
    return g1 + cfg.c1 * g2
