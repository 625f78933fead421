"""Forward propagation and the infidelity/leakage objective.

The whole gate evolution is a word in the two-letter alphabet {D0, D1}:
U_j = D_{a_j} ... D_{a_1} for the binary sequence a.  The objective combines
the global-phase-invariant gate infidelity

    J1 = 1 - |<U_p P, V P>_F|^2 / E^2

with a trapezoidal time average of weighted guard-state population,

    J2 = (1/p) [ 1/2<U_0 P, W U_0 P> + sum_{j=1}^{p-1} <U_j P, W U_j P>
                 + 1/2 <U_p P, W U_p P> ],

where P projects onto the first E columns and W is diagonal with positive
entries on guard rows only.  J = J1 + c1*J2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonUnitaryTarget, ValidationError
from .model import PropagatorSet, SystemConfig


@dataclass(frozen=True, eq=False)
class PulseSequence:
    """Binary on/off decisions for p consecutive SFQ steps."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 1 or bits.size < 1:
            raise ValidationError("pulse sequence must be a nonempty 1-D vector", key="bits")
        if not np.all((bits == 0) | (bits == 1)):
            raise ValidationError("pulse sequence entries must be 0 or 1", key="bits")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    def __len__(self) -> int:
        return int(self.bits.size)

    @property
    def p(self) -> int:
        return len(self)

    @classmethod
    def random(cls, p: int, rng: np.random.Generator) -> "PulseSequence":
        return cls(rng.integers(0, 2, size=p))

    @classmethod
    def from_string(cls, text: str) -> "PulseSequence":
        return cls(np.frombuffer(text.strip().encode("ascii"), dtype=np.uint8) - ord("0"))

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)


@dataclass(frozen=True)
class GateTarget:
    """Target unitary V_E on the essential levels, embedded in the full space."""

    v_essential: np.ndarray
    embedded: np.ndarray

    @classmethod
    def from_essential(cls, v_e: np.ndarray, n_levels: int) -> "GateTarget":
        v_e = np.asarray(v_e, dtype=complex)
        e = v_e.shape[0]
        if v_e.shape != (e, e) or e < 1 or e > n_levels:
            raise NonUnitaryTarget(f"target must be square with 1 <= E <= N, got shape {v_e.shape}")
        defect = np.linalg.norm(v_e.conj().T @ v_e - np.eye(e))
        if defect > 1.0e-12:
            raise NonUnitaryTarget(f"target unitarity defect {defect:.3e} exceeds 1e-12")
        embedded = np.zeros((n_levels, n_levels), dtype=complex)
        embedded[:e, :e] = v_e
        v_e.setflags(write=False)
        embedded.setflags(write=False)
        return cls(v_essential=v_e, embedded=embedded)

    @property
    def n_essential(self) -> int:
        return self.v_essential.shape[0]


@dataclass(frozen=True)
class ForwardTrajectory:
    """Solution operators along the pulse sequence; snapshots is None unless stored."""

    final: np.ndarray
    snapshots: np.ndarray | None = None

    @property
    def p(self) -> int:
        if self.snapshots is None:
            raise ValueError("trajectory length unknown without snapshots")
        return self.snapshots.shape[0] - 1


def propagate(alpha: PulseSequence, props: PropagatorSet, store_all: bool = True) -> ForwardTrajectory:
    """Multiply out U_j = D_{a_j} ... D_{a_1}; U_0 = I.

    With store_all the full stack U_0..U_p is kept for leakage and gradient
    evaluation; otherwise only U_p is retained.  Both paths perform the same
    multiplications in the same order, so the finals agree bit-exactly.
    """
    dim = props.dim
    u = np.eye(dim, dtype=complex)
    snaps = None
    if store_all:
        snaps = np.empty((len(alpha) + 1, dim, dim), dtype=complex)
        snaps[0] = u
    for j, bit in enumerate(alpha.bits):
        u = (props.d1 if bit else props.d0) @ u
        if store_all:
            snaps[j + 1] = u
    if snaps is not None:
        snaps.setflags(write=False)
    return ForwardTrajectory(final=u, snapshots=snaps)


def overlap(final: np.ndarray, target: GateTarget) -> complex:
    """Frobenius inner product S_T = <U_p P, V P>_F over the essential columns."""
    e = target.n_essential
    return complex(np.vdot(final[:, :e], target.embedded[:, :e]))


def infidelity(final: np.ndarray, target: GateTarget, n_essential: int | None = None) -> float:
    """Gate infidelity J1 = 1 - |S_T|^2 / E^2; zero iff U_p matches V up to global phase."""
    e = target.n_essential if n_essential is None else n_essential
    s = overlap(final, target)
    return 1.0 - (s.real * s.real + s.imag * s.imag) / (e * e)


def guard_weight_vector(cfg: SystemConfig) -> np.ndarray:
    """Diagonal of W: zeros on the E essential levels, cfg.guard_weights on the rest."""
    w = np.zeros(cfg.n_levels)
    w[cfg.n_essential:] = cfg.guard_weights
    return w


def leakage(traj: ForwardTrajectory, weights: np.ndarray, n_essential: int) -> float:
    """Trapezoidal average of <U_j P, W U_j P>_F over the stored snapshots.

    weights may be the diagonal of W (length N) or the full diagonal matrix.
    """
    if traj.snapshots is None:
        raise ValueError("leakage needs a trajectory propagated with store_all")
    w = np.asarray(weights, dtype=float)
    if w.ndim == 2:
        w = np.diag(w).copy()
    pops = np.abs(traj.snapshots[:, :, :n_essential]) ** 2
    terms = np.einsum("jne,n->j", pops, w)
    p = terms.size - 1
    return float((0.5 * terms[0] + terms[1:-1].sum() + 0.5 * terms[-1]) / p)


def objective_with_trajectory(
    alpha: PulseSequence,
    props: PropagatorSet,
    target: GateTarget,
    cfg: SystemConfig,
) -> tuple[float, float, float, ForwardTrajectory]:
    """Evaluate (J, J1, J2) and return the stored trajectory for gradient reuse."""
    traj = propagate(alpha, props, store_all=True)
    j1 = infidelity(traj.final, target)
    j2 = leakage(traj, guard_weight_vector(cfg), cfg.n_essential)
    return j1 + cfg.c1 * j2, j1, j2, traj


def total_objective(
    alpha: PulseSequence,
    props: PropagatorSet,
    target: GateTarget,
    cfg: SystemConfig,
) -> tuple[float, float, float]:
    """Combined objective J = J1 + c1*J2 together with its two terms."""
    j, j1, j2, _ = objective_with_trajectory(alpha, props, target, cfg)
    return j, j1, j2
