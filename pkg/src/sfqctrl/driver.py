"""Experiment orchestration: configs, gate library, runs and data files.

Configs are flat ``key = value`` text files; missing keys fall back to the
transmon defaults baked into SystemConfig.  Each optimization run emits the
optimized pulse sequence as a one-line barcode string, per-step level
populations, the trust-region convergence history and a one-line summary.
Duration sweeps rerun the full multi-restart protocol on a grid of pulse
counts and collect the best objective values per duration.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adjoint import grad_total
from .errors import ParseError, ValidationError
from .model import (
    SystemConfig,
    TWO_PI,
    precompute_propagators,
    relaxed_propagator,
    _integrate_amplitude,
)
from .objective import (
    ForwardTrajectory,
    GateTarget,
    PulseSequence,
    guard_weight_vector,
    infidelity,
    leakage,
    propagate,
)
from .trustregion import MultiRestartResult, multi_restart

GATE_ALIASES = {
    "h": "H",
    "x": "X",
    "y": "Y",
    "z": "Z",
    "i": "Identity",
    "id": "Identity",
    "identity": "Identity",
}

_BUILTIN_GATES = {
    "H": np.array([[1, 1], [1, -1]]) / np.sqrt(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.array([[1, 0], [0, -1]]),
    "Identity": np.eye(2),
}

_CONFIG_KEYS = (
    "omega_over_2pi_ghz",
    "xi_over_2pi_ghz",
    "tau_p_ns",
    "delta_ns",
    "theta_over_pi",
    "n_levels",
    "n_essential",
    "guard_weights",
    "c1",
    "substeps",
    "gate",
    "p",
    "n_restarts",
    "seed",
    "rho_hat",
    "delta0",
)


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one optimization run."""

    system: SystemConfig
    gate: str = "H"
    p: int = 1600
    n_restarts: int = 10
    seed: int = 1234
    rho_hat: float = 0.75
    delta0: int | None = None
    output_dir: Path = Path(".")
    sweep: tuple[int, int, int] | None = None

    def __post_init__(self):
        if self.p < 1:
            raise ValidationError("pulse count must be positive", key="p")
        if self.n_restarts < 1:
            raise ValidationError("need at least one restart", key="n_restarts")
        if not 0.0 < self.rho_hat < 1.0:
            raise ValidationError("acceptance ratio must lie in (0, 1)", key="rho_hat")
        if self.delta0 is not None and self.delta0 < 1:
            raise ValidationError("initial radius must be at least 1", key="delta0")
        if self.sweep is not None:
            p_min, p_max, stride = self.sweep
            if p_min < 1 or p_max < p_min or stride < 1:
                raise ValidationError("sweep grid must satisfy 1 <= p_min <= p_max, stride >= 1", key="sweep")

    @property
    def duration_ns(self) -> float:
        return self.p * self.system.tau_p


def _parse_value(key: str, raw: str, line_no: int):
    try:
        if key in ("n_levels", "n_essential", "substeps", "p", "n_restarts", "seed", "delta0"):
            return int(raw)
        if key == "guard_weights":
            return tuple(float(tok) for tok in raw.replace(",", " ").split())
        if key == "gate":
            return raw
        return float(raw)
    except ValueError as exc:
        raise ParseError(f"cannot parse value for '{key}': {raw!r} ({exc})", line_no) from None


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment, blank lines are skipped."""
    values: dict = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(f"expected 'key = value', got {stripped!r}", line_no)
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _CONFIG_KEYS:
            raise ParseError(f"unknown key '{key}'", line_no)
        if not raw:
            raise ParseError(f"empty value for '{key}'", line_no)
        values[key] = _parse_value(key, raw, line_no)
    return values


def spec_from_values(values: dict, output_dir: Path | None = None) -> ExperimentSpec:
    """Build an ExperimentSpec from parsed config values plus defaults."""
    base = SystemConfig()
    system = SystemConfig(
        omega=TWO_PI * values.get("omega_over_2pi_ghz", base.omega / TWO_PI),
        xi=TWO_PI * values.get("xi_over_2pi_ghz", base.xi / TWO_PI),
        tau_p=values.get("tau_p_ns", base.tau_p),
        delta=values.get("delta_ns", base.delta),
        theta=np.pi * values.get("theta_over_pi", base.theta / np.pi),
        n_levels=values.get("n_levels", base.n_levels),
        n_essential=values.get("n_essential", base.n_essential),
        guard_weights=values.get("guard_weights", base.guard_weights),
        c1=values.get("c1", base.c1),
        substeps=values.get("substeps", base.substeps),
    )
    return ExperimentSpec(
        system=system,
        gate=values.get("gate", "H"),
        p=values.get("p", 1600),
        n_restarts=values.get("n_restarts", 10),
        seed=values.get("seed", 1234),
        rho_hat=values.get("rho_hat", 0.75),
        delta0=values.get("delta0"),
        output_dir=output_dir if output_dir is not None else Path("."),
    )


def load_config(path: str | Path, output_dir: Path | None = None) -> ExperimentSpec:
    """Read a config file into an ExperimentSpec, validating all invariants."""
    text = Path(path).read_text()
    return spec_from_values(parse_config_text(text), output_dir=output_dir)


def _read_matrix_file(path: Path) -> np.ndarray:
    rows = []
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        try:
            rows.append([complex(tok) for tok in stripped.split()])
        except ValueError as exc:
            raise ParseError(f"cannot parse matrix entry: {exc}", line_no) from None
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ParseError(f"matrix file {path} must hold a square complex matrix")
    return np.array(rows, dtype=complex)


def gate_target(gate: str, n_levels: int) -> GateTarget:
    """Look up a built-in gate by name, or load a custom unitary from a file path."""
    name = GATE_ALIASES.get(gate.lower(), gate)
    if name in _BUILTIN_GATES:
        return GateTarget.from_essential(_BUILTIN_GATES[name], n_levels)
    path = Path(gate)
    if not path.is_file():
        raise ValidationError(f"unknown gate '{gate}' and no such file", key="gate")
    return GateTarget.from_essential(_read_matrix_file(path), n_levels)


def _format_row(values) -> str:
    return ",".join(f"{v:.12e}" if isinstance(v, float) else str(v) for v in values)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    lines.extend(_format_row(row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def population_rows(alpha: PulseSequence, props, cfg: SystemConfig) -> tuple[list[str], list[list]]:
    """Level populations |U_j[b, a]|^2 at each step boundary, one row per time."""
    traj = propagate(alpha, props, store_all=True)
    n, e = cfg.n_levels, cfg.n_essential
    header = ["time_ns"] + [f"pop_{a}_{b}" for a in range(e) for b in range(n)]
    pops = np.abs(traj.snapshots) ** 2
    rows = []
    for j in range(len(alpha) + 1):
        row: list = [float(j * cfg.tau_p)]
        for a in range(e):
            row.extend(float(pops[j, b, a]) for b in range(n))
        rows.append(row)
    return header, rows


def max_top_level_population(alpha: PulseSequence, props, cfg: SystemConfig) -> float:
    """Largest population of the highest retained level over the trajectory."""
    traj = propagate(alpha, props, store_all=True)
    pops = np.abs(traj.snapshots[:, cfg.n_levels - 1, : cfg.n_essential]) ** 2
    return float(pops.max())


@dataclass(frozen=True)
class OptimizeResult:
    spec: ExperimentSpec
    result: MultiRestartResult | None
    j: float
    j1: float
    j2: float
    max_top_pop: float
    files: dict[str, Path]


def run_optimize(spec: ExperimentSpec, props=None) -> OptimizeResult:
    """Precompute propagators, run the multi-restart protocol and write artifacts.

    Writes pulse_sequence.txt (barcode), populations.csv, convergence.csv and
    summary.txt into spec.output_dir.
    """
    if props is None:
        props = precompute_propagators(spec.system)
    target = gate_target(spec.gate, spec.system.n_levels)
    result = multi_restart(
        spec.n_restarts,
        spec.seed,
        spec.p,
        props,
        target,
        spec.system,
        delta0=spec.delta0,
        rho_hat=spec.rho_hat,
    )
    best = result.best

    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "pulse_sequence": out / "pulse_sequence.txt",
        "populations": out / "populations.csv",
        "convergence": out / "convergence.csv",
        "summary": out / "summary.txt",
    }
    files["pulse_sequence"].write_text(result.best_alpha.to_string() + "\n")

    header, rows = population_rows(result.best_alpha, props, spec.system)
    _write_csv(files["populations"], header, rows)

    conv_rows = [
        [r.iteration, r.j, r.j1, r.j2, r.delta, r.rho, int(r.accepted)]
        for r in result.best_trace.records
    ]
    _write_csv(files["convergence"], ["iter", "J", "J1", "J2", "Delta", "rho", "accepted"], conv_rows)

    top_pop = max_top_level_population(result.best_alpha, props, spec.system)
    summary = (
        f"gate={spec.gate} p={spec.p} T_ns={spec.duration_ns:.6g} "
        f"theta_over_pi={spec.system.theta / np.pi:.8g} restarts={spec.n_restarts} seed={spec.seed} "
        f"best_restart={result.best_index} J={best.objective:.12e} J1={best.j1:.12e} "
        f"J2={best.j2:.12e} max_pop_top_level={top_pop:.12e}"
    )
    files["summary"].write_text(summary + "\n")
    return OptimizeResult(
        spec=spec,
        result=result,
        j=best.objective,
        j1=best.j1,
        j2=best.j2,
        max_top_pop=top_pop,
        files=files,
    )


def run_sweep(spec: ExperimentSpec, props=None) -> tuple[Path, list[list]]:
    """Run the multi-restart protocol for each p on the sweep grid.

    Appends (p, T_ns, best_J1, best_J2, best_J) per grid point to sweep.csv.
    The propagators depend only on the system config and are shared across
    all durations.
    """
    if spec.sweep is None:
        raise ValidationError("sweep bounds are not set", key="sweep")
    p_min, p_max, stride = spec.sweep
    if props is None:
        props = precompute_propagators(spec.system)
    target = gate_target(spec.gate, spec.system.n_levels)

    rows: list[list] = []
    for p in range(p_min, p_max + 1, stride):
        result = multi_restart(
            spec.n_restarts,
            spec.seed,
            p,
            props,
            target,
            spec.system,
            delta0=spec.delta0,
            rho_hat=spec.rho_hat,
        )
        best = result.best
        rows.append([p, float(p * spec.system.tau_p), best.j1, best.j2, best.objective])

    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    _write_csv(path, ["p", "T_ns", "best_J1", "best_J2", "best_J"], rows)
    return path, rows


@dataclass(frozen=True)
class GradCheckReport:
    p_check: int
    step: float
    rel_errors: np.ndarray
    max_rel_error: float
    passed: bool


def fd_gradient(
    alpha: PulseSequence,
    props,
    target: GateTarget,
    cfg: SystemConfig,
    step: float = 1.0e-5,
) -> np.ndarray:
    """Central finite differences of the relaxed objective, one bit at a time.

    Each coordinate replaces its step propagator by the integrated propagator
    at amplitude a_k +/- step (the relaxed chain); all perturbed one-step
    propagators are cached since only four amplitudes ever occur.
    """
    weights = guard_weight_vector(cfg)
    cache: dict[float, np.ndarray] = {}

    def step_propagator(value: float) -> np.ndarray:
        if value not in cache:
            if 0.0 <= value <= 1.0:
                cache[value] = relaxed_propagator(value, cfg)
            else:
                # Central differences at the binary endpoints evaluate just
                # outside [0, 1]; the integrator is analytic in the amplitude.
                cache[value] = _integrate_amplitude(cfg, value)[0]
        return cache[value]

    def chain_objective(k: int, value: float) -> float:
        dim = cfg.n_levels
        u = np.eye(dim, dtype=complex)
        snaps = np.empty((len(alpha) + 1, dim, dim), dtype=complex)
        snaps[0] = u
        for j, bit in enumerate(alpha.bits):
            d = step_propagator(value) if j == k else (props.d1 if bit else props.d0)
            u = d @ u
            snaps[j + 1] = u
        traj = ForwardTrajectory(final=u, snapshots=snaps)
        j1 = infidelity(u, target)
        j2 = leakage(traj, weights, cfg.n_essential)
        return j1 + cfg.c1 * j2

    grad = np.empty(len(alpha))
    for k, bit in enumerate(alpha.bits):
        lo = chain_objective(k, float(bit) - step)
        hi = chain_objective(k, float(bit) + step)
        grad[k] = (hi - lo) / (2.0 * step)
    return grad


def run_grad_check(
    spec: ExperimentSpec,
    p_check: int = 16,
    step: float = 1.0e-5,
    props=None,
    threshold: float = 1.0e-4,
) -> GradCheckReport:
    """Compare the adjoint gradient against central finite differences.

    Draws a seeded random sequence of length p_check, prints per-coordinate
    relative errors (with a 1e-10 absolute floor for near-zero entries) and
    fails when the maximum exceeds the threshold.
    """
    if p_check > 64:
        raise ValidationError("finite differencing beyond p = 64 is too slow", key="p_check")
    if props is None:
        props = precompute_propagators(spec.system)
    target = gate_target(spec.gate, spec.system.n_levels)
    rng = np.random.default_rng(spec.seed)
    alpha = PulseSequence.random(p_check, rng)

    g_adj = grad_total(alpha, props, target, spec.system)
    g_fd = fd_gradient(alpha, props, target, spec.system, step=step)
    floor = 1.0e-10
    rel = np.abs(g_adj - g_fd) / np.maximum(np.abs(g_fd), floor)
    # Coordinates where both gradients sit below the floor carry no signal
    # (identically zero terms, e.g. the leak part under zero weights).
    rel[(np.abs(g_fd) <= floor) & (np.abs(g_adj) <= floor)] = 0.0
    return GradCheckReport(
        p_check=p_check,
        step=step,
        rel_errors=rel,
        max_rel_error=float(rel.max()),
        passed=bool(rel.max() < threshold),
    )


def run_simulate(spec: ExperimentSpec, barcode_path: str | Path, props=None) -> OptimizeResult:
    """Forward-only run of a stored barcode: populations plus objective summary."""
    text = Path(barcode_path).read_text().strip()
    if not text or any(ch not in "01" for ch in text):
        raise ParseError(f"barcode file {barcode_path} must hold one line over {{0,1}}")
    alpha = PulseSequence.from_string(text)
    if props is None:
        props = precompute_propagators(spec.system)
    target = gate_target(spec.gate, spec.system.n_levels)

    traj = propagate(alpha, props, store_all=True)
    j1 = infidelity(traj.final, target)
    j2 = leakage(traj, guard_weight_vector(spec.system), spec.system.n_essential)

    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"populations": out / "populations.csv", "summary": out / "summary.txt"}
    header, rows = population_rows(alpha, props, spec.system)
    _write_csv(files["populations"], header, rows)
    top_pop = max_top_level_population(alpha, props, spec.system)
    summary = (
        f"gate={spec.gate} p={len(alpha)} T_ns={len(alpha) * spec.system.tau_p:.6g} "
        f"J={j1 + spec.system.c1 * j2:.12e} J1={j1:.12e} J2={j2:.12e} "
        f"max_pop_top_level={top_pop:.12e}"
    )
    files["summary"].write_text(summary + "\n")
    return OptimizeResult(
        spec=spec,
        result=None,
        j=j1 + spec.system.c1 * j2,
        j1=j1,
        j2=j2,
        max_top_pop=top_pop,
        files=files,
    )
