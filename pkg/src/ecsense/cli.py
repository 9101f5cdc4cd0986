"""Command-line experiment runner.

Subcommands map one-to-one onto the package's headline experiments; every
run is fully determined by its flags (seeded streams, fixed reduction
order), so identical argv produces byte-identical CSV no matter how many
worker threads are used.

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import estimate, oracle, protocol
from .hilbert import Operator, StateVector, propagator
from .noise import DampingModel, effective_hamiltonian, step_no_jump
from .protocol import ProtocolParams

MODE_FLAGS = {"drive": "continuous_drive", "echo": "pulsed_echo"}

#: built-in sweep grids
DT_GRID = (4e-3, 2e-3, 1e-3, 5e-4)
ETA_GRID = (0.0, 0.5, 0.9, 0.99)

#: single-qubit compensation demo amplitudes
DEMO_ALPHA, DEMO_BETA = 0.6, 0.8

SUBCOMMANDS = ("validate", "decay-demo", "sense", "sweep-dt", "sweep-eta",
               "sigma-z-demo")


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    params: ProtocolParams
    output_path: str | None
    threads: int


def _add_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--gamma", type=float, default=1.0,
                    help="damping rate (amplitude decay e^{-gamma t})")
    sp.add_argument("--g", type=float, default=0.3, help="signal strength")
    sp.add_argument("--phi", type=float, default=0.0, help="encoding angle")
    sp.add_argument("--dt", type=float, default=1e-3, help="cycle duration")
    sp.add_argument("--t-final", type=float, default=2.0, help="total time")
    sp.add_argument("--eta", type=float, default=1.0,
                    help="detection efficiency in [0, 1]")
    sp.add_argument("--mode", choices=sorted(MODE_FLAGS), default="drive",
                    help="protection scheme between corrections")
    sp.add_argument("--trajectories", type=int, default=1000,
                    help="ensemble size")
    sp.add_argument("--seed", type=int, default=42, help="master seed")
    sp.add_argument("--out", default=None,
                    help="CSV output path (default <subcommand>.csv)")
    sp.add_argument("--threads", default="auto",
                    help="worker threads, a count or 'auto'")


def parse_args(argv: list[str]) -> RunConfig:
    parser = argparse.ArgumentParser(
        prog="ecsense",
        description="trajectory simulation of error-corrected phase sensing",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    helps = {
        "validate": "run the built-in oracle and invariant checks",
        "decay-demo": "single-qubit compensated no-jump decay",
        "sense": "ensemble sensing run (fringe, fidelity, jump counts)",
        "sweep-dt": "finite-step error scaling over the built-in dt grid",
        "sweep-eta": "coherence time vs detection efficiency",
        "sigma-z-demo": "echo pulses averaging away a sigma_z signal",
    }
    for name in SUBCOMMANDS:
        _add_flags(sub.add_parser(name, help=helps[name]))
    ns = parser.parse_args(argv)

    if ns.threads == "auto":
        threads = os.cpu_count() or 1
    else:
        try:
            threads = int(ns.threads)
        except ValueError:
            raise ValueError(f"--threads: expected a count or 'auto', got {ns.threads!r}")
        if threads < 1:
            raise ValueError(f"--threads: must be >= 1, got {threads}")

    params = ProtocolParams(
        gamma=ns.gamma,
        g=ns.g,
        phi=ns.phi,
        dt=ns.dt,
        t_final=ns.t_final,
        eta=ns.eta,
        mode=MODE_FLAGS[ns.mode],
        n_traj=ns.trajectories,
        master_seed=ns.seed,
    )
    return RunConfig(ns.subcommand, params, ns.out, threads)


def _fmt(x) -> str:
    return format(float(x), ".12g")


def _write_csv(path: str, header: list[str], rows, trailing: str | None = None) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
            if trailing is not None:
                fh.write(trailing + "\n")
    except OSError as exc:
        raise ValueError(f"--out: cannot write {path}: {exc}") from exc


def _run_decay_demo(cfg: RunConfig, path: str) -> str:
    p = cfg.params
    h = protocol.compensation_hamiltonian_single(p.gamma, DEMO_ALPHA, DEMO_BETA)
    h_eff = effective_hamiltonian(h, DampingModel(p.gamma, target=0))
    u = propagator(h_eff, p.dt).entries
    ref = np.array([DEMO_ALPHA, DEMO_BETA], dtype=np.complex128)
    psi = ref.copy()
    rows = [(0.0, 1.0, 0.0)]
    worst = 0.0
    for k in range(1, p.n_cycles + 1):
        psi = u @ psi
        nrm = float(np.linalg.norm(psi))
        direction_error = 1.0 - abs(np.vdot(ref, psi / nrm)) ** 2
        worst = max(worst, direction_error)
        rows.append((k * p.dt, nrm, direction_error))
    _write_csv(path, ["time", "norm", "direction_error"], rows)
    want = math.exp(-p.gamma * DEMO_BETA ** 2 * p.t_final)
    return (f"direction_error_max={worst:.3e} "
            f"norm_final={rows[-1][1]:.9f} expected={want:.9f}")


def _run_sense(cfg: RunConfig, path: str) -> str:
    p = cfg.params
    n = p.n_cycles
    every = -(-n // 200)
    snaps = np.arange(every, n + 1, every, dtype=np.int64)
    if snaps[-1] != n:
        snaps = np.append(snaps, n)
    res = protocol.run_ensemble(p, snaps, threads=cfg.threads)
    rows = zip(res.times, res.mean_x_logical, res.mean_fidelity,
               res.mean_jumps, res.mean_detected)
    _write_csv(path, ["time", "mean_x_logical", "mean_fidelity",
                      "n_jumps_mean", "n_detected_mean"], rows)
    return (f"final_visibility={res.envelope[-1]:.6f} "
            f"final_fidelity={res.mean_fidelity[-1]:.6f}")


def _run_sweep_dt(cfg: RunConfig, path: str) -> str:
    sw = estimate.dt_scaling_sweep(cfg.params, DT_GRID, threads=cfg.threads)
    trailing = f"# slope={_fmt(sw.fit_slope)}, intercept={_fmt(sw.fit_intercept)}"
    _write_csv(path, ["dt", "mean_infidelity", "stderr_infidelity"],
               zip(sw.x_values, sw.y_values, sw.y_stderr), trailing)
    return f"slope={sw.fit_slope:.4f} intercept={sw.fit_intercept:.4f}"


def _run_sweep_eta(cfg: RunConfig, path: str) -> str:
    sw = estimate.eta_coherence_sweep(cfg.params, ETA_GRID, threads=cfg.threads)
    _write_csv(path, ["eta", "t_eff", "censored"],
               zip(sw.x_values, sw.y_values, sw.censored))
    parts = ", ".join(
        f"t_eff({e:g})={t:.3g}{'*' if c else ''}"
        for e, t, c in zip(sw.x_values, sw.y_values, sw.censored)
    )
    return parts + (" (* censored at horizon)" if sw.censored.any() else "")


def _run_sigma_z(cfg: RunConfig, path: str) -> str:
    p = cfg.params
    times, phases = estimate.sigma_z_failure_demo(
        p.g, p.gamma, p.dt, p.t_final, return_series=True)
    rows = [(0.0, 0.0)] + list(zip(times, phases))
    _write_csv(path, ["time", "accumulated_phase"], rows)
    bound = 2.0 * p.g * p.dt
    return f"|phase|={abs(phases[-1]):.3e} bound=2*g*dt={bound:.3e}"


# --- validate ---------------------------------------------------------------

def _chk_propagator() -> str:
    rng = np.random.default_rng(0)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = Operator.hermitian((m + m.conj().T) / 2)
    u1 = propagator(h, 0.05).entries
    u2 = propagator(h, 0.10).entries
    dev_c = np.abs(u1 @ u1 - u2).max()
    dev_u = np.abs(u1 @ u1.conj().T - np.eye(4)).max()
    assert dev_c < 1e-12 and dev_u < 1e-12, f"composition {dev_c:.1e}, unitarity {dev_u:.1e}"
    return f"composition {dev_c:.1e}, unitarity {dev_u:.1e}"


def _chk_no_jump_decay() -> str:
    worst = 0.0
    for gamma in (0.5, 1.0):
        for alpha, beta in ((1, 0), (0, 1), (0.6, 0.8), (2 ** -0.5, 2 ** -0.5)):
            psi = StateVector((2,), np.array([alpha, beta], dtype=np.complex128))
            h_eff = effective_hamiltonian(Operator(np.zeros((2, 2))),
                                          DampingModel(gamma))
            cum = 0.0
            for _ in range(100):
                psi, pj = step_no_jump(psi, h_eff, 0.005)
                cum += pj
            branch, weight = oracle.analytic_damping(alpha, beta, gamma, 0.5)
            da = np.abs(psi.amps - branch.amps).max()
            dw = abs(cum - weight)
            worst = max(worst, da, dw)
    assert worst < 1e-10, f"deviation {worst:.1e}"
    return f"amplitudes and jump weight match to {worst:.1e}"


def _chk_codewords() -> str:
    worst = 0.0
    for phi in (0.0, np.pi / 4, np.pi / 2, 1.234):
        code = protocol.CodeWords(phi)
        h = protocol.signal_hamiltonian(0.3, phi)
        for ket, ev in ((code.zero, 0.3), (code.one, -0.3)):
            worst = max(worst, np.abs(h.entries @ ket.amps - ev * ket.amps).max())
    assert worst < 1e-12, f"residual {worst:.1e}"
    return f"eigenstate residual {worst:.1e}"


def _chk_compensation_single() -> str:
    gamma = 1.0
    h = protocol.compensation_hamiltonian_single(gamma, DEMO_ALPHA, DEMO_BETA)
    h_eff = effective_hamiltonian(h, DampingModel(gamma))
    u = propagator(h_eff, 0.01).entries
    psi = np.array([DEMO_ALPHA, DEMO_BETA], dtype=np.complex128)
    ref = psi.copy()
    for _ in range(100):
        psi = u @ psi
    nrm = np.linalg.norm(psi)
    direction_error = 1.0 - abs(np.vdot(ref, psi / nrm)) ** 2
    norm_dev = abs(nrm - math.exp(-gamma * DEMO_BETA ** 2 * 1.0))
    assert direction_error <= 1e-6 and norm_dev <= 1e-6, \
        f"direction {direction_error:.1e}, norm {norm_dev:.1e}"
    return f"direction error {direction_error:.1e}, norm deviation {norm_dev:.1e}"


def _chk_compensation_encoded() -> str:
    worst = 0.0
    for phi in (0.0, 0.7):
        pp = ProtocolParams(gamma=1.0, g=0.0, phi=phi, dt=0.01, t_final=1.0)
        u = protocol.cycle_propagator(pp).entries
        for ket in (pp.code.zero, pp.code.one):
            psi = ket.amps.copy()
            for _ in range(100):
                psi = u @ psi
            nrm = np.linalg.norm(psi)
            worst = max(worst,
                        1.0 - abs(np.vdot(ket.amps, psi / nrm)) ** 2,
                        abs(nrm - math.exp(-0.5)))
    assert worst <= 1e-6, f"deviation {worst:.1e}"
    return f"codeword stationarity and e^(-gamma t/2) norm to {worst:.1e}"


def _chk_echo_identity() -> str:
    pp = ProtocolParams(gamma=0.0, g=0.3, phi=0.0, dt=0.01, t_final=1.0,
                        mode="pulsed_echo")
    u = protocol.cycle_propagator(pp).entries
    h = protocol.coherent_cycle_hamiltonian(pp)
    v = propagator(h, pp.dt).entries
    # compare up to global phase via the maximal overlap of columns
    phase = (v.conj() * u).sum()
    phase /= abs(phase)
    dev = np.abs(u - phase * v).max()
    assert dev <= 1e-10, f"deviation {dev:.1e}"
    return f"gamma=0 echo cycle equals signal propagator to {dev:.1e}"


def _chk_echo_stationarity() -> str:
    worst = 0.0
    for mode in protocol.MODES:
        pp = ProtocolParams(gamma=1.0, g=0.0, phi=0.4, dt=0.01, t_final=1.0,
                            mode=mode)
        u = protocol.cycle_propagator(pp).entries
        psi = pp.code.zero.amps.copy()
        for _ in range(100):
            psi = u @ psi
        psi /= np.linalg.norm(psi)
        worst = max(worst, 1.0 - abs(np.vdot(pp.code.zero.amps, psi)) ** 2)
    assert worst <= 1e-6, f"direction error {worst:.1e}"
    return f"g=0 codeword direction preserved to {worst:.1e}"


def _chk_recovery() -> str:
    worst = 0.0
    for phi in (0.0, np.pi / 4, 1.234):
        v = protocol.recovery_unitary(protocol.CodeWords(phi)).entries
        worst = max(worst, np.abs(v @ v.conj().T - np.eye(4)).max())
    assert worst <= 1e-10, f"unitarity deviation {worst:.1e}"
    return f"unitarity deviation {worst:.1e}"


def _chk_forced_jump() -> str:
    worst = 0.0
    for mode in protocol.MODES:
        pp = ProtocolParams(gamma=1.0, g=0.3, phi=0.0, dt=1e-3, t_final=2.0,
                            mode=mode)
        ops = protocol.cycle_operators(pp)
        psi = protocol.encode(2 ** -0.5, 2 ** -0.5, pp.code).amps
        j = ops.cells // 2
        w = ops.b_ops[j] @ (ops.jump_op @ (ops.a_ops[j] @ psi))
        w = ops.corr_ops[j] @ w
        w /= np.linalg.norm(w)
        ideal = protocol.ideal_state(pp, pp.dt).amps
        infid = 1.0 - abs(np.vdot(ideal, w)) ** 2
        worst = max(worst, infid)
    bound = 10.0 * (1.0 + 0.3) * 1e-3
    assert worst <= bound, f"per-event infidelity {worst:.2e} > {bound:.2e}"
    return f"per-event infidelity {worst:.2e} <= {bound:.2e}"


def _chk_noiseless_run() -> str:
    pp = ProtocolParams(gamma=0.0, g=0.3, phi=0.2, dt=1e-3, t_final=1.0,
                        n_traj=2, master_seed=1)
    res = protocol.run_ensemble(pp, [pp.n_cycles])
    dev = abs(res.mean_fidelity[-1] - 1.0)
    assert dev <= 1e-12, f"fidelity deviation {dev:.1e}"
    return f"noiseless fidelity deviation {dev:.1e}"


def _chk_phase() -> str:
    pp = ProtocolParams(gamma=1.0, g=0.3, phi=0.0, dt=1e-3, t_final=1.0,
                        n_traj=200, master_seed=6)
    res = protocol.run_ensemble(pp, [pp.n_cycles], threads=4)
    got = float(np.angle(res.mean_coherence[-1]))
    dev = abs(got - 2 * pp.g * pp.t_final)
    assert dev <= 5e-2, f"phase deviation {dev:.3f}"
    return f"accumulated phase {got:.4f} (target {2 * pp.g * pp.t_final:.4f})"


def _chk_detection_fraction() -> str:
    pp = ProtocolParams(gamma=1.0, g=0.3, phi=0.0, dt=1e-3, t_final=1.0,
                        eta=0.7, n_traj=2000, master_seed=8)
    res = protocol.run_ensemble(pp, [pp.n_cycles], threads=4)
    frac = res.mean_detected[-1] / res.mean_jumps[-1]
    tol = 4.0 * math.sqrt(0.7 * 0.3 / (pp.n_traj * res.mean_jumps[-1]))
    assert abs(frac - 0.7) <= tol, f"detected fraction {frac:.4f} vs 0.7 +- {tol:.4f}"
    return f"detected fraction {frac:.4f} (eta 0.7, tolerance {tol:.4f})"


def _chk_jump_times() -> str:
    pp = ProtocolParams(gamma=1.0, g=0.3, phi=0.0, dt=2e-3, t_final=1.0,
                        n_traj=4000, master_seed=12)
    ops = protocol.cycle_operators(pp)
    first = []
    for i in range(pp.n_traj):
        rec = protocol.run_trajectory(pp, i, snapshot_cycles=[pp.n_cycles], ops=ops)
        if rec.events:
            first.append(rec.events[0].time)
    first = np.asarray(first)
    scale = 1.0 - math.exp(-pp.gamma * pp.t_final)

    def cdf(s):
        return (1.0 - np.exp(-pp.gamma * s)) / scale

    d = stats.kstest(first, cdf).statistic
    crit = 1.628 / math.sqrt(first.size)  # 1% level
    assert d <= crit, f"KS D={d:.4f} > {crit:.4f} (n={first.size})"
    return f"first-jump times KS D={d:.4f} (1% critical {crit:.4f}, n={first.size})"


def _chk_unfolding() -> str:
    pp = ProtocolParams(gamma=1.0, g=0.3, phi=0.0, dt=1e-3, t_final=2.0,
                        n_traj=3000, master_seed=14, apply_corrections=False)
    cyc = np.array([700, 1400, 2000], dtype=np.int64)
    res = protocol.run_ensemble(pp, [pp.n_cycles], state_cycles=cyc, threads=4)
    model = oracle.protocol_model(pp)
    rho = oracle.DensityMatrix.from_state(
        protocol.encode(2 ** -0.5, 2 ** -0.5, pp.code))
    worst = 0.0
    prev = 0
    for i, c in enumerate(cyc):
        rho = oracle.evolve_cycles(rho, model, int(c) - prev, substeps=2)
        prev = int(c)
        avg = oracle.average_states(res.states[:, i, :])
        worst = max(worst, oracle.trace_distance(avg, rho))
    assert worst <= 0.035, f"trace distance {worst:.4f}"
    return f"uncorrected ensemble vs master equation, trace distance {worst:.4f}"


def _chk_threads() -> str:
    pp = ProtocolParams(gamma=1.0, g=0.3, phi=0.0, dt=1e-3, t_final=0.5,
                        eta=0.8, n_traj=256, master_seed=17)
    snaps = np.arange(100, 501, 100, dtype=np.int64)
    a = protocol.run_ensemble(pp, snaps, threads=1)
    b = protocol.run_ensemble(pp, snaps, threads=4)
    same = (np.array_equal(a.mean_coherence, b.mean_coherence)
            and np.array_equal(a.mean_fidelity, b.mean_fidelity)
            and np.array_equal(a.mean_jumps, b.mean_jumps))
    assert same, "thread counts disagree"
    return "1-thread and 4-thread ensembles byte-identical"


def _chk_oracle_sanity() -> str:
    pp = ProtocolParams(gamma=1.0, g=0.3, phi=0.0, dt=1e-3, t_final=2.0,
                        mode="pulsed_echo")
    model = oracle.protocol_model(pp)
    rho = oracle.DensityMatrix.from_state(
        protocol.encode(2 ** -0.5, 2 ** -0.5, pp.code))
    rho = oracle.evolve_cycles(rho, model, 200, substeps=2)
    tr = abs(complex(np.trace(rho.entries)) - 1.0)
    lo = float(np.linalg.eigvalsh(rho.entries).min())
    pur = rho.purity()
    assert tr <= 1e-9 and lo >= -1e-8 and pur <= 1.0 + 1e-9, \
        f"trace {tr:.1e}, min eig {lo:.1e}, purity {pur:.6f}"
    return f"trace drift {tr:.1e}, min eigenvalue {lo:.1e}, purity {pur:.4f}"


def _chk_sigma_z() -> str:
    phase = abs(estimate.sigma_z_failure_demo(0.3, 1.0, 0.01, 1.0))
    assert phase <= 2 * 0.3 * 0.01, f"phase {phase:.2e}"
    pp = ProtocolParams(gamma=0.0, g=0.3, phi=0.0, dt=0.01, t_final=1.0,
                        mode="pulsed_echo")
    u = protocol.cycle_propagator(pp).entries
    psi = protocol.encode(2 ** -0.5, 2 ** -0.5, pp.code).amps.copy()
    for _ in range(pp.n_cycles):
        psi = u @ psi
    a = np.vdot(pp.code.zero.amps, psi)
    b = np.vdot(pp.code.one.amps, psi)
    contrast = float(np.angle(a * np.conj(b)))
    assert abs(contrast - 0.6) <= 1e-6, f"contrast phase {contrast:.6f}"
    return f"sigma_z phase {phase:.1e} vs sigma_x contrast {contrast:.6f}"


CHECKS = (
    ("propagator-composition", _chk_propagator),
    ("no-jump-closed-form", _chk_no_jump_decay),
    ("codeword-eigenstates", _chk_codewords),
    ("compensation-single", _chk_compensation_single),
    ("compensation-encoded", _chk_compensation_encoded),
    ("echo-identity", _chk_echo_identity),
    ("g0-stationarity", _chk_echo_stationarity),
    ("recovery-unitarity", _chk_recovery),
    ("forced-jump-residual", _chk_forced_jump),
    ("noiseless-fidelity", _chk_noiseless_run),
    ("phase-accumulation", _chk_phase),
    ("detection-fraction", _chk_detection_fraction),
    ("jump-time-distribution", _chk_jump_times),
    ("unfolding-equivalence", _chk_unfolding),
    ("thread-reproducibility", _chk_threads),
    ("oracle-sanity", _chk_oracle_sanity),
    ("sigma-z-cancellation", _chk_sigma_z),
)


def _run_validate(cfg: RunConfig) -> int:
    failures = 0
    for name, fn in CHECKS:
        try:
            detail = fn()
            print(f"PASS {name}: {detail}")
        except Exception as exc:  # noqa: BLE001 - report and continue
            failures += 1
            print(f"FAIL {name}: {exc}")
    print(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return 0 if failures == 0 else 1


def run(config: RunConfig) -> int:
    """Execute one subcommand; returns the process exit code."""
    started = time.perf_counter()
    if config.subcommand == "validate":
        code = _run_validate(config)
        print(f"validate: done in {time.perf_counter() - started:.1f}s")
        return code

    handlers = {
        "decay-demo": _run_decay_demo,
        "sense": _run_sense,
        "sweep-dt": _run_sweep_dt,
        "sweep-eta": _run_sweep_eta,
        "sigma-z-demo": _run_sigma_z,
    }
    path = config.output_path or f"{config.subcommand}.csv"
    summary = handlers[config.subcommand](config, path)
    elapsed = time.perf_counter() - started
    print(f"{config.subcommand}: {summary} -> {path} ({elapsed:.1f}s)")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = sys.argv[1:] if argv is None else argv
    try:
        config = parse_args(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
