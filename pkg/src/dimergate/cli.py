"""``sim`` command-line front end."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .config import RunConfig
from .errors import ConfigError, NumericalError, PreconditionError
from .evolve import propagate, run_gate, u_alpha
from .exchange import calibrate_sweep_u, exact_e_psi_many
from .lattice import scan_phase
from .model import COMPUTATIONAL, BasisTag, StateVector, i_minus, singlet_blocks, track_state
from .noise import DEFAULT_CHI0, NoiseModel, noise_budget_report, noisy_gate_fidelity
from .readout import (
    StoConfig,
    alpha_from_chirality,
    computational_state,
    fidelity_from_decay,
    fit_sto,
    simulate_sto_trace,
    spin_chirality,
)
from .schedules import LinearBiasSweep

log = logging.getLogger("dimergate")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PRECONDITION = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def write_json(path: Path, payload) -> Path:
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# subcommands; each returns a dict describing what it wrote
# ---------------------------------------------------------------------------


def _scan_ratios(cfg: RunConfig) -> np.ndarray:
    return np.linspace(cfg.get("scan", "ratio_min"), cfg.get("scan", "ratio_max"), cfg.get("scan", "points"))


def cmd_spectrum(cfg: RunConfig, out: Path, workers: int = 1) -> dict:
    """Singlet-sector eigenvalues and the singlet-connected exchange energy versus delta/t."""
    p = cfg.hubbard()
    ratios = _scan_ratios(cfg)
    header = ["delta_over_t", "E_1", "E_2", "E_3", "e_psi"]
    rows = []
    if len(ratios):
        t = np.full_like(ratios, p.t)
        evals = np.linalg.eigvalsh(singlet_blocks(t, ratios * p.t, p.u))
        e_psi = exact_e_psi_many(t, ratios * p.t, p.u)
        rows = [(r, *e, j) for r, e, j in zip(ratios, evals, e_psi)]
    return {"csv": str(write_csv(out / "spectrum.csv", header, rows)), "rows": len(rows)}


def cmd_composition(cfg: RunConfig, out: Path, workers: int = 1) -> dict:
    """Fractions of |s>, doublons and |t0> in the tracked state versus delta/t."""
    p = cfg.hubbard()
    ratios = _scan_ratios(cfg)
    header = ["delta_over_t", "P_s", "P_D", "P_t0"]
    rows = []
    if len(ratios) and cfg.get("scan", "input") == "t0":
        rows = [(r, 0.0, 0.0, 1.0) for r in ratios]
    elif len(ratios):
        # follow the level from the negatively staggered side of the scan
        order = np.argsort(ratios)
        t = np.full(len(ratios), p.t)
        hs = singlet_blocks(t, ratios[order] * p.t, p.u)
        _, vecs, _ = track_state(hs, np.array([0.0, 0.0, 1.0]))
        w = np.abs(vecs) ** 2
        back = np.empty_like(order)
        back[order] = np.arange(len(order))
        w = w[back]
        rows = [(r, a[2], a[0] + a[1], 0.0) for r, a in zip(ratios, w)]
    return {"csv": str(write_csv(out / "composition.csv", header, rows)), "rows": len(rows)}


def gate_unitaries(schedule, steps: int):
    """Full-space unitaries of the forward gate and of its time reverse."""
    site0 = StateVector(np.eye(6)[0], BasisTag.SITE_FERMIONIC6)
    _, fwd = propagate(schedule, site0, steps)
    try:
        _, bwd = propagate(schedule.reversed(), site0, steps)
    except PreconditionError:
        bwd = fwd
    return fwd.unitary, bwd.unitary


def sequence_state(pair, n: int) -> np.ndarray:
    """|i-> after n gates alternating forward and reversed sweeps."""
    psi = i_minus(BasisTag.SITE_FERMIONIC6).amplitudes
    for k in range(n):
        psi = pair[k % 2] @ psi
    return psi


def gate_sequence_amplitudes(schedule, counts, steps: int, target_alpha: float):
    """|<ideal|psi_N>| for |i-> after N back-and-forth gates, for each N in counts."""
    pair = gate_unitaries(schedule, steps)
    psi0 = i_minus(BasisTag.SITE_FERMIONIC6).amplitudes
    idx = list(COMPUTATIONAL)
    out = []
    for n in counts:
        ideal = psi0.copy()
        ideal[idx] = np.linalg.matrix_power(u_alpha(target_alpha), n) @ psi0[idx]
        out.append(abs(np.vdot(ideal, sequence_state(pair, n))))
    return out


def cmd_gate(cfg: RunConfig, out: Path, workers: int = 1) -> dict:
    """Run one gate, write its report and the overlap after repeated gates."""
    schedule = cfg.schedule()
    steps = cfg.get("schedule", "steps")
    alpha = cfg.get("schedule", "target_alpha")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        report = run_gate(schedule, steps=steps, target_alpha=alpha)
    for note in report.warnings:
        log.warning("%s", note)
    counts = cfg.get("gate", "counts")
    amps = gate_sequence_amplitudes(schedule, counts, steps, alpha)
    csv_path = write_csv(out / "gate.csv", ["n_gates", "amplitude"], zip(counts, amps))
    json_path = write_json(out / "gate.json", report.as_dict())
    return {"csv": str(csv_path), "json": str(json_path), "report": report}


def _noise_model(cfg: RunConfig, amplitude: float, seed: int) -> NoiseModel:
    chi0 = cfg.get("noise", "chi0")
    return NoiseModel(
        amplitude=amplitude,
        bandwidth=cfg.get("noise", "bandwidth"),
        seed=seed,
        chi0=DEFAULT_CHI0 if chi0 < 0 else chi0,
        filter=cfg.get("noise", "filter"),
    )


def cmd_noise_scan(cfg: RunConfig, out: Path, workers: int = 1) -> dict:
    """Monte Carlo per-gate fidelity versus injected tunnelling noise."""
    schedule = cfg.schedule()
    seed = cfg.get("scenario", "seed")
    rows = []
    for pct in cfg.get("noise", "amplitudes"):
        model = _noise_model(cfg, pct / 100.0, seed)
        res = noisy_gate_fidelity(
            schedule,
            model,
            n_gates=cfg.get("noise", "n_gates"),
            n_trials=cfg.get("noise", "n_trials"),
            target_alpha=cfg.get("schedule", "target_alpha"),
            steps=cfg.get("noise", "steps"),
            workers=workers,
        )
        rows.append((pct, 100 * model.effective_amplitude, res.mean, res.stderr))
    header = ["amplitude_pct", "effective_amplitude_pct", "F_raw", "stderr"]
    return {"csv": str(write_csv(out / "noise_scan.csv", header, rows)), "rows": rows}


def chirality_after_gate(schedule, steps: int) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        report = run_gate(schedule, steps=steps)
    return spin_chirality(computational_state(report.u_computational))


def chirality_scan(sweep: LinearBiasSweep, u_values, steps: int = 2048, workers: int = 1):
    """kappa after one gate on |i-> for each U, in input order."""

    def one(u):
        return chirality_after_gate(sweep.with_u(float(u)), steps)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, u_values))
    return [one(u) for u in u_values]


def chirality_zero_crossings(sweep, u_values, kappas, steps: int = 2048, xtol: float = 1.0):
    """Bracket sign changes of kappa(U) on the scan grid and refine each by bisection."""
    out = []
    for (u0, k0), (u1, k1) in zip(zip(u_values, kappas), zip(u_values[1:], kappas[1:])):
        if k0 == 0:
            out.append(float(u0))
        elif k0 * k1 < 0:
            out.append(float(brentq(lambda u: chirality_after_gate(sweep.with_u(u), steps), u0, u1, xtol=xtol)))
    return out


def cmd_chirality_scan(cfg: RunConfig, out: Path, workers: int = 1) -> dict:
    """Spin chirality after one gate versus interaction, with zero crossings."""
    sweep = cfg.schedule()
    if not isinstance(sweep, LinearBiasSweep):
        raise PreconditionError("chirality scan needs a LinearBiasSweep schedule")
    steps = cfg.get("chirality", "steps")
    t_ref = sweep.t_max
    u_values = list(
        t_ref * np.linspace(cfg.get("chirality", "u_over_t_min"), cfg.get("chirality", "u_over_t_max"), cfg.get("chirality", "points"))
    )
    kappas = chirality_scan(sweep, u_values, steps, workers)
    rows = []
    for u, k in zip(u_values, kappas):
        branch = 1 if u >= 0 else -1
        # the gate maps kappa -> -kappa at alpha = 1, so the output chirality enters with a sign flip
        rows.append((u, k, alpha_from_chirality(max(-0.5, min(0.5, -k)), branch)))
    crossings = chirality_zero_crossings(sweep, u_values, kappas, steps, xtol=1e-3 * t_ref)
    oracle = []
    for alpha in (0.5, -0.5):
        try:
            oracle.append(calibrate_sweep_u(sweep.with_u(0.0), alpha).u)
        except PreconditionError:
            pass
    csv_path = write_csv(out / "chirality_scan.csv", ["U", "kappa", "alpha"], rows)
    json_path = write_json(out / "chirality_crossings.json", {"crossings_U": crossings, "phase_oracle_U": oracle})
    return {"csv": str(csv_path), "json": str(json_path), "crossings": crossings, "oracle": oracle, "rows": rows}


def _normalised_state(psi: np.ndarray) -> StateVector:
    return StateVector(psi / np.linalg.norm(psi), BasisTag.SITE_FERMIONIC6)


def cmd_sto(cfg: RunConfig, out: Path, workers: int = 1) -> dict:
    """Gate versus no-gate STO traces with fits, and a decay analysis over gate counts."""
    r = cfg.values["readout"]
    sto = StoConfig(r["splitting"], tuple(np.linspace(0.0, r["duration_max"], r["samples"])))
    sigma = r["sigma"] or None
    seed = cfg.get("scenario", "seed")
    schedule = cfg.schedule()
    steps = cfg.get("schedule", "steps")
    reference = i_minus(BasisTag.SITE_FERMIONIC6)
    pair = gate_unitaries(schedule, steps)
    gated = _normalised_state(sequence_state(pair, 1)) if r["apply_gate"] else reference
    tr0 = simulate_sto_trace(reference, sto, sigma, seed)
    tr1 = simulate_sto_trace(gated, sto, sigma, seed + 1)
    fits = {
        "no_gate": fit_sto(tr0.times, tr0.singlet, tr0.sigma, frequency=sto.frequency),
        "gate": fit_sto(tr1.times, tr1.singlet, tr1.sigma, frequency=sto.frequency),
    }
    csv_path = write_csv(out / "sto_trace.csv", ["T", "P_s_no_gate", "P_s_gate"], zip(tr0.times, tr0.singlet, tr1.singlet))

    counts = r["gate_counts"]
    amps, offs = [], []
    for i, n in enumerate(counts):
        survive = r["survival"] ** n
        tr = simulate_sto_trace(_normalised_state(sequence_state(pair, n)), sto, None, seed)
        values = survive * tr.singlet
        if sigma:
            values = values + np.random.default_rng([seed, i]).normal(0.0, sigma, len(values))
        f = fit_sto(tr.times, values, sigma, frequency=sto.frequency)
        amps.append(f.amplitude)
        offs.append(f.offset)
    payload = {
        "fits": {k: {"amplitude": f.amplitude, "frequency": f.frequency, "phase": f.phase, "offset": f.offset, "errors": f.errors, "degenerate_phase": f.degenerate_phase} for k, f in fits.items()},
        "phase_shift": float(math.remainder(fits["gate"].phase - fits["no_gate"].phase, 2 * math.pi)),
        "decay": {"gate_counts": list(counts), "amplitudes": amps, "offsets": offs},
    }
    if len(counts) >= 3:
        rep = fidelity_from_decay(counts, amps, offs)
        payload["fidelity"] = {
            "n_e": rep.n_e,
            "o_e": rep.o_e,
            "f_raw": rep.f_raw,
            "f_surv": rep.f_surv,
            "f_corr": rep.f_corr,
            "errors": rep.errors,
            "reliable": rep.reliable,
            "notes": rep.notes,
        }
    json_path = write_json(out / "sto_fit.json", payload)
    return {"csv": str(csv_path), "json": str(json_path), "payload": payload}


def cmd_lattice(cfg: RunConfig, out: Path, workers: int = 1) -> dict:
    """Tight-binding bias and tunnelling across the superlattice phase."""
    g = cfg.values["lattice"]
    phis = np.linspace(g["phi_start"], g["phi_end"], g["samples"])
    tb = scan_phase(cfg.lattice_depths(), phis, workers=workers, points=g["points"], n_twists=g["twists"])
    rows = [(phi, x.delta, x.t, x.t_prime) for phi, x in zip(phis, tb)]
    header = ["phi_SL", "delta_Hz", "t_Hz", "t_prime_Hz"]
    return {"csv": str(write_csv(out / "lattice.csv", header, rows)), "rows": rows}


def cmd_noise_budget(cfg: RunConfig, out: Path, workers: int = 1) -> dict:
    """Propagate measured noise levels to per-gate exchange errors."""
    b = cfg.values["budget"]
    levels = {"V_X": b["v_x"], "V_Xint": b["v_xint"], "V_Z": b["v_z"], "inhomogeneity": b["inhomogeneity"]}
    report = noise_budget_report(levels, b["u"])
    return {"json": str(write_json(out / "noise_budget.json", report.as_dict())), "report": report}


COMMANDS = {
    "spectrum": cmd_spectrum,
    "composition": cmd_composition,
    "gate": cmd_gate,
    "noise-scan": cmd_noise_scan,
    "chirality-scan": cmd_chirality_scan,
    "sto": cmd_sto,
    "lattice": cmd_lattice,
    "noise-budget": cmd_noise_budget,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sim", description="Double-well exchange gate simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=(COMMANDS[name].__doc__ or "").strip().split("\n")[0] or None)
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--threads", type=int, default=None, help="worker pool size (default $SIM_THREADS or 1)")
        p.add_argument("--out", default=None, help="output directory (default from the config)")
    return parser


def _threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("SIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"SIM_THREADS must be an integer, got {env!r}") from exc
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg = cfg.with_value("scenario", "seed", args.seed)
        out = Path(args.out or cfg.get("scenario", "output"))
        out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](cfg, out, _threads(args.threads))
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except PreconditionError as exc:
        log.error("precondition violated: %s", exc)
        return EXIT_PRECONDITION
    for key in ("csv", "json"):
        if key in result:
            print(result[key])
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
