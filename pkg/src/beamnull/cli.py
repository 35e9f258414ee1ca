"""Command-line entry points.

Every command is reproducible from (config file, seed) alone; each run
writes a manifest echoing the resolved configuration next to its CSV
outputs.  Exit codes: 0 success, 2 configuration error, 3 runtime
error.  On error, partially written outputs are removed.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from .beams import PhaseSet, beam_training_select, beamsteering_codebook, \
    load_codebook_csv, save_codebook_csv
from .channels import DatasetFormatError, generate_two_bs_scenario, \
    load_channel_dataset, save_channel_dataset
from .config import ConfigError, ScenarioConfig, default_config, \
    parse_config, write_manifest
from .evaluation import export_patterns, roc_curve, sir_map, user_rate, \
    write_rate_csv, write_roc_csv, write_sir_csv
from .orchestrator import FixedCodebookSweepPolicy, RandomBeamPolicy, \
    run_decentralized_learning


class RunDir:
    """Tracks files created by a command so failures leave no partial
    outputs behind."""

    def __init__(self, out: Path):
        self.out = out
        self.created_dir = not out.exists()
        out.mkdir(parents=True, exist_ok=True)
        self.files: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.out / name
        self.files.append(p)
        return p

    def cleanup(self):
        for p in self.files:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass
        if self.created_dir:
            try:
                self.out.rmdir()
            except OSError:
                pass


def _load_config(args) -> ScenarioConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if getattr(args, "policy", None):
        overrides["policy"] = args.policy
    if getattr(args, "p_measurements", None) is not None:
        overrides["p_measurements"] = args.p_measurements
    if getattr(args, "q_measurements", None) is not None:
        overrides["q_measurements"] = args.q_measurements
    if args.config:
        return parse_config(args.config, overrides)
    return default_config(overrides)


def _get_scenario(cfg: ScenarioConfig):
    if cfg.scenario_file:
        return load_channel_dataset(cfg.scenario_file)
    return generate_two_bs_scenario(cfg)


def _interference_azimuth(scenario, rx_id: int) -> float | None:
    try:
        tx_id = scenario.interferer_ids(rx_id)[0]
        ch = scenario.interference_channel(tx_id, rx_id)
    except KeyError:
        return None
    best = max(ch.paths, key=lambda p: abs(p.gain))
    return best.rx_azimuth


def _codebook_for(cfg: ScenarioConfig, path: str, m: int, phase_set: PhaseSet):
    if path:
        return load_codebook_csv(path, phase_set)
    return beamsteering_codebook(m, cfg.n_beams, phase_set)


def cmd_synth(args, run: RunDir) -> int:
    cfg = _load_config(args)
    scenario = _get_scenario(cfg)
    save_channel_dataset(scenario, run.path("scenario.json"))
    write_manifest(run.path("manifest.json"), "synth", cfg, {
        "users": sum(len(b.users) for b in scenario.base_stations)})
    return 0


def cmd_cluster(args, run: RunDir) -> int:
    from .learning import cluster_users

    cfg = _load_config(args)
    scenario = _get_scenario(cfg)
    phase_set = PhaseSet(cfg.phase_bits)
    sensing = beamsteering_codebook(scenario.m, cfg.n_beams, phase_set)
    rng = np.random.default_rng(cfg.seed)
    with open(run.path("clusters.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bs_id", "user_id", "cluster_id"])
        for bs in scenario.base_stations:
            channels = np.stack([u.channel for u in bs.users])
            clusters = cluster_users(channels, cfg.n_beams, sensing, rng)
            for cl in clusters:
                for member in cl.member_indices:
                    writer.writerow([bs.bs_id, bs.users[member].user_id,
                                     cl.cluster_id])
    write_manifest(run.path("manifest.json"), "cluster", cfg)
    return 0


def cmd_train(args, run: RunDir) -> int:
    cfg = _load_config(args)
    scenario = _get_scenario(cfg)
    result = run_decentralized_learning(scenario, cfg)

    for bs_id, codebook in sorted(result.codebooks.items()):
        save_codebook_csv(codebook, run.path(f"codebook_bs{bs_id}.csv"))
    for (bs_id, beam_idx), log in sorted(result.logs.items()):
        with open(run.path(f"train_log_bs{bs_id}_beam{beam_idx}.csv"),
                  "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "beam_index", "gain_est", "interf_est",
                             "reward", "epsilon", "best_gain", "best_interf"])
            for rec in log:
                writer.writerow([rec.step, beam_idx, repr(rec.gain),
                                 repr(rec.interference), rec.reward,
                                 repr(rec.epsilon), repr(rec.best_gain),
                                 repr(rec.best_interference)])
    if result.measurement_logs is not None:
        with open(run.path("measurements.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "beam_hash", "slot_type", "sample_value"])
            for (bs_id, beam_idx), mlog in sorted(result.measurement_logs.items()):
                for step, key_hex, kind, samples in mlog:
                    for v in np.atleast_1d(samples):
                        writer.writerow([step, key_hex, kind, repr(float(v))])
    write_manifest(run.path("manifest.json"), "train", cfg, {
        "env_accesses": result.audit.env_accesses,
        "cross_bs_accesses": result.audit.cross_bs_accesses})
    return 0


def cmd_eval_sir(args, run: RunDir) -> int:
    cfg = _load_config(args)
    scenario = _get_scenario(cfg)
    phase_set = PhaseSet(cfg.phase_bits)
    cb1 = _codebook_for(cfg, cfg.codebook1_file, scenario.m, phase_set)
    cb2 = _codebook_for(cfg, cfg.codebook2_file, scenario.m, phase_set)
    steering = beamsteering_codebook(scenario.m, cfg.n_beams, phase_set)
    tx1 = cb1 if cfg.other_tx_codebook == "learned" else steering
    tx2 = cb2 if cfg.other_tx_codebook == "learned" else steering

    reports = [sir_map(cb1, tx2, scenario, bs_id=1),
               sir_map(cb2, tx1, scenario, bs_id=2)]
    write_sir_csv(reports, run.path("sir_map.csv"))

    p_x = 10.0 ** (cfg.tx_snr_db / 10.0)
    rate_rows = []
    for bs_id, cb_self, cb_tx in ((1, cb1, tx2), (2, cb2, tx1)):
        other = scenario.interferer_ids(bs_id)[0]
        h_m = scenario.interference_matrix(other, bs_id)
        for u in scenario.bs(bs_id).users:
            idx, _ = beam_training_select(cb_self, u.channel)
            rate_rows.append((u.user_id, user_rate(
                cb_self[idx], u.channel, cb_tx, h_m, p_x, 1.0)))
    write_rate_csv(rate_rows, run.path("rates.csv"))
    write_manifest(run.path("manifest.json"), "eval-sir", cfg, {
        "median_avg_sir_db": [r.median_avg_db() for r in reports]})
    return 0


def cmd_roc(args, run: RunDir) -> int:
    cfg = _load_config(args)
    scenario = _get_scenario(cfg)
    phase_set = PhaseSet(cfg.phase_bits)
    if cfg.policy == "dft":
        policy = FixedCodebookSweepPolicy(
            beamsteering_codebook(scenario.m, cfg.n_beams, phase_set))
    else:
        policy = RandomBeamPolicy(phase_set, scenario.m)
    gammas = np.logspace(-3, 3, cfg.roc_gamma_points)
    rng = np.random.default_rng(cfg.seed)
    curves = []
    for p in cfg.roc_p_list():
        curves.append(roc_curve(scenario, policy, p, gammas,
                                cfg.roc_trials, rng,
                                phase_bits=cfg.phase_bits))
    write_roc_csv(curves, run.path("roc.csv"))
    write_manifest(run.path("manifest.json"), "roc", cfg, {
        "auc": {str(c.p_measurements): c.auc() for c in curves}})
    return 0


def cmd_pattern(args, run: RunDir) -> int:
    cfg = _load_config(args)
    scenario = _get_scenario(cfg)
    phase_set = PhaseSet(cfg.phase_bits)
    codebook = _codebook_for(cfg, cfg.codebook_file, scenario.m, phase_set)
    angles = np.linspace(0.0, math.pi, cfg.pattern_points)
    run.path("patterns.csv")
    run.path("pattern_annotations.csv")
    export_patterns(codebook, scenario.geometry, run.out, angles,
                    interference_azimuth=_interference_azimuth(scenario, 1))
    write_manifest(run.path("manifest.json"), "pattern", cfg)
    return 0


def cmd_theory_audit(args, run: RunDir) -> int:
    from .theory_audit import run_theory_audit

    cfg = _load_config(args)
    report = run_theory_audit(cfg, run)
    write_manifest(run.path("manifest.json"), "theory-audit", cfg, {
        "violations": report.violations, "checks": report.checks})
    print(report.summary)
    return 0 if report.violations == 0 else 3


_COMMANDS = {
    "synth": cmd_synth,
    "cluster": cmd_cluster,
    "train": cmd_train,
    "eval-sir": cmd_eval_sir,
    "roc": cmd_roc,
    "pattern": cmd_pattern,
    "theory-audit": cmd_theory_audit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamnull",
        description="Interference-aware analog beam codebook learning simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default="", help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--policy", choices=["random", "dft", "colearn"],
                       default=None)
        p.add_argument("--p-measurements", dest="p_measurements", type=int,
                       default=None)
        p.add_argument("--q-measurements", dest="q_measurements", type=int,
                       default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    run = RunDir(Path(args.out))
    try:
        return _COMMANDS[args.command](args, run)
    except (ConfigError, FileNotFoundError) as exc:
        run.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DatasetFormatError, ValueError, ArithmeticError, OSError) as exc:
        run.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
