"""Command-line front end.

Every subcommand writes a CSV whose first lines are ``#`` provenance
comments (tool version, subcommand, resolved configuration as JSON, seed)
followed by a header row.  Reruns with the same inputs produce identical
bytes.  Exit codes: 0 success, 2 configuration error, 3 quadrature did not
converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace

from . import __version__
from .channel_model import (EstimationErrorModel, LinkBudget, LinkGeometry, PathLossParams,
                            db_to_linear, path_loss_db)
from .config import POLICY_NAMES, ConfigError, load_config
from .dstc_core import SystemParams
from .optimizer import threshold_policy, threshold_search
from .outage_analysis import AsymptoticContext, QuadratureError, outage_asymptotic
from .relay_policy import (FullPower, HybridAfDf, OnOff, PiecewiseLinear, ThresholdDF,
                           optimal_onoff_threshold)
from .sim_engine import SimConfig, derive_seed, relay_policies, sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_QUADRATURE = 3

SUBCOMMANDS = ("pathloss", "outage", "ber", "optimize", "sweep")


# -- building library objects from a resolved configuration -------------------

def link_budget(cfg: dict, snr_rd_db: float | None = None) -> LinkBudget:
    """Normalized budget: ``Gamma_sr1 = Gamma_rd = 1``, SNRs from the config."""
    link = cfg["link"]
    snr_sr = db_to_linear(link["snr_sr_db"])
    snr_sr2 = snr_sr if link["snr_sr2_db"] is None else db_to_linear(link["snr_sr2_db"])
    rd1 = link["snr_rd_db"] if snr_rd_db is None else snr_rd_db
    rd2 = rd1 if link["snr_rd2_db"] is None else link["snr_rd2_db"]
    return LinkBudget(gamma_sr1=1.0, gamma_sr2=snr_sr2 / snr_sr, gamma_r1d=1.0, gamma_r2d=1.0,
                      ps_over_n0=snr_sr, pr1_over_n0=db_to_linear(rd1),
                      pr2_over_n0=db_to_linear(rd2))


def sim_config(cfg: dict, gamma_t_db: float | None = None,
               snr_rd_db: float | None = None, constellation: str = "bpsk") -> SimConfig:
    lb = link_budget(cfg, snr_rd_db)
    gt = cfg["link"]["gamma_t_db"] if gamma_t_db is None else gamma_t_db
    return SimConfig(link_budget=lb, system=SystemParams.from_link_budget(lb, db_to_linear(gt)),
                     policy=FullPower(), trials=cfg["trials"], master_seed=cfg["seed"],
                     constellation=constellation)


def policy_factory(name: str, pcfg: dict):
    """Callable mapping a point's :class:`SimConfig` to that point's policy.

    Thresholds in the configuration are in dB on the unit-mean fading gain.
    """
    if name == "full":
        return lambda sim: FullPower()
    if name == "onoff":
        return lambda sim: threshold_policy(sim, pcfg["threshold_db"], OnOff)
    if name == "onoff-xi":
        return lambda sim: OnOff(optimal_onoff_threshold(sim.system.gamma_t,
                                                         sim.link_budget.ps_over_n0))
    if name == "df":
        return lambda sim: threshold_policy(sim, pcfg["threshold_db"], ThresholdDF)
    if name == "piecewise":
        def piecewise(sim):
            lb = sim.link_budget
            pair = tuple(PiecewiseLinear(g * db_to_linear(pcfg["tau1_db"]),
                                         g * db_to_linear(pcfg["tau2_db"]))
                         for g in lb.gamma_sr)
            return pair[0] if lb.gamma_sr1 == lb.gamma_sr2 else pair
        return piecewise
    if name == "hybrid":
        def hybrid(sim):
            t2_db = pcfg["t2_db"]
            pair = tuple(HybridAfDf(g * db_to_linear(pcfg["threshold_db"]),
                                    math.inf if t2_db is None else g * db_to_linear(t2_db))
                         for g in sim.link_budget.gamma_sr)
            return pair[0] if sim.link_budget.gamma_sr1 == sim.link_budget.gamma_sr2 else pair
        return hybrid
    raise ConfigError(f"unknown policy {name!r}")


def _policies(cfg: dict) -> dict:
    return {name: policy_factory(name, cfg["policy"]) for name in cfg["policy"]["names"]}


def _estimation_error_prepare(enabled: bool):
    if not enabled:
        return None
    return lambda sim: replace(sim, estimation_error=EstimationErrorModel.from_link_budget(
        sim.link_budget))


# -- CSV output ------------------------------------------------------------------

class Coord(float):
    """Grid coordinate; printed compactly rather than in scientific notation."""


def _fmt(x) -> str:
    if isinstance(x, Coord):
        return f"{x:g}"
    if isinstance(x, float):
        return f"{x:.6e}"
    return str(x)


def provenance_config(cfg: dict) -> dict:
    """The resolved config minus keys that cannot change the output (worker count)."""
    return {k: v for k, v in cfg.items() if k != "workers"}


def render_csv(command: str, cfg: dict, header, rows) -> str:
    buf = io.StringIO()
    embedded = json.dumps(provenance_config(cfg), sort_keys=True, separators=(",", ":"))
    buf.write(f"# tool: adstc {__version__}\n")
    buf.write(f"# command: {command}\n")
    buf.write(f"# config: {embedded}\n")
    buf.write(f"# seed: {cfg['seed']}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([[_fmt(v) for v in row] for row in rows])
    return buf.getvalue()


# -- subcommands -----------------------------------------------------------------

def run_pathloss(cfg: dict):
    pl = cfg["pathloss"]
    geo = cfg["geometry"]
    base = PathLossParams(carrier_freq=pl["carrier_mhz"], d0=pl["d0_m"], a=pl["a"],
                          b=pl["b"], c=pl["c"])
    geometry = LinkGeometry(d_sr1=geo["d_sr1_m"], d_sr2=geo["d_sr2_m"], d_r1d=geo["d_r1d_m"],
                            d_r2d=geo["d_r2d_m"], bs_height=geo["h_bs_m"],
                            rs_height=geo["h_rs_m"], ms_height=geo["h_ms_m"])
    params = geometry.link_params(base)
    if pl["distances_m"] is None:
        points = [(d, params[link]) for link, d in geometry.distances().items()]
    else:
        hop = params["sr1"] if pl["hop"] == "sr" else params["r1d"]
        points = [(d, hop) for d in pl["distances_m"]]
    rows = []
    for d, p in points:
        loss = path_loss_db(d, p)
        rows.append([Coord(d), loss, 10.0 ** (-loss / 10.0)])
    return ["distance_m", "pathloss_db", "gamma_linear"], rows


def run_outage(cfg: dict):
    header = ["gamma_t_db", "policy", "estimate", "ci", "trials"]
    policies = _policies(cfg)
    grid = cfg["outage"]["gamma_t_db"]
    rows = []
    if cfg["outage"]["method"] == "asymptotic":
        for gt in grid:
            sim = sim_config(cfg, gamma_t_db=gt)
            for name, make in policies.items():
                try:
                    ctx = AsymptoticContext.from_policies(sim.link_budget, sim.system.gamma_t,
                                                          *relay_policies(make(sim)))
                except ValueError as exc:
                    raise ConfigError(f"policy '{name}' with method asymptotic: {exc}") from exc
                value, err, _ = outage_asymptotic(ctx, tol=cfg["outage"]["tol"],
                                                  full_output=True)
                rows.append([Coord(gt), name, value, err, 0])
        return header, rows
    result = sweep(sim_config(cfg), "gamma_t_db", grid, policies, metric="outage",
                   workers=cfg["workers"])
    for r in result.rows:
        rows.append([Coord(r.value), r.policy, r.estimate.value, r.estimate.half_width_95,
                     r.estimate.trials])
    return header, rows


def run_ber(cfg: dict):
    bcfg = cfg["ber"]
    base = sim_config(cfg, constellation=bcfg["constellation"])
    result = sweep(base, "snr_rd_db", bcfg["snr_rd_db"], _policies(cfg), metric="ber",
                   workers=cfg["workers"],
                   prepare=_estimation_error_prepare(bcfg["estimation_error"]))
    rows = [[Coord(r.value), r.policy, r.estimate.value, r.estimate.half_width_95]
            for r in result.rows]
    return ["snr_rd_db", "policy", "ber", "ci"], rows


def run_optimize(cfg: dict):
    ocfg = cfg["optimize"]
    method = cfg["outage"]["method"]
    rows = []
    cells = [(gt, rd) for gt in ocfg["gamma_t_db"] for rd in ocfg["snr_rd_db"]]
    for k, (gt, rd) in enumerate(cells):
        sim = replace(sim_config(cfg, gamma_t_db=gt, snr_rd_db=rd),
                      master_seed=derive_seed(cfg["seed"], k))
        report = threshold_search(sim, ocfg["grid_db"], objective=method,
                                  workers=cfg["workers"])
        rows.append([Coord(gt), Coord(rd), Coord(report.best_params["threshold_db"]),
                     report.best_objective])
    return ["gamma_t_db", "snr_rd_db", "best_threshold_db", "objective"], rows


def run_sweep(cfg: dict):
    scfg = cfg["sweep"]
    constellation = cfg["ber"]["constellation"] if scfg["metric"] == "ber" else "bpsk"
    prepare = (_estimation_error_prepare(cfg["ber"]["estimation_error"])
               if scfg["metric"] == "ber" else None)
    result = sweep(sim_config(cfg, constellation=constellation), scfg["variable"],
                   scfg["grid"], _policies(cfg), metric=scfg["metric"],
                   workers=cfg["workers"], prepare=prepare)
    return result.header(), result.records()


RUNNERS = {"pathloss": run_pathloss, "outage": run_outage, "ber": run_ber,
           "optimize": run_optimize, "sweep": run_sweep}


# -- argument parsing --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration, or a CSV written by this tool")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--trials", type=int, help="Monte-Carlo trials (frames for ber)")
    common.add_argument("--method", choices=("mc", "asymptotic"),
                        help="outage estimator for outage and optimize")
    common.add_argument("--policy", action="append", choices=POLICY_NAMES,
                        help="relay policy; repeat for several")
    common.add_argument("--workers", type=int, help="worker processes for Monte-Carlo batches")
    common.add_argument("--out", help="output CSV path (default: stdout)")

    parser = argparse.ArgumentParser(
        prog="adstc",
        description="Distributed space-time coding over two AF relays: outage, BER, "
                    "threshold optimization.")
    parser.add_argument("--version", action="version", version=f"adstc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "pathloss": "path loss and gain over link distances",
        "outage": "outage probability versus the SNR threshold",
        "ber": "uncoded bit error rate versus relay-destination SNR",
        "optimize": "best on-off threshold per (threshold SNR, relay-destination SNR) cell",
        "sweep": "generic sweep of one variable",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _overrides(args) -> dict:
    return {"seed": args.seed, "trials": args.trials, "outage.method": args.method,
            "policy.names": args.policy, "workers": args.workers}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        header, rows = RUNNERS[args.command](cfg)
    except (ConfigError, ValueError) as exc:
        # Library constructors reject bad physical parameters with ValueError.
        print(f"adstc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QuadratureError as exc:
        print(f"adstc: numerical error: {exc}", file=sys.stderr)
        return EXIT_QUADRATURE
    text = render_csv(args.command, cfg, header, rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
