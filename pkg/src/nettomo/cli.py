"""Command-line front end for reproducible experiments.

One binary, five subcommands: ``simulate`` writes ground-truth traffic,
``estimate`` fits rates from link counts (EM exact/normal, Gaussian
likelihood, moments, or Gibbs), ``detect`` evaluates the spoofed-flood
detection formulas, ``score`` runs Bayes-factor anomaly scoring against
stored sender profiles, and ``check`` validates a topology file.

Exit codes: 0 success, 1 usage error, 2 input error, 3 anomaly verdict,
4 numeric failure.  Every JSON output carries ``schema``, the seed, and a
hash of the resolved configuration so runs can be traced and reproduced.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys

import numpy as np

from . import __version__
from .bayesfactor import (
    DirichletParams,
    bayes_factor,
    load_profile,
    save_profile,
    sequences_from_rows,
    update_profile,
)
from .detect import MonitorConfig, attack_size_mle, detection_probability, expected_gap, \
    expected_observed, observed_count_pmf
from .errors import (
    BudgetExceededError,
    InconsistentObservationError,
    InfeasibleStateError,
    InvalidTopologyError,
    RankDeficiencyError,
)
from .estimators import EmConfig, em_fit, gaussian_fit, moment_fit
from .gibbs import ChainConfig, GammaPrior, run_chain, save_draws_csv
from .simulate import load_traffic_csv, save_traffic_csv, simulate_traffic
from .topology import (
    build_routing_matrix,
    check_capacity_bound,
    check_identifiability,
    load_network,
    partition,
    sd_pair_count,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_ANOMALY = 3
EXIT_NUMERIC = 4


class _Parser(argparse.ArgumentParser):
    """argparse variant using exit code 1 for usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config_hash(doc):
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _emit(doc, path=None):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_rates(text, c):
    vals = [float(v) for v in str(text).split(",")]
    if len(vals) == 1:
        return np.full(c, vals[0])
    if len(vals) != c:
        raise ValueError(f"expected 1 or {c} rates, got {len(vals)}")
    return np.asarray(vals)


def _topology_report(net):
    a = build_routing_matrix(net)
    return a, {
        "nodes": net.n,
        "links": net.r,
        "sd_pairs": net.c,
        "sd_pairs_full_routing": sd_pair_count(net.n),
        "identifiable": bool(check_identifiability(a)),
        "capacity_bound_violated": bool(check_capacity_bound(a)),
    }


def cmd_check(args):
    net = load_network(args.topology)
    a, report = _topology_report(net)
    report["schema"] = 1
    try:
        partition(a)
        report["full_row_rank"] = True
        report["redundant_rows"] = []
    except RankDeficiencyError as exc:
        report["full_row_rank"] = False
        report["redundant_rows"] = list(exc.redundant_rows)
    _emit(report)
    return EXIT_OK


def cmd_simulate(args):
    net = load_network(args.topology)
    a, report = _topology_report(net)
    rates = _parse_rates(args.rates, net.c)
    if (rates <= 0).any():
        raise ValueError("rates must be positive")
    sample = simulate_traffic(a, rates, args.k_periods, args.seed)
    cfg = {
        "command": "simulate",
        "topology": args.topology,
        "rates": [float(v) for v in rates],
        "k_periods": args.k_periods,
        "seed": args.seed,
    }
    sidecar = save_traffic_csv(
        sample,
        args.out,
        rates=rates,
        extra_meta={"config_hash": _config_hash(cfg), "topology": args.topology},
    )
    report.update(
        {
            "schema": 1,
            "out_csv": args.out,
            "out_sidecar": sidecar,
            "seed": args.seed,
            "config_hash": _config_hash(cfg),
        }
    )
    _emit(report)
    return EXIT_OK


def _merge_chain_doc(lam_draws, x_draws, summaries, seed):
    """Pooled summary over several chains (read-only merge of their draws)."""
    q = (0.05, 0.50, 0.95)
    lam_q = np.quantile(lam_draws, q, axis=0)
    x_q = np.quantile(x_draws, q, axis=0)
    return {
        "schema": 1,
        "n_draws": int(lam_draws.shape[0]),
        "seed": int(seed),
        "acceptance_rate": float(np.mean([s.acceptance_rate for s in summaries])),
        "lambda_mean": [float(v) for v in lam_draws.mean(axis=0)],
        "lambda_std": [float(v) for v in lam_draws.std(axis=0)],
        "lambda_q05": [float(v) for v in lam_q[0]],
        "lambda_q50": [float(v) for v in lam_q[1]],
        "lambda_q95": [float(v) for v in lam_q[2]],
        "x_mean": [float(v) for v in x_draws.mean(axis=0)],
        "x_std": [float(v) for v in x_draws.std(axis=0)],
        "x_q05": [float(v) for v in x_q[0]],
        "x_q50": [float(v) for v in x_q[1]],
        "x_q95": [float(v) for v in x_q[2]],
        "ess_lambda": [
            float(sum(s.ess_lambda[j] for s in summaries))
            for j in range(lam_draws.shape[1])
        ],
    }


def _write_trajectory_csv(path, report):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "delta", "observed_loglik"])
        logliks = report.loglik_trajectory or ()
        for i, d in enumerate(report.trajectory):
            ll = repr(float(logliks[i])) if i < len(logliks) else ""
            w.writerow([i + 1, repr(float(d)), ll])


def cmd_estimate(args):
    net = load_network(args.topology)
    a = build_routing_matrix(net)
    sample, meta = load_traffic_csv(args.data)
    ys = sample.y
    cfg_doc = {
        "command": "estimate",
        "method": args.method,
        "topology": args.topology,
        "data": args.data,
        "seed": args.seed,
        "max_iters": args.max_iters,
        "tol": args.tol,
        "floor": args.floor,
        "cap": args.cap,
        "samples": args.samples,
        "burn_in": args.burn_in,
        "thin": args.thin,
        "prior_shape": args.prior_shape,
        "prior_rate": args.prior_rate,
        "mh_fallback": args.mh_fallback,
    }
    chash = _config_hash(cfg_doc)
    lam_true = None
    if args.lambda_true:
        lam_true = _parse_rates(args.lambda_true, a.shape[1])
    elif "rates" in meta:
        lam_true = np.asarray(meta["rates"], dtype=float)

    if args.method == "gibbs":
        all_lam, all_x, summaries = [], [], []
        for chain_i in range(max(args.chains, 1)):
            chain_cfg = ChainConfig(
                n_samples=args.samples,
                burn_in=args.burn_in,
                thin=args.thin,
                seed=args.seed + chain_i,
                prior=GammaPrior(shape=args.prior_shape, rate=args.prior_rate),
                mh_fallback=args.mh_fallback,
            )
            summary, lam_draws, x_draws = run_chain(a, ys, chain_cfg)
            summaries.append(summary)
            all_lam.append(lam_draws)
            all_x.append(x_draws)
        lam_draws = np.concatenate(all_lam)
        x_draws = np.concatenate(all_x)
        doc = summaries[0].to_dict() if len(summaries) == 1 else _merge_chain_doc(
            lam_draws, x_draws, summaries, args.seed
        )
        doc["config_hash"] = chash
        doc["method"] = "gibbs"
        doc["chains"] = max(args.chains, 1)
        if lam_true is not None:
            means = doc["lambda_mean"]
            doc["relative_error"] = [
                float(abs(m - t) / t) for m, t in zip(means, lam_true)
            ]
        if args.draws_out:
            save_draws_csv(args.draws_out, lam_draws, x_draws)
        _emit(doc, args.out)
        return EXIT_OK

    init = _parse_rates(args.init, a.shape[1]) if args.init else None
    em_cfg = EmConfig(
        max_iters=args.max_iters,
        tol=args.tol,
        estep_mode="normal" if args.method == "em-normal" else "exact",
        floor=args.floor,
        cap=args.cap,
    )
    if args.method in ("em-exact", "em-normal"):
        report = em_fit(a, ys, init=init, cfg=em_cfg)
    elif args.method == "gaussian":
        best = None
        for s in range(max(args.multistart, 1)):
            start = init
            if s > 0:
                start = np.asarray(
                    np.random.Generator(np.random.Philox(args.seed + s)).uniform(
                        0.5, 2.0, a.shape[1]
                    )
                    * (ys.sum(axis=1).mean() / a.shape[1])
                )
            cand = gaussian_fit(a, ys, init=start, cfg=em_cfg)
            if best is None or (cand.objective or -np.inf) > (best.objective or -np.inf):
                best = cand
        report = best
    elif args.method == "moments":
        report = moment_fit(a, ys, floor=args.floor)
    else:
        raise ValueError(f"unknown method {args.method}")

    doc = report.to_dict()
    doc["config_hash"] = chash
    doc["seed"] = args.seed
    if lam_true is not None:
        doc["relative_error"] = [
            float(abs(m - t) / t) for m, t in zip(report.lambda_hat, lam_true)
        ]
    if args.trajectory_out:
        _write_trajectory_csv(args.trajectory_out, report)
    _emit(doc, args.out)
    return EXIT_OK


def cmd_detect(args):
    m = MonitorConfig(w=args.w, address_space=2 ** args.address_bits)
    doc = {
        "schema": 1,
        "w": args.w,
        "address_bits": args.address_bits,
        "d": args.d,
        "detection_probability": detection_probability(m, args.d),
        "expected_observed": expected_observed(m, args.d),
        "attack_size_mle": attack_size_mle(m, args.j) if args.j is not None else None,
        "observed_count_pmf": (
            observed_count_pmf(m, args.d, args.j)
            if args.j is not None and args.j <= args.d
            else None
        ),
    }
    gap = expected_gap(m)
    doc["gap_truncated_as_printed"] = gap.gap_truncated_as_printed
    doc["gap_geometric"] = gap.gap_geometric
    doc["config_hash"] = _config_hash(
        {"command": "detect", "w": args.w, "address_bits": args.address_bits,
         "d": args.d, "j": args.j}
    )
    _emit(doc)
    return EXIT_OK


def cmd_score(args):
    alpha_vals = [float(v) for v in args.alpha.split(",")] if args.alpha else None
    rows = []
    with open(args.sequences, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append((row["t"], row["sender"], row["sd_label"]))
    if not rows:
        raise ValueError(f"no rows in {args.sequences}")
    anomalous = False
    out_lines = []
    senders = sorted({sender for _, sender, _ in rows})
    for sender in senders:
        prof = load_profile(args.profiles, sender)
        state_index = {s: i for i, s in enumerate(prof.states)}
        seqs = sequences_from_rows(
            [r for r in rows if r[1] == sender], state_index
        )
        seq = seqs[sender]
        if alpha_vals is None:
            d = DirichletParams(alpha=np.ones(prof.k))
        elif len(alpha_vals) == 1:
            d = DirichletParams(alpha=np.full(prof.k, alpha_vals[0]))
        else:
            d = DirichletParams(alpha=np.asarray(alpha_vals))
        bf, woe = bayes_factor(seq, prof, d)
        verdict = "anomaly" if woe > args.threshold else "normal"
        anomalous |= verdict == "anomaly"
        out_lines.append(
            {
                "schema": 1,
                "sender": sender,
                "T": int(seq.t_transitions),
                "woe": woe,
                "bf": bf,
                "verdict": verdict,
            }
        )
        if args.update_profiles:
            save_profile(args.profiles, update_profile(prof, seq))
    for line in out_lines:
        sys.stdout.write(json.dumps(line, sort_keys=True) + "\n")
    return EXIT_ANOMALY if anomalous else EXIT_OK


def build_parser():
    ap = _Parser(prog="nettomo", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"nettomo {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[], help="validate a topology file")
    p.add_argument("--topology", required=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="generate ground-truth traffic")
    p.add_argument("--topology", required=True)
    p.add_argument("--rates", required=True, help="common rate or comma list of c rates")
    p.add_argument("--k-periods", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="fit rates from link counts")
    p.add_argument("--topology", required=True)
    p.add_argument("--data", required=True, help="traffic CSV (y rows used)")
    p.add_argument(
        "--method",
        required=True,
        choices=["em-exact", "em-normal", "gaussian", "moments", "gibbs"],
    )
    p.add_argument("--init", default=None, help="starting rates (common or comma list)")
    p.add_argument("--lambda-true", default=None, help="truth for error reporting")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--floor", type=float, default=1e-6)
    p.add_argument("--cap", type=int, default=64)
    p.add_argument("--multistart", type=int, default=1)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prior-shape", type=float, default=1.0)
    p.add_argument("--prior-rate", type=float, default=0.01)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--mh-fallback", action="store_true")
    p.add_argument("--out", default=None, help="report JSON path (stdout if omitted)")
    p.add_argument("--trajectory-out", default=None)
    p.add_argument("--draws-out", default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("detect", help="spoofed-flood detection formulas")
    p.add_argument("--w", type=int, required=True, help="monitored addresses")
    p.add_argument("--address-bits", type=int, default=32)
    p.add_argument("--d", type=int, required=True, help="attack size")
    p.add_argument("--j", type=int, default=None, help="observed count")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("score", help="Bayes-factor anomaly scoring")
    p.add_argument("--profiles", required=True, help="profile store directory")
    p.add_argument("--sequences", required=True, help="CSV with t,sender,sd_label")
    p.add_argument("--alpha", default=None, help="Dirichlet hyperparameters")
    p.add_argument("--threshold", type=float, default=0.0, help="woe anomaly cutoff")
    p.add_argument("--update-profiles", action="store_true")
    p.set_defaults(func=cmd_score)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (
        RankDeficiencyError,
        BudgetExceededError,
        InconsistentObservationError,
        InfeasibleStateError,
        np.linalg.LinAlgError,
    ) as exc:
        sys.stderr.write(f"nettomo: numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except (FileNotFoundError, InvalidTopologyError, ValueError, KeyError) as exc:
        sys.stderr.write(f"nettomo: input error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
