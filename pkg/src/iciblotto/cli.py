"""Command line entry point: ``iciblotto <build|analyze|equilibrium|simulate|report>``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import blotto, pipeline, reports
from .errors import IciError, ScenarioError
from .model import write_matrix_csv
from .scenario import CI_NAMES, load_scenario, parse_subset


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--scenario", type=Path, default=None,
                   help="scenario JSON (default: the bundled benchmark scenario)")
    p.add_argument("--seed", type=int, default=None, help="master seed (default: from scenario)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--replicas", type=int, default=None, help="Monte Carlo replicas (default: from scenario)")
    return p


def _budget_pairs(text):
    pairs = []
    for item in text.split(","):
        try:
            a, d = item.split(":")
            pairs.append((float(a), float(d)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"budget pair {item!r} is not R_a:R_d") from None
    return pairs


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="iciblotto", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("build", parents=[common], help="assemble and discretize the model; export matrices")

    p = sub.add_parser("analyze", parents=[common], help="value every sensor cluster")
    p.add_argument("--alpha", type=float, default=None, help="feasibility budget (default: from scenario)")

    p = sub.add_parser("equilibrium", parents=[common], help="solve the game over cluster values")
    p.add_argument("--ra", type=float, default=None, help="attacker budget")
    p.add_argument("--rd", type=float, default=None, help="defender budget")
    p.add_argument("--values", type=Path, default=None, help="valuation.csv (default: computed)")
    p.add_argument("--defend-subset", default=None, help="comma list of CIs the defender protects")
    p.add_argument("--check-blotto", action="store_true", help="report Colonel Blotto applicability")

    p = sub.add_parser("simulate", parents=[common], help="full pipeline with Monte Carlo matches")
    p.add_argument("--attacker", default=None, help="msne | proportional | best-response")
    p.add_argument("--defender", default=None, help="msne | proportional | best-response | single-ci:<cis>")
    p.add_argument("--ra", type=float, default=None)
    p.add_argument("--rd", type=float, default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--no-kalman", action="store_true", help="skip the attacked filter runs")

    p = sub.add_parser("report", parents=[common], help="budget-ratio and single-CI defense tables")
    p.add_argument("--budgets", type=_budget_pairs, default=[(10.0, 20.0), (1.0, 20.0)],
                   help="comma list of R_a:R_d pairs (default 10:20,1:20)")
    p.add_argument("--subsets", default="power;gas;water",
                   help="semicolon list of defended CI subsets (default power;gas;water)")
    p.add_argument("--force-kappa", default=None, metavar="CI=K",
                   help="rescale values so the given CI subset holds share K, e.g. gas=0.38")
    p.add_argument("--ra", type=float, default=None, help="attacker budget for the defense table")
    p.add_argument("--rd", type=float, default=None, help="defender budget for the defense table")
    p.add_argument("--kalman", action="store_true", help="also run attacked filters for error trajectories")
    return ap


def _scenario(args):
    cfg = load_scenario(args.scenario)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.replicas is not None:
        changes["replicas"] = args.replicas
    for attr, key in (("ra", "R_a"), ("rd", "R_d"), ("attacker", "attacker"), ("defender", "defender"),
                      ("horizon", "horizon"), ("alpha", "alpha")):
        v = getattr(args, attr, None)
        if v is not None:
            changes[key] = v
    try:
        return cfg.with_game(**changes) if changes else cfg
    except TypeError as exc:
        raise ScenarioError(str(exc)) from None


def cmd_build(args, cfg):
    system = pipeline.build_system(cfg)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    for name, M in (("A", system.continuous.A), ("B", system.continuous.B), ("C", system.continuous.C),
                    ("Ad", system.discrete.A), ("Bd", system.discrete.B)):
        write_matrix_csv(out / f"{name}.csv", M)
    meta = reports.metadata(cfg.sha256, cfg.game.seed)
    reports.write_csv(out / "states.csv", ["index", "label"], list(enumerate(system.continuous.state_labels)), meta)
    reports.write_csv(out / "sensors.csv", ["row", "cluster", "label"],
                      [(r, system.index.ids[c], system.continuous.output_labels[r])
                       for c in range(system.index.n_clusters) for r in system.index.rows[c]], meta)
    eig = np.linalg.eigvals(system.continuous.A)
    rho = np.abs(np.linalg.eigvals(system.discrete.A)).max()
    print(f"n={system.continuous.n_states} p={system.continuous.n_inputs} m={system.continuous.n_outputs} "
          f"clusters={system.index.n_clusters} max Re(eig A)={eig.real.max():.6g} rho(Ad)={rho:.6g}")
    print(f"wrote matrices to {out}")


def cmd_analyze(args, cfg):
    system = pipeline.build_system(cfg)
    val = pipeline.value_system(system, cfg.game.alpha)
    args.out.mkdir(parents=True, exist_ok=True)
    path = reports.write_valuation(args.out / "valuation.csv", val,
                                   reports.metadata(cfg.sha256, cfg.game.seed, alpha=cfg.game.alpha))
    top = int(np.argmax(val.phi_norm))
    print(f"{val.n_clusters} clusters, total value {val.total:.6g}, "
          f"largest {val.ids[top]} phi={val.phi_norm[top]:.4g}")
    for ci in CI_NAMES:
        print(f"  kappa[{ci}] = {val.kappa([ci]):.4f}")
    print(f"wrote {path}")


def cmd_equilibrium(args, cfg):
    g = cfg.game
    if args.values is not None:
        val = reports.read_valuation(args.values)
    else:
        val = pipeline.value_system(pipeline.build_system(cfg), g.alpha)
    verdict = blotto.check_blotto_applicability(val.phi_norm, g.R_a, g.R_d) if args.check_blotto else None
    if args.defend_subset:
        subset = parse_subset(args.defend_subset)
        m = pipeline.make_matchup(val, g.R_a, g.R_d, defender="single-ci:" + ",".join(subset))
    else:
        m = pipeline.make_matchup(val, g.R_a, g.R_d)
    prof = m.profile
    args.out.mkdir(parents=True, exist_ok=True)
    path = reports.write_equilibrium(args.out / "equilibrium.csv", val, prof, verdict,
                                     reports.metadata(cfg.sha256, g.seed, R_a=g.R_a, R_d=g.R_d))
    print(f"{prof.kind}: zeta_a={prof.zeta_a:.6g} zeta_d={prof.zeta_d:.6g} U_a={prof.U_a:.6g} Pi={prof.Pi:.6g}")
    if verdict is not None:
        print(f"{verdict.label}: {verdict.reason}")
    print(f"wrote {path}")


def cmd_simulate(args, cfg):
    res = pipeline.run_pipeline(cfg, kalman=not args.no_kalman)
    files = reports.emit_reports(res, args.out)
    s = res.report.summary()
    print(f"{cfg.game.attacker} vs {cfg.game.defender}, R_a/R_d={cfg.game.R_a / cfg.game.R_d:.4g}, "
          f"{s['replicas']} replicas: compromised {100 * s['compromised_mean']:.2f}% "
          f"(se {100 * s['compromised_se']:.2f}pp), mean CED {s['ced_mean']:.6g}")
    print("wrote " + ", ".join(str(p.name) for p in files.values()) + f" to {args.out}")


def cmd_report(args, cfg):
    g = cfg.game
    system = pipeline.build_system(cfg)
    val = pipeline.value_system(system, g.alpha)
    if args.force_kappa:
        try:
            ci, k = args.force_kappa.split("=")
            val = pipeline.force_kappa(val, parse_subset(ci), float(k))
        except ValueError:
            raise ScenarioError(f"--force-kappa expects CI=K, got {args.force_kappa!r}") from None
    args.out.mkdir(parents=True, exist_ok=True)
    meta = reports.metadata(cfg.sha256, g.seed, replicas=g.replicas)

    rows, pairs = pipeline.compare_budget_ratios(val, args.budgets, g.replicas, g.seed)
    reports.write_csv(args.out / "ratios.csv",
                      ["R_a", "R_d", "Pi_closed_form", "ced_mc_mean", "ced_mc_se", "compromised_mean"],
                      [(r.R_a, r.R_d, r.Pi, r.ced_mean, r.ced_se, r.compromised_mean) for r in rows], meta)
    reports.write_csv(args.out / "ratio_pairs.csv", ["i", "j", "closed_form_ratio", "mc_ratio"],
                      [(i, j, a, b) for (i, j), (a, b) in sorted(pairs.items())], meta)
    subsets = [parse_subset(s) for s in args.subsets.split(";") if s.strip()]
    drows = pipeline.interdependence_report(system, val, subsets, g.R_a, g.R_d, g.replicas, g.seed,
                                            kalman=args.kalman, horizon=g.horizon, track=g.track_states)
    reports.write_csv(args.out / "interdependence.csv",
                      ["subset", "kappa", "Pi_bar", "Pi", "ratio_closed_form", "compromised_mean",
                       "ced_mc_mean", "ced_mc_se", "ratio_mc"],
                      [("+".join(r.subset), r.kappa, r.Pi_bar, r.Pi, r.ratio, r.compromised_mean, r.ced_mean,
                        r.ced_se, r.ced_mean / drows[0].ced_mean) for r in drows], meta)
    if args.kalman and g.track_states:
        header, out_rows = ["step"], []
        for r in drows:
            for lab in r.mean_abs_error:
                header.append(f"mae_attacked[{lab}|{'+'.join(r.subset)}]")
        for k in range(g.horizon + 1):
            out_rows.append([k] + [r.mean_abs_error[lab][1][k] for r in drows for lab in r.mean_abs_error])
        reports.write_csv(args.out / "defense_trajectories.csv", header, out_rows, meta)
    for (i, j), (a, b) in sorted(pairs.items()):
        if i < j:
            print(f"budgets {args.budgets[i]} vs {args.budgets[j]}: closed-form ratio {a:.6g}, MC ratio {b:.4g}")
    for r in drows:
        print(f"defend {'+'.join(r.subset):<16} kappa={r.kappa:.4f} Pi_bar/Pi={r.ratio:.4f} "
              f"MC {r.ced_mean / drows[0].ced_mean:.4f}")
    print(f"wrote tables to {args.out}")


COMMANDS = {"build": cmd_build, "analyze": cmd_analyze, "equilibrium": cmd_equilibrium,
            "simulate": cmd_simulate, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _scenario(args)
        COMMANDS[args.command](args, cfg)
    except IciError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: [sim-cli] {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
