"""CSV writers. Every file starts with ``#`` metadata lines; floats use 17 digits."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .attack import ClusterValuation
from .blotto import BlottoVerdict, EquilibriumProfile
from .errors import ScenarioError


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def metadata(sha256: str = "", seed=None, **extra) -> list[str]:
    lines = [f"iciblotto={__version__} numpy={np.__version__} scipy={scipy.__version__}"]
    if sha256:
        lines.append(f"scenario_sha256={sha256}")
    if seed is not None:
        lines.append(f"seed={seed}")
    lines += [f"{k}={fmt(v)}" for k, v in extra.items()]
    return lines


def write_csv(path, header, rows, meta=()) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        for line in meta:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """(header, rows) skipping ``#`` lines."""
    try:
        with open(path, newline="") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    rows = list(csv.reader(lines))
    if not rows:
        raise ScenarioError(f"{path}: empty CSV")
    return rows[0], rows[1:]


VALUATION_COLUMNS = ["sc_id", "phi_raw", "phi_norm", "active_constraint", "objective_id", "ci"]


def write_valuation(path, val: ClusterValuation, meta=()) -> Path:
    rows = []
    for i, sc in enumerate(val.ids):
        cert = val.certificates[i] if val.certificates else None
        rows.append([sc, val.phi_raw[i], val.phi_norm[i], cert.active_constraint if cert else "",
                     cert.objective_id if cert else "", val.infrastructure[i]])
    return write_csv(path, VALUATION_COLUMNS, rows, meta)


def read_valuation(path) -> ClusterValuation:
    header, rows = read_csv(path)
    missing = [c for c in ("sc_id", "phi_raw", "ci") if c not in header]
    if missing:
        raise ScenarioError(f"{path}: missing column(s) {missing}")
    col = {c: header.index(c) for c in header}
    try:
        raw = np.array([float(r[col["phi_raw"]]) for r in rows])
    except ValueError as exc:
        raise ScenarioError(f"{path}: bad number ({exc})") from None
    if raw.size == 0 or not raw.sum() > 0:
        raise ScenarioError(f"{path}: no positive values")
    return ClusterValuation(tuple(r[col["sc_id"]] for r in rows), tuple(r[col["ci"]] for r in rows),
                            raw, raw / raw.sum(), (), float("nan"))


EQUILIBRIUM_COLUMNS = ["sc_id", "ci", "phi", "attacker_atom", "attacker_support", "defender_atom",
                       "defender_support", "zeta_a", "zeta_d", "U_a", "Pi", "verdict"]


def write_equilibrium(path, val: ClusterValuation, profile: EquilibriumProfile,
                      verdict: BlottoVerdict | None = None, meta=()) -> Path:
    rows = []
    for i, sc in enumerate(val.ids):
        a, d = profile.attacker[i], profile.defender[i]
        rows.append([sc, val.infrastructure[i], val.phi_norm[i], a.atom, a.support, d.atom, d.support,
                     "", "", "", "", ""])
    verdict = verdict or profile.verdict
    rows.append(["summary", profile.kind, "", "", "", "", "", profile.zeta_a, profile.zeta_d, profile.U_a,
                 profile.Pi, verdict.label if verdict else ""])
    return write_csv(path, EQUILIBRIUM_COLUMNS, rows, meta)


MATCH_COLUMNS = ["replica", "u_a", "u_d", "compromised_fraction", "sc_won", "sc_tied", "ced", "max_q",
                 "q_joint", "won_scs"]


def write_matches(path, report, ids, meta=()) -> Path:
    rows = []
    frac = report.compromised
    for r in range(report.replicas):
        w = report.winners[r]
        won = ";".join(ids[i] for i in np.flatnonzero(w > 0))
        rows.append([r, report.u_a[r], report.u_d[r], frac[r], int((w > 0).sum()), int((w == 0).sum()),
                     report.ced[r], report.max_q[r], report.q_joint[r], won])
    return write_csv(path, MATCH_COLUMNS, rows, meta)


def write_trajectories(path, report, horizon: int, meta=()) -> Path:
    labels = list(report.mean_abs_error)
    header = ["step"]
    for lab in labels:
        header += [f"mae_clean[{lab}]", f"mae_attacked[{lab}]"]
    rows = []
    if labels:
        for k in range(horizon + 1):
            row = [k]
            for lab in labels:
                clean, att = report.mean_abs_error[lab]
                row += [clean[k], att[k]]
            rows.append(row)
    return write_csv(path, header, rows, meta)


def write_summary(path, items: dict, meta=()) -> Path:
    return write_csv(path, ["key", "value"], list(items.items()), meta)


def emit_reports(result, outdir) -> dict[str, Path]:
    """Write the five standard CSVs for a pipeline result."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    game = result.game
    cfg = result.system.config
    meta = metadata(cfg.sha256, game.seed)
    val = result.valuation
    rep = result.report
    files = {
        "valuation": write_valuation(out / "valuation.csv", val, meta),
        "equilibrium": write_equilibrium(out / "equilibrium.csv", val, result.matchup.profile,
                                         result.verdict, meta),
        "matches": write_matches(out / "matches.csv", rep, val.ids, meta),
        "trajectories": write_trajectories(out / "trajectories.csv", rep, game.horizon, meta),
    }
    summary = {"scenario": cfg.name, "alpha": game.alpha, "R_a": game.R_a, "R_d": game.R_d,
               "attacker": game.attacker, "defender": game.defender, "horizon": game.horizon,
               "phi_total": val.total, "U_a_closed_form": result.matchup.profile.U_a,
               "Pi_closed_form": result.matchup.profile.Pi, "verdict": result.verdict.label,
               "max_iota": result.verdict.max_iota}
    summary.update(rep.summary())
    if result.enforced is not None:
        summary.update({f"{k}_budget_enforced": v for k, v in result.enforced.summary().items()
                        if k != "replicas"})
    if rep.replicas:
        mq, qj = rep.max_q, rep.q_joint
        ok = np.isfinite(mq)
        summary["consistency_violations"] = int(np.sum(mq[ok] > qj[ok] + 1e-6))
    files["summary"] = write_summary(out / "summary.csv", summary, meta)
    return files
