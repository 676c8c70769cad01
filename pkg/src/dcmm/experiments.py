"""Monte-Carlo experiment harness.

Every replicate owns a random substream derived from ``(root seed, labels)``,
tasks run on a thread pool and results are merged in task order, and BLAS is
pinned to one thread.  Output files are therefore byte-identical for a given
seed whatever ``threads`` is.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from dcmm.config import Exp1Config, Exp2Config, LfcConfig, RatesConfig
from dcmm.errors import DcmmError
from dcmm.estimator import NodeFlag, mixed_score_laplacian, orthodox_mixed_score
from dcmm.io import fmt, write_membership_csv, write_table, write_vector_csv
from dcmm.lower_bounds import build_lfc, lfc_report
from dcmm.metrics import UNWEIGHTED, WEIGHTED, loglog_slope, loss
from dcmm.model import build_omega, clipped_entries, generate_membership, mixing_matrix, sample_adjacency
from dcmm.profiles import (
    DegreeProfile,
    EmpiricalCdf,
    baseline_rate,
    optimal_rate_integral,
    rate_inputs,
    sample_degrees,
)
from dcmm.rng import as_seed

LOSSES = (UNWEIGHTED, WEIGHTED)
# mean node errors at or below this are treated as exact recovery
ZERO_ERROR_TOL = 1e-10


@dataclass
class ResultTable:
    """Long-format raw rows plus aggregates and free-form summary values."""

    raw: list[dict]
    raw_columns: list[str]
    aggregate: list[dict] = field(default_factory=list)
    aggregate_columns: list[str] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    failures: int = 0
    files: list[Path] = field(default_factory=list)


def parallel_map(fn, tasks, threads: int = 1) -> list:
    """``[fn(t) for t in tasks]`` on a pool, results in task order."""
    tasks = list(tasks)
    with threadpool_limits(limits=1):
        if threads <= 1:
            return [fn(t) for t in tasks]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, tasks))


def _failure_label(exc: DcmmError) -> str:
    step = f"@{exc.step}" if getattr(exc, "step", None) else ""
    return f"failed:{type(exc).__name__}{step}"


def _estimate(method: str, a, K, c, gamma, tau, oms_trim=False, trim=True):
    if method == "MSL":
        return mixed_score_laplacian(a, K, c=c, gamma=gamma, tau=tau, trim=trim)
    return orthodox_mixed_score(a, K, c=c, gamma=gamma, trim=oms_trim and trim)


def aggregate(rows: list[dict], keys: tuple[str, ...]) -> list[dict]:
    """Mean and standard error of ``value`` over rows with status ``ok``, grouped by ``keys``."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row)
    out = []
    for key in sorted(groups):
        vals = np.array([r["value"] for r in groups[key] if r["status"] == "ok"], dtype=float)
        m = vals.size
        mean = float(vals.mean()) if m else math.nan
        se = float(vals.std(ddof=1) / math.sqrt(m)) if m > 1 else math.nan
        out.append(dict(zip(keys, key), mean=mean, se=se, n_ok=m, n_failed=len(groups[key]) - m))
    return out


# --- experiment 1 -----------------------------------------------------------

EXP1_RAW = ["experiment", "profile", "method", "loss", "grid", "beta", "replicate", "value", "status",
            "n_trimmed", "clipped_pairs"]
EXP1_AGG = ["method", "loss", "grid", "mean", "se", "n_ok", "n_failed"]


def _exp1_replicate(cfg: Exp1Config, root, task):
    g, b, r = task
    profile = DegreeProfile.parse(cfg.degree_profile)
    seed = root.child("exp1", str(profile), g, r)
    beta = cfg.snr / b
    theta = sample_degrees(profile, cfg.n, b, seed.child("theta"))
    pi = generate_membership(cfg.n, cfg.K, cfg.pure_frac, seed.child("pi"))
    p = mixing_matrix(cfg.K, beta)
    omega = build_omega(theta, pi, p, clip=True)
    clipped = clipped_entries(theta, pi, p)
    a = sample_adjacency(omega, seed.child("adjacency"))
    rows = []
    for method in cfg.methods:
        base = dict(experiment="exp1", profile=cfg.tag, method=method, grid=float(b), beta=float(beta),
                    replicate=r, clipped_pairs=clipped)
        try:
            est = _estimate(method, a, cfg.K, cfg.c, cfg.gamma, cfg.tau, cfg.oms_trim)
        except DcmmError as exc:
            for spec in LOSSES:
                rows.append(dict(base, loss=spec.name, value=math.nan, status=_failure_label(exc), n_trimmed=-1))
            continue
        trimmed = int(np.count_nonzero(est.flags == NodeFlag.TRIMMED_UNIFORM))
        for spec in LOSSES:
            val = loss(est.pi_hat, pi, theta, spec).value
            rows.append(dict(base, loss=spec.name, value=float(val), status="ok", n_trimmed=trimmed))
    return rows


def run_experiment1(cfg: Exp1Config, seed=0, threads: int = 1, out_dir=None) -> ResultTable:
    """Loss against ``b_n = ||theta||`` at fixed SNR for each method.

    A fresh ``(theta, Pi, A)`` is drawn for every (grid point, replicate);
    estimator failures become rows with status ``failed:<error>@<step>``.
    """
    root = as_seed(seed)
    tasks = [(g, b, r) for g, b in enumerate(cfg.grid) for r in range(cfg.replicates)]
    results = parallel_map(lambda t: _exp1_replicate(cfg, root, t), tasks, threads)
    raw = sorted((row for rows in results for row in rows),
                 key=lambda d: (d["method"], d["loss"], d["grid"], d["replicate"]))
    table = ResultTable(raw, EXP1_RAW, aggregate(raw, ("method", "loss", "grid")), EXP1_AGG)
    table.failures = sum(1 for row in raw if row["status"] != "ok")
    if out_dir is not None:
        _write_exp1(table, cfg, Path(out_dir))
    return table


def _write_exp1(table, cfg, out):
    stem = f"exp1_{cfg.tag}"
    raw, agg, gp = out / f"{stem}_raw.csv", out / f"{stem}_summary.csv", out / f"{stem}.gp"
    write_table(raw, table.raw, table.raw_columns)
    write_table(agg, table.aggregate, table.aggregate_columns)
    plots = []
    for method in cfg.methods:
        for spec in LOSSES:
            plots.append(f"'< grep \"^{method},{spec.name},\" {agg.name}' using 3:4:5 with yerrorlines "
                         f"title '{method} {spec.name}'")
    gp.write_text(
        "set datafile separator ','\n"
        f"set title 'mean loss vs ||theta||, SNR = {fmt(cfg.snr)}, profile {cfg.degree_profile}'\n"
        "set xlabel '||theta||'\nset ylabel 'loss'\n"
        "plot " + ", \\\n     ".join(plots) + "\n",
        encoding="utf-8")
    table.files += [raw, agg, gp]


# --- experiment 2 -----------------------------------------------------------

EXP2_RAW = ["experiment", "profile", "method", "loss", "replicate", "value", "status"]
EXP2_NODES = ["node", "theta", "mean_error", "n_ok", "in_fit"]


def _exp2_replicate(cfg: Exp2Config, base, theta, pi, omega, r):
    a = omega if cfg.zero_noise else sample_adjacency(omega, base.child(r, "adjacency"))
    try:
        est = _estimate(cfg.method, a, cfg.K, cfg.c, cfg.gamma, cfg.tau, trim=not cfg.zero_noise)
    except DcmmError as exc:
        return _failure_label(exc), math.nan, None
    aligned = loss(est.pi_hat, pi, theta, UNWEIGHTED)
    return "ok", float(aligned.value), aligned.nodewise


def run_experiment2(cfg: Exp2Config, seed=0, threads: int = 1, out_dir=None) -> ResultTable:
    """Node-wise errors on a fixed ``(theta, Pi)`` over independent networks.

    The slope is the least-squares fit of ``log mean_error_i`` on
    ``log theta_i`` over nodes with ``theta_i <= mean(theta)``.  In
    zero-noise mode the expected adjacency is fed directly, trimming is off,
    and the slope is flagged undefined when every mean error is at the
    floating-point floor.
    """
    base = as_seed(seed).child("exp2", str(DegreeProfile.parse(cfg.degree_profile)))
    theta = sample_degrees(cfg.degree_profile, cfg.n, cfg.norm, base.child("theta"))
    pi = generate_membership(cfg.n, cfg.K, cfg.pure_frac, base.child("pi"))
    p = mixing_matrix(cfg.K, cfg.snr / cfg.norm)
    omega = build_omega(theta, pi, p, clip=True)
    clipped = clipped_entries(theta, pi, p)
    reps = 1 if cfg.zero_noise else cfg.replicates
    results = parallel_map(lambda r: _exp2_replicate(cfg, base, theta, pi, omega, r), range(reps), threads)

    raw = [dict(experiment="exp2", profile=cfg.tag, method=cfg.method, loss=UNWEIGHTED.name, replicate=r,
                value=val, status=status) for r, (status, val, _) in enumerate(results)]
    errs = [nw for status, _, nw in results if status == "ok"]
    n_ok = len(errs)
    mean_err = np.mean(errs, axis=0) if errs else np.full(cfg.n, math.nan)
    in_fit = theta <= theta.mean()
    nodes = [dict(node=i, theta=float(theta[i]), mean_error=float(mean_err[i]), n_ok=n_ok,
                  in_fit=int(in_fit[i])) for i in range(cfg.n)]
    fit = loglog_slope(theta[in_fit], mean_err[in_fit])
    exact = bool(errs) and bool(np.all(mean_err[in_fit] <= ZERO_ERROR_TOL))
    defined = fit.defined and not exact
    table = ResultTable(raw, EXP2_RAW, nodes, EXP2_NODES)
    table.failures = sum(1 for row in raw if row["status"] != "ok")
    table.summary = dict(
        profile=cfg.tag, method=cfg.method, replicates=reps, replicates_ok=n_ok,
        slope=fit.slope if defined else math.nan, intercept=fit.intercept if defined else math.nan,
        slope_defined=int(defined), nodes_in_fit=fit.used, excluded_zero=fit.excluded_zero,
        clipped_pairs=clipped, zero_noise=int(cfg.zero_noise),
        max_mean_error=float(np.nanmax(mean_err)) if errs else math.nan)
    if out_dir is not None:
        _write_exp2(table, cfg, Path(out_dir))
    return table


def _write_exp2(table, cfg, out):
    stem = f"exp2_{cfg.tag}"
    raw, nodes, summ, gp = (out / f"{stem}_raw.csv", out / f"{stem}_nodes.csv", out / f"{stem}_summary.csv",
                            out / f"{stem}.gp")
    write_table(raw, table.raw, table.raw_columns)
    write_table(nodes, table.aggregate, table.aggregate_columns)
    write_table(summ, [table.summary], list(table.summary))
    s = table.summary
    line = ""
    if s["slope_defined"]:
        line = f", exp({fmt(s['intercept'])}) * x**({fmt(s['slope'])}) title 'fit slope {s['slope']:.3f}'"
    gp.write_text(
        "set datafile separator ','\nset logscale xy\n"
        "set xlabel 'theta_i'\nset ylabel 'mean |pi_hat_i - pi_i|_1'\n"
        f"plot '{nodes.name}' every ::1 using ($5 == 1 ? $2 : 1/0):3 with points title 'theta_i <= mean'{line}\n",
        encoding="utf-8")
    table.files += [raw, nodes, summ, gp]


# --- rate study -------------------------------------------------------------

RATES_GRID = ["profile", "err_n", "integral", "ratio"]
RATES_N = ["n", "theta_bar", "delta_n", "baseline_rate"]


def run_rate_study(cfg: RatesConfig, seed=0, threads: int = 1, out_dir=None) -> ResultTable:
    """Optimal-rate integral over an ``err_n`` grid per profile, and the baseline rate over ``n``.

    The summary holds, per profile, the fitted log-log exponent of the
    integral in ``err_n``, the max/min spread of ``integral / err_n``, and
    the largest deviation from ``min(err_n, 1)``; plus the exponent of the
    baseline rate in ``n`` at fixed ``theta_bar``.
    """
    root = as_seed(seed)
    errs = np.logspace(math.log10(cfg.err_min), math.log10(cfg.err_max), cfg.points)
    rows, summary = [], {}
    for text in cfg.profiles:
        profile = DegreeProfile.parse(text)
        theta = sample_degrees(profile, cfg.n, cfg.norm, root.child("rates", str(profile)))
        cdf = EmpiricalCdf.from_theta(theta)
        vals = np.array([optimal_rate_integral(cdf, e) for e in errs])
        for e, v in zip(errs, vals):
            rows.append(dict(profile=str(profile), err_n=float(e), integral=float(v), ratio=float(v / e)))
        ratio = vals / errs
        summary[str(profile)] = dict(
            exponent=float(np.polyfit(np.log(errs), np.log(vals), 1)[0]),
            ratio_spread=float(ratio.max() / ratio.min()),
            max_gap_to_min=float(np.abs(vals - np.minimum(errs, 1.0)).max()))

    def n_point(n):
        n = int(n)
        theta = np.full(n, cfg.theta_bar)
        pi = generate_membership(n, cfg.K, cfg.pure_frac, root.child("rates", "n", n))
        inputs = rate_inputs(theta, pi, mixing_matrix(cfg.K, cfg.beta))
        return dict(n=n, theta_bar=cfg.theta_bar, delta_n=float(inputs.delta_n),
                    baseline_rate=float(baseline_rate(inputs)))

    n_rows = parallel_map(n_point, cfg.n_grid, threads)
    ns = np.array([r["n"] for r in n_rows], dtype=float)
    rates = np.array([r["baseline_rate"] for r in n_rows])
    n_exponent = float(np.polyfit(np.log(ns), np.log(rates), 1)[0]) if len(ns) > 1 else math.nan
    table = ResultTable(rows, RATES_GRID, n_rows, RATES_N)
    table.summary = dict(profiles=summary, n_exponent=n_exponent)
    if out_dir is not None:
        out = Path(out_dir)
        grid, by_n, summ = out / "rates_grid.csv", out / "rates_n.csv", out / "rates_summary.csv"
        write_table(grid, rows, RATES_GRID)
        write_table(by_n, n_rows, RATES_N)
        srows = [dict(profile=k, **v) for k, v in summary.items()]
        srows.append(dict(profile="baseline_vs_n", exponent=n_exponent, ratio_spread=math.nan,
                          max_gap_to_min=math.nan))
        write_table(summ, srows, ["profile", "exponent", "ratio_spread", "max_gap_to_min"])
        table.files += [grid, by_n, summ]
    return table


# --- LFC study --------------------------------------------------------------

LFC_COLUMNS = ["c0", "seed", "status", "variant", "J", "n0", "c0_used", "c0_halvings", "gamma_n", "err_n",
               "reference_rate", "min_pairwise_loss", "min_loss_ratio", "kl_sum", "kl_ratio",
               "kl_ratio_defined", "min_beta_ratio", "perron_positive", "members_valid"]


def _lfc_task(cfg: LfcConfig, root, theta, task):
    c0, s = task
    try:
        ens = build_lfc(theta, cfg.K, cfg.beta, c0=c0, j_target=cfg.j_target, variant=cfg.variant,
                        seed=root.child("lfc", "code", s), c_check=cfg.c_check, c_n=cfg.c_n)
    except DcmmError as exc:
        return dict(c0=c0, seed=s, status=_failure_label(exc)), None
    rep = lfc_report(ens)
    row = dict(c0=c0, seed=s, status="ok", **rep.__dict__)
    for k in ("kl_ratio_defined", "perron_positive", "members_valid"):
        row[k] = int(row[k])
    return row, ens


def run_lfc_study(cfg: LfcConfig, seed=0, threads: int = 1, out_dir=None) -> ResultTable:
    """Least-favorable ensembles for every ``(c0, code seed)`` on one ``theta``.

    The summary records, per ``c0``, the mean KL ratio, its value divided by
    ``c0^2``, and the spread (max/min) of the min-loss ratio across seeds.
    """
    root = as_seed(seed)
    theta = sample_degrees(cfg.degree_profile, cfg.n, cfg.norm, root.child("lfc", "theta"))
    tasks = [(float(c0), s) for c0 in cfg.c0 for s in range(cfg.seeds)]
    results = parallel_map(lambda t: _lfc_task(cfg, root, theta, t), tasks, threads)
    rows = [row for row, _ in results]
    for row in rows:
        for col in LFC_COLUMNS:
            row.setdefault(col, "")
    summary = {}
    for c0 in cfg.c0:
        ok = [r for r in rows if r["c0"] == c0 and r["status"] == "ok"]
        if not ok:
            summary[c0] = dict(kl_ratio=math.nan, kl_ratio_per_c0sq=math.nan, loss_ratio_spread=math.nan)
            continue
        kl = float(np.mean([r["kl_ratio"] for r in ok]))
        used = float(np.mean([r["c0_used"] for r in ok]))
        lr = np.array([r["min_loss_ratio"] for r in ok])
        summary[c0] = dict(kl_ratio=kl, kl_ratio_per_c0sq=kl / used ** 2,
                           loss_ratio_spread=float(lr.max() / lr.min()) if lr.min() > 0 else math.inf)
    table = ResultTable(rows, LFC_COLUMNS, summary=summary)
    table.failures = sum(1 for r in rows if r["status"] != "ok")
    if out_dir is not None:
        out = Path(out_dir)
        path = out / f"lfc_{cfg.variant}.csv"
        write_table(path, rows, LFC_COLUMNS)
        table.files.append(path)
        if cfg.write_members:
            _write_members(out, cfg, results)
            table.files.append(out / f"lfc_{cfg.variant}_members")
    return table


def _write_members(out, cfg, results):
    for (row, ens) in results:
        if ens is None:
            continue
        d = out / f"lfc_{cfg.variant}_members" / f"c0_{fmt(row['c0'])}_seed_{row['seed']}"
        d.mkdir(parents=True, exist_ok=True)
        write_vector_csv(d / "theta.csv", "theta", ens.theta)
        write_vector_csv(d / "order.csv", "original_index", ens.order)
        for j, mem in enumerate(ens.members):
            write_membership_csv(d / f"pi_{j}.csv", mem)
