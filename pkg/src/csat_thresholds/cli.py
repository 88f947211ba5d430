"""Command line entry point: ``csat-thresholds <command> ...``.

Exit status is 0 on success, 1 for data/config errors and 2 for usage
errors; failures print a one-line JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .domain import CsatError, GroupTrainingStats, N_CLASSES, RecordError, Thresholds, validate_call
from .experiment import HarnessSettings, TrialWindows, aggregate_bins, run_experiment
from .fileio import (
    RunConfig, SchemaError, grouped_document, load_config, parse_bins, read_calls, read_rows,
    read_thresholds, run_metadata, thresholds_document, to_date, write_bins, write_calls, write_cells,
    write_json,
)
from .loss import batch_loss_terms, breakdown_at
from .mapping import BOUNDARY_MODES, map_proba, map_probas
from .optimizer import derive_seed, fit_random_search
from .strategy import MODES, StrategyConfig, assign_thresholds, eligibility, uses_group_fit
from .synthdata import SynthConfig, beta_link, generate, DEFAULT_LINK, DEFAULT_PRIOR

log = logging.getLogger("csat_thresholds")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fail(kind: str, message: str, code: int, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)
    return code


def _meta_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".meta.json")


def _strategy(cfg: RunConfig) -> StrategyConfig:
    return StrategyConfig(
        mode=cfg.mode, hybrid_cutoff=cfg.hybrid_cutoff, min_high=cfg.min_high, min_low=cfg.min_low,
        baseline_thresholds=Thresholds.from_sequence(cfg.baseline),
    )


def synth_config(cfg: RunConfig, end: dt.date | None = None) -> SynthConfig:
    start = to_date(cfg.synth_start)
    if cfg.synth_end is not None:
        end = to_date(cfg.synth_end)
    elif end is None:
        end = start + dt.timedelta(days=364)
    link = DEFAULT_LINK
    if cfg.synth_link_means is not None:
        link = beta_link(cfg.synth_link_means, cfg.synth_link_concentration)
    return SynthConfig(
        n_groups=cfg.synth_n_groups,
        calls_per_group_per_day=cfg.synth_calls_per_day,
        start=start,
        end=end,
        survey_response_rate=cfg.synth_survey_response_rate,
        csat_prior=tuple(cfg.synth_csat_prior) if cfg.synth_csat_prior else DEFAULT_PRIOR,
        proba_link=link,
        group_proba_shift_sd=cfg.synth_group_proba_shift_sd,
        drift=tuple(cfg.synth_drift) if cfg.synth_drift else None,
        seed=cfg.synth_seed,
    )


def _windows(cfg: RunConfig, start: dt.date) -> TrialWindows:
    return TrialWindows(start, cfg.train_days, cfg.test_days, cfg.stride_days, cfg.n_trials)


def _load_input(path):
    table, rejections = read_calls(path)
    for r in rejections[:20]:
        log.warning("rejected row %d: %s (%s)", r.row, r.reason, r.message)
    if len(rejections) > 20:
        log.warning("... %d more rejected rows", len(rejections) - 20)
    return table, rejections


def _rejection_summary(rejections):
    return {"count": len(rejections), "first": [r.__dict__ for r in rejections[:20]]}


# -- commands ----------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = load_config(args.config, {"synth_seed": args.seed})
    scfg = synth_config(cfg)
    table = generate(scfg)
    write_calls(table, args.out)
    write_json(run_metadata("synth", cfg.to_dict(), scfg.seed, rows=len(table)), _meta_path(args.out))
    return 0


def _fit_grouped(table, cfg: RunConfig, args):
    labeled = table.label > 0
    gids = table.group_id
    proba = np.asarray(table.proba)
    label = np.asarray(table.label, dtype=np.int64)
    strat = _strategy(cfg)
    groups = sorted(set(gids[labeled]))
    index = {g: np.flatnonzero(labeled & (gids == g)) for g in groups}
    stats = {g: GroupTrainingStats.from_labels(g, label[index[g]]) for g in groups}
    eligible = [g for g in groups if eligibility(stats[g], strat)]
    warm = strat.baseline_thresholds if args.warm_start == "baseline" else None
    kw = dict(boundary_mode=cfg.boundary_mode, pct_units=cfg.pct_units)

    global_fit = None
    if eligible:
        pooled = np.concatenate([index[g] for g in eligible])
        global_fit = fit_random_search((proba[pooled], label[pooled]), cfg.iterations, cfg.seed, warm, **kw)
    fits = {
        g: fit_random_search((proba[index[g]], label[index[g]]), cfg.iterations,
                             derive_seed(cfg.seed, "fit", g), warm, **kw)
        for g in eligible if uses_group_fit(stats[g], strat)
    }
    assignments = assign_thresholds(stats, global_fit, fits, strat)
    default = global_fit.thresholds if global_fit is not None else strat.baseline_thresholds
    strategy_doc = {
        "mode": strat.mode, "hybrid_cutoff": strat.hybrid_cutoff, "min_high": strat.min_high,
        "min_low": strat.min_low, "baseline": strat.baseline_thresholds.to_dict(),
    }
    extra = {"seed": cfg.seed, "iterations": cfg.iterations,
             "n_responses": {g: stats[g].n_responses for g in groups}}
    if global_fit is not None:
        extra["global_loss"] = global_fit.loss.to_dict()
    return grouped_document(assignments, default, strategy_doc, **extra)


def cmd_fit(args) -> int:
    cfg = load_config(args.config, {
        "iterations": args.iterations, "seed": args.seed, "mode": args.strategy,
        "baseline": args.baseline, "boundary_mode": args.boundary_mode, "pct_units": args.pct_units,
        "hybrid_cutoff": args.hybrid_cutoff,
    })
    table, rejections = _load_input(args.input)
    fitted_on = {"path": str(args.input), "rows": len(table), "labeled": int((table.label > 0).sum())}
    if cfg.mode == "global":
        strat = _strategy(cfg)
        warm = strat.baseline_thresholds if args.warm_start == "baseline" else None
        fit = fit_random_search(table, cfg.iterations, cfg.seed, warm,
                                boundary_mode=cfg.boundary_mode, pct_units=cfg.pct_units)
        doc = thresholds_document(fit, fitted_on, boundary_mode=cfg.boundary_mode, pct_units=cfg.pct_units)
    else:
        doc = _fit_grouped(table, cfg, args)
        doc["fitted_on"] = fitted_on
    write_json(doc, args.out)
    write_json(
        run_metadata("fit", cfg.to_dict(), cfg.seed, [args.input], rejections=_rejection_summary(rejections)),
        _meta_path(args.out),
    )
    return 0


def cmd_apply(args) -> int:
    ths = read_thresholds(args.thresholds)
    header, rows = read_rows(args.input)
    if "pcsat" in header:
        raise SchemaError("input already has a pcsat column")
    pcsat = []
    bad = []
    for row_no, row in enumerate(rows, start=1):
        try:
            call = validate_call(dict(zip(header, row)), row=row_no)
        except RecordError as exc:
            bad.append({"row": row_no, "reason": exc.reason, "message": exc.message})
            continue
        th = ths.for_group(call.group_id)
        pcsat.append(map_proba(call.proba, th, args.boundary_mode))
    if bad:
        return _fail("InvalidRows", f"{len(bad)} row(s) cannot be scored", 1, rows=bad[:50])
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header + ["pcsat"])
        for row, p in zip(rows, pcsat):
            w.writerow(row + [p])
    write_json(
        run_metadata("apply", {"thresholds": str(args.thresholds), "boundary_mode": args.boundary_mode},
                     None, [args.input, args.thresholds], rows=len(rows)),
        _meta_path(args.out),
    )
    return 0


def _distribution_loss(proba, label, classes, pct_units):
    pred = np.bincount(classes, minlength=N_CLASSES + 1)[1:]
    obs = np.bincount(label, minlength=N_CLASSES + 1)[1:]
    out = breakdown_at(batch_loss_terms(pred, obs, pct_units), 0).to_dict()
    out.update(n_responses=int(label.size), pred_counts=pred.tolist(), obs_counts=obs.tolist())
    return out


def cmd_evaluate(args) -> int:
    ths = read_thresholds(args.thresholds)
    table, rejections = _load_input(args.input)
    mask = table.label > 0
    if not mask.any():
        return _fail("EmptyInput", "no surveyed calls to evaluate against", 1)
    proba = np.asarray(table.proba[mask])
    label = np.asarray(table.label[mask], dtype=np.int64)
    gids = table.group_id[mask]
    classes = np.empty(label.size, dtype=np.int64)
    per_group = {}
    for g in sorted(set(gids)):
        idx = np.flatnonzero(gids == g)
        classes[idx] = map_probas(proba[idx], ths.for_group(g), args.boundary_mode)
        per_group[g] = _distribution_loss(proba[idx], label[idx], classes[idx], args.pct_units)
    doc = {"overall": _distribution_loss(proba, label, classes, args.pct_units)}
    if args.by_group:
        doc["groups"] = per_group
    doc["rejections"] = _rejection_summary(rejections)
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        write_json(run_metadata("evaluate", {"thresholds": str(args.thresholds)}, None,
                                [args.input, args.thresholds]), _meta_path(args.out))
    else:
        print(text)
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, {"seed": args.seed, "workers": args.workers, "out": args.out})
    if cfg.out is None:
        raise UsageError("simulate needs --out or an 'out' config key")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    inputs = [args.config] if args.config else []
    rejections = []
    if cfg.input:
        table, rejections = _load_input(cfg.input)
        inputs.append(cfg.input)
        start = to_date(cfg.start_date) if cfg.start_date else table.day.min().item()
        windows = _windows(cfg, start)
    else:
        start = to_date(cfg.start_date or cfg.synth_start)
        windows = _windows(cfg, start)
        table = generate(synth_config(cfg, end=windows.end_date - dt.timedelta(days=1)))

    bins = parse_bins(cfg.bins)
    settings = HarnessSettings(cfg.iterations, cfg.bootstrap_resamples, cfg.boundary_mode, cfg.pct_units, cfg.seed)
    result = run_experiment(table, windows, _strategy(cfg), settings, bins, workers=cfg.workers)
    write_cells(result.reports, out / "cells.csv")
    write_bins(aggregate_bins(result.reports, bins), out / "bins.csv")
    write_json(
        run_metadata(
            "simulate", cfg.to_dict(), cfg.seed, inputs,
            rows=len(table),
            windows={"start": str(windows.start_date), "end_exclusive": str(windows.end_date)},
            n_reports=len(result.reports),
            excluded_group_trials=result.n_excluded,
            skips=[s.__dict__ for s in result.skips],
            warm_start_wins=[list(w) for w in result.warm_start_wins],
            rejections=_rejection_summary(rejections),
        ),
        out / "metadata.json",
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="csat-thresholds", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic call CSV")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    f = sub.add_parser("fit", help="fit thresholds on a labeled call CSV")
    f.add_argument("--input", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--config")
    f.add_argument("--iterations", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--strategy", choices=MODES, default="global")
    f.add_argument("--hybrid-cutoff")
    f.add_argument("--baseline", help="t12,t23,t34,t45")
    f.add_argument("--warm-start", choices=("baseline", "none"), default="baseline")
    f.add_argument("--boundary-mode", choices=BOUNDARY_MODES)
    f.add_argument("--pct-units", choices=("fraction", "points"))
    f.set_defaults(func=cmd_fit)

    a = sub.add_parser("apply", help="add a pcsat column using fitted thresholds")
    a.add_argument("--input", required=True)
    a.add_argument("--thresholds", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--boundary-mode", choices=BOUNDARY_MODES, default="strict")
    a.set_defaults(func=cmd_apply)

    e = sub.add_parser("evaluate", help="loss of given thresholds on a labeled CSV")
    e.add_argument("--input", required=True)
    e.add_argument("--thresholds", required=True)
    e.add_argument("--out")
    e.add_argument("--by-group", action="store_true")
    e.add_argument("--boundary-mode", choices=BOUNDARY_MODES, default="strict")
    e.add_argument("--pct-units", choices=("fraction", "points"), default="fraction")
    e.set_defaults(func=cmd_evaluate)

    m = sub.add_parser("simulate", help="run the five-condition rolling-trial experiment")
    m.add_argument("--config")
    m.add_argument("--out")
    m.add_argument("--seed", type=int)
    m.add_argument("--workers", type=int)
    m.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("UsageError", str(exc), 2)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail("UsageError", str(exc), 2)
    except (CsatError, ValueError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    except OSError as exc:
        return _fail("IoError", str(exc), 1)


if __name__ == "__main__":
    raise SystemExit(main())
