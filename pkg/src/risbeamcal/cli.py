"""Batch command-line front end.

Subcommands:

* synth      — forge a ground-truth pattern CSV (plus truth record JSON).
* calibrate  — fit one model (or all) to a pattern file, emit report JSON.
* eval       — weighted pattern loss of calibrated models against a truth file.
* alb-map    — localization-bias map over the scene grid, CSV output.
* cdf        — empirical CDF of a bias map, CSV output.

All commands are deterministic given (config, seed); re-runs are
byte-identical.  The RISBEAMCAL_CONFIG environment variable supplies a
default --config path.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .calibrators import (
    CalibrationReport,
    calibrate_ci,
    calibrate_mcm_direct,
    calibrate_mcm_twostep,
    calibrate_nc,
    run_all_models,
)
from .beam_models import eval_ci, eval_ideal, eval_mcm, eval_nc, loss_l1
from .isac_channel import PatternBeamSource, beam_source_from_report
from .mismatch import alb_grid, cdf, load_alb_csv, save_alb_csv, save_cdf_csv
from .scene import CONFIG_ENV_VAR, SceneConfig, load_scene_config
from .truth_forge import load_patterns, save_patterns, synth_ground_truth

MODEL_CHOICES = ("ideal", "mcm", "mcm-twostep", "nc", "ci", "all")


def _load_config(args) -> SceneConfig:
    path = args.config or os.environ.get(CONFIG_ENV_VAR) or None
    return load_scene_config(path)


def _steering_for(patterns):
    from .array_core import steering_matrix

    return steering_matrix(patterns.grid, patterns.element_count)


def _codebook_for(patterns):
    from .array_core import build_codebook

    return build_codebook(patterns.scan_angles_deg, patterns.element_count,
                          patterns.phase_bits)


def cmd_synth(args) -> int:
    config = _load_config(args)
    seed = config.seed if args.seed is None else args.seed
    out = Path(args.out)
    patterns, record = synth_ground_truth(
        config.array_config(), config.impairment_config(seed=seed)
    )
    save_patterns(patterns, out)
    truth_path = out.with_name(out.stem + "_truth.json")
    truth_path.write_text(
        json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {out}")
    print(f"wrote {out.with_suffix('.json')}")
    print(f"wrote {truth_path}")
    return 0


def _fit_single(model: str, truth, steering, codebook, config: SceneConfig):
    weights = config.metric_weights(truth.grid)
    if model == "ideal":
        return CalibrationReport(
            model="ideal", loss=loss_l1(truth, eval_ideal(codebook, steering), weights)
        )
    if model == "mcm":
        coupling = calibrate_mcm_direct(truth, steering, codebook)
        loss = loss_l1(truth, eval_mcm(codebook, steering, coupling), weights)
        return CalibrationReport(model="mcm", loss=loss, coupling=coupling)
    if model == "mcm-twostep":
        coupling = calibrate_mcm_twostep(truth, steering, codebook)
        loss = loss_l1(truth, eval_mcm(codebook, steering, coupling), weights)
        return CalibrationReport(model="mcm-twostep", loss=loss, coupling=coupling)
    if model == "nc":
        perturbed = calibrate_nc(truth, steering)
        loss = loss_l1(
            truth, eval_nc(perturbed, steering, truth.scan_angles_deg), weights
        )
        return CalibrationReport(model="nc", loss=loss, codebook=perturbed)
    if model == "ci":
        report = calibrate_ci(truth, steering, config.ci_options())
        report.loss = loss_l1(
            truth,
            eval_ci(report.codebook, steering, report.correction,
                    truth.scan_angles_deg),
            weights,
        )
        return report
    raise ValueError(f"unknown model {model!r}")


def cmd_calibrate(args) -> int:
    config = _load_config(args)
    truth = load_patterns(args.patterns)
    steering = _steering_for(truth)
    codebook = _codebook_for(truth)
    if args.model == "all":
        reports = run_all_models(
            truth, steering, codebook, config.ci_options(),
            config.metric_weights(truth.grid),
        )
    else:
        reports = [_fit_single(args.model, truth, steering, codebook, config)]
    payload = {"reports": [r.to_dict() for r in reports]}
    Path(args.out).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for report in reports:
        print(f"{report.model}: loss={report.loss:.6e}")
    print(f"wrote {args.out}")
    return 0


def _load_reports(path) -> list[CalibrationReport]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict) and "reports" in data:
        entries = data["reports"]
    elif isinstance(data, dict):
        entries = [data]
    else:
        raise ValueError(f"{path}: expected a report object or a reports list")
    return [CalibrationReport.from_dict(entry) for entry in entries]


def _select_report(reports: list[CalibrationReport], model: str | None):
    if model is None:
        if len(reports) == 1:
            return reports[0]
        raise ValueError(
            "report file holds multiple models; pass --model to choose one"
        )
    for report in reports:
        if report.model == model:
            return report
    raise ValueError(f"no report for model {model!r} in the report file")


def cmd_eval(args) -> int:
    config = _load_config(args)
    truth = load_patterns(args.patterns)
    steering = _steering_for(truth)
    codebook = _codebook_for(truth)
    weights = config.metric_weights(truth.grid)
    losses: dict[str, float] = {}
    if args.report is None:
        losses["ideal"] = loss_l1(truth, eval_ideal(codebook, steering), weights)
    else:
        for report in _load_reports(args.report):
            if report.model == "ideal":
                model_patterns = eval_ideal(codebook, steering)
            elif report.model in ("mcm", "mcm-twostep"):
                model_patterns = eval_mcm(codebook, steering, report.coupling)
            elif report.model == "nc":
                model_patterns = eval_nc(report.codebook, steering,
                                         truth.scan_angles_deg)
            elif report.model == "ci":
                model_patterns = eval_ci(report.codebook, steering,
                                         report.correction, truth.scan_angles_deg)
            else:
                raise ValueError(f"unknown model tag {report.model!r}")
            losses[report.model] = loss_l1(truth, model_patterns, weights)
    for model, loss in losses.items():
        print(f"{model}: loss={loss:.6e}")
    if args.out:
        Path(args.out).write_text(
            json.dumps({"losses": losses}, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        print(f"wrote {args.out}")
    return 0


def cmd_alb_map(args) -> int:
    config = _load_config(args)
    truth = load_patterns(args.patterns)
    true_source = PatternBeamSource(truth)
    codebook = _codebook_for(truth)
    if args.model == "ideal" and args.report is None:
        report = CalibrationReport(model="ideal", loss=0.0)
    else:
        if args.report is None:
            raise ValueError("alb-map needs --report unless --model ideal")
        report = _select_report(_load_reports(args.report), args.model)
    model_source = beam_source_from_report(report, codebook, truth.grid)
    grid = alb_grid(
        config.ue_region(),
        config.ue_step(),
        true_source,
        model_source,
        config.geometry(),
        config.signal_config(),
        jobs=args.jobs,
    )
    save_alb_csv(grid, args.out)
    print(f"wrote {args.out} ({int(grid.valid.sum())} valid cells)")
    return 0


def cmd_cdf(args) -> int:
    rows = load_alb_csv(args.alb)
    values = [value for _x, _y, value, ok in rows if ok]
    if not values:
        raise ValueError(f"{args.alb}: no valid bias values")
    thresholds = sorted(set(values))
    points = cdf(values, thresholds)
    save_cdf_csv(points, args.out)
    print(f"wrote {args.out} ({len(points)} thresholds)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risbeamcal",
        description="Beam-pattern calibration and localization-bias toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True, jobs=False):
        p.add_argument("--config", default=None, help="scene config JSON path")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help="override the config seed")
        if jobs:
            p.add_argument("--jobs", type=int, default=1,
                           help="parallel worker processes")

    p_synth = sub.add_parser("synth", help="forge a ground-truth pattern file")
    common(p_synth)
    p_synth.add_argument("--out", required=True, help="pattern CSV path")
    p_synth.set_defaults(func=cmd_synth)

    p_cal = sub.add_parser("calibrate", help="fit beam models to a pattern file")
    common(p_cal, seed=False)
    p_cal.add_argument("--patterns", required=True, help="pattern CSV path")
    p_cal.add_argument("--model", choices=MODEL_CHOICES, default="all")
    p_cal.add_argument("--out", required=True, help="report JSON path")
    p_cal.set_defaults(func=cmd_calibrate)

    p_eval = sub.add_parser("eval", help="pattern loss of calibrated models")
    common(p_eval, seed=False)
    p_eval.add_argument("--patterns", required=True, help="truth pattern CSV")
    p_eval.add_argument("--report", default=None, help="calibration report JSON")
    p_eval.add_argument("--out", default=None, help="optional JSON output")
    p_eval.set_defaults(func=cmd_eval)

    p_map = sub.add_parser("alb-map", help="localization-bias map over the scene")
    common(p_map, seed=False, jobs=True)
    p_map.add_argument("--patterns", required=True, help="truth pattern CSV")
    p_map.add_argument("--report", default=None, help="calibration report JSON")
    p_map.add_argument("--model", default=None,
                       help="model tag to pick from the report (or 'ideal')")
    p_map.add_argument("--out", required=True, help="bias map CSV path")
    p_map.set_defaults(func=cmd_alb_map)

    p_cdf = sub.add_parser("cdf", help="empirical CDF of a bias map")
    p_cdf.add_argument("--alb", required=True, help="bias map CSV path")
    p_cdf.add_argument("--out", required=True, help="CDF CSV path")
    p_cdf.set_defaults(func=cmd_cdf)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
