"""Command-line front end.

Every option can also come from a JSON file given with ``--config``; flags
win over the file, which wins over the built-in defaults. The file may hold
top-level keys (applied to any command that has the option) and per-command
sections keyed by command name.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import shutil
import sys
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd

from . import __version__
from .core import ParseError, RatioKind, ValidationError
from .effects import (
    adjust_assists,
    bonus_frame,
    bonus_samples,
    coefficient_stability,
    predicted_ratios,
    scorekeeper_bonus,
)
from .features import extract_all, read_assist_labels, read_potential_assists, write_potential_assists
from .ingest import load_dir, read_box, team_game_ratios, write_bundles
from .regress import (
    DEFAULT_LAMBDA,
    MODEL_SPECS,
    ConvergenceError,
    ModelFit,
    UnderdeterminedError,
    build_contextual_design,
    build_team_design,
    cross_validate,
    fit_contextual_model,
    fit_team_model,
    select_lambda,
)
from .synth import GenerationError, GroundTruth, default_truth, iter_season, recovery_report, write_season

logger = logging.getLogger("scorekeeper")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_USAGE = 64
EXIT_NOINPUT = 66
EXIT_SOFTWARE = 70

SPEC_CHOICES = ("full", "no-scorekeeper", "no-context", "intercept")

# built-in defaults per command; None marks a required option
DEFAULTS: dict[str, dict[str, Any]] = {
    "ingest": {"data_dir": None, "out": None},
    "extract": {"bundle_dir": None, "labels": "", "out": None},
    "fit-team": {"box": None, "ratio": "ar", "out": None, "ratios_out": ""},
    "fit-contextual": {"pa": None, "lambda_grid": "1e-6..1e2:25", "lam": None,
                       "folds": 100, "seed": 0, "out": None},
    "validate": {"pa": None, "spec": "full", "folds": 10, "seed": 0,
                 "lam": DEFAULT_LAMBDA, "json_out": ""},
    "adjust": {"fit": None, "pa": None, "out": None, "mode": "expected"},
    "bonus": {"fit": None, "pa": None, "out": None, "summary_out": ""},
    "stability": {"fits": None, "names": None, "out": None},
    "synth": {"truth": "", "truth_seed": None, "games": 2000, "seed": 0, "out": None,
              "frame_step_ms": 0},
    "recover": {"truth": None, "fit": None, "json_out": ""},
    "print-config": {},
}
GLOBAL_DEFAULTS = {"threads": os.cpu_count() or 1, "log_level": "INFO"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def parse_lambda_grid(text: str) -> list[float]:
    """``lo..hi:n`` for a log-spaced grid, or a comma-separated list."""
    text = text.strip()
    try:
        if ".." in text:
            span, _, count = text.partition(":")
            lo, _, hi = span.partition("..")
            lo_v, hi_v, n = float(lo), float(hi), int(count) if count else 25
            if not (0 < lo_v <= hi_v) or n < 1:
                raise ValueError
            return [float(v) for v in np.logspace(math.log10(lo_v), math.log10(hi_v), n)]
        values = sorted(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"bad lambda grid {text!r}; expected 'lo..hi:n' or 'a,b,c'") from None
    if not values or any(v <= 0 for v in values):
        raise UsageError(f"bad lambda grid {text!r}")
    return values


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="scorekeeper", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config file (flags override it)")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads; outputs do not depend on it (default {GLOBAL_DEFAULTS['threads']})")
    common.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="stderr log level (default INFO)")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def cmd(name, help_text):
        return sub.add_parser(name, help=help_text, description=help_text, parents=[common])

    c = cmd("ingest", "validate raw CSVs and write normalized game bundles")
    c.add_argument("--data-dir", help="directory with moments/events/box/roster CSVs (required)")
    c.add_argument("--out", help="output bundle directory (required)")

    c = cmd("extract", "extract potential assists with covariates from a bundle directory")
    c.add_argument("--bundle-dir", help="bundle directory (required)")
    c.add_argument("--labels", help="assists.csv with recorded assists (default: BUNDLE_DIR/assists.csv if present)")
    c.add_argument("--out", help="potential_assists.csv to write (required)")

    c = cmd("fit-team", "fit the team-level ratio model by least squares")
    c.add_argument("--box", help="box.csv (required)")
    c.add_argument("--ratio", choices=["ar", "br"], help="assist or block ratio (default ar)")
    c.add_argument("--out", help="fit JSON to write (required)")
    c.add_argument("--ratios-out", help="optional CSV of predicted home/away ratios per scorekeeper")

    c = cmd("fit-contextual", "fit the penalized logistic model, choosing lambda by cross-validation")
    c.add_argument("--pa", help="potential_assists.csv (required)")
    c.add_argument("--lambda-grid", help="'lo..hi:n' log grid or comma list (default 1e-6..1e2:25)")
    c.add_argument("--lambda", dest="lam", type=float, help="fixed lambda; skips cross-validation")
    c.add_argument("--folds", type=int, help="cross-validation folds (default 100)")
    c.add_argument("--seed", type=int, help="fold seed (default 0)")
    c.add_argument("--out", help="fit JSON to write (required)")

    c = cmd("validate", "held-out log-likelihood and misclassification for a model specification")
    c.add_argument("--pa", help="potential_assists.csv (required)")
    c.add_argument("--spec", choices=SPEC_CHOICES, help="model specification (default full)")
    c.add_argument("--folds", type=int, help="folds (default 10)")
    c.add_argument("--seed", type=int, help="fold seed (default 0)")
    c.add_argument("--lambda", dest="lam", type=float, help=f"penalty (default {DEFAULT_LAMBDA:g})")
    c.add_argument("--json-out", help="optional JSON file for the metrics")

    c = cmd("adjust", "adjusted assist totals with per-effect contributions")
    c.add_argument("--fit", help="contextual fit JSON (required)")
    c.add_argument("--pa", help="potential_assists.csv (required)")
    c.add_argument("--out", help="adjusted_assists.csv to write (required)")
    c.add_argument("--mode", choices=["expected", "recorded-delta"],
                   help="sum of adjusted probabilities, or recorded count minus the probability shift (default expected)")

    c = cmd("bonus", "per-game scorekeeper bonus samples and their summaries")
    c.add_argument("--fit", help="contextual fit JSON (required)")
    c.add_argument("--pa", help="potential_assists.csv (required)")
    c.add_argument("--out", help="bonus_samples.csv to write (required)")
    c.add_argument("--summary-out", help="optional JSON with mean/variance/MAE per scorekeeper and side")

    c = cmd("stability", "correlation of coefficient groups across fits")
    c.add_argument("--fits", nargs="+", help="two or more fit JSON files (required)")
    c.add_argument("--names", nargs="+", help="labels for the fits (default: file stems)")
    c.add_argument("--out", help="stability.csv to write (required)")

    c = cmd("synth", "generate a synthetic season with known coefficients")
    c.add_argument("--truth", help="ground_truth.json to use (default: generated from --truth-seed)")
    c.add_argument("--truth-seed", type=int, help="seed for the generated truth (default: --seed)")
    c.add_argument("--games", type=int, help="number of games (default 2000)")
    c.add_argument("--seed", type=int, help="season seed (default 0)")
    c.add_argument("--out", help="output data directory (required)")
    c.add_argument("--frame-step-ms", type=int,
                   help="fill frames between anchors on this grid; 0 keeps anchors only (default 0)")

    c = cmd("recover", "compare a fit with the planted coefficients")
    c.add_argument("--truth", help="ground_truth.json (required)")
    c.add_argument("--fit", help="fit JSON (required)")
    c.add_argument("--json-out", help="optional JSON file for the report")

    cmd("print-config", "print the effective configuration of every command as JSON")
    return p


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    return cfg


def _config_value(cfg: dict, command: str, key: str):
    section = cfg.get(command)
    for source in ((section if isinstance(section, dict) else {}), cfg):
        for k in (key, key.replace("_", "-"), "lambda" if key == "lam" else key):
            if k in source and not isinstance(source[k], dict):
                return True, source[k]
    return False, None


def resolve(command: str, args: argparse.Namespace, cfg: dict) -> dict:
    """Effective options for ``command``: flags > config > defaults."""
    out = {}
    for key, default in {**GLOBAL_DEFAULTS, **DEFAULTS[command]}.items():
        value = getattr(args, key, None)
        if value is None:
            found, value = _config_value(cfg, command, key)
            if not found:
                value = default
        out[key] = value
    missing = [k for k, v in DEFAULTS[command].items()
               if v is None and out[k] is None and k not in ("lam", "truth_seed", "names")]
    if missing:
        raise UsageError(f"{command}: missing required option(s) "
                         + ", ".join("--" + k.replace("_", "-") for k in missing))
    return out


# -- commands ---------------------------------------------------------------------


def _write_json(path: str, obj) -> None:
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(frame: pd.DataFrame, path: str) -> None:
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    frame.to_csv(path, index=False, float_format=None)


def run_ingest(o: dict) -> int:
    bundles = load_dir(o["data_dir"])
    write_bundles(bundles, o["out"])
    labels = os.path.join(o["data_dir"], "assists.csv")
    if os.path.exists(labels):
        shutil.copyfile(labels, os.path.join(o["out"], "assists.csv"))
    n_moments = sum(len(b.moments) for b in bundles)
    logger.info("ingested %d games, %d moments", len(bundles), n_moments)
    print(f"games\t{len(bundles)}\nmoments\t{n_moments}")
    return EXIT_OK


def run_extract(o: dict) -> int:
    bundles = load_dir(o["bundle_dir"])
    label_path = o["labels"] or os.path.join(o["bundle_dir"], "assists.csv")
    if o["labels"] or os.path.exists(label_path):
        labels = read_assist_labels(label_path)
    else:
        logger.warning("no assists.csv found; every potential assist is labelled 0")
        labels = frozenset()
    pas = extract_all(bundles, labels, threads=o["threads"])
    write_potential_assists(pas, o["out"])
    rate = sum(pa.label_recorded_assist for pa in pas) / len(pas) if pas else float("nan")
    logger.info("%d potential assists, %.4f recorded", len(pas), rate)
    print(f"potential_assists\t{len(pas)}\nrecorded_rate\t{rate:.6f}")
    return EXIT_OK


def run_fit_team(o: dict) -> int:
    kind = RatioKind(o["ratio"].upper())
    lines = [line for game in read_box(o["box"]).values() for line in game]
    obs = [r for r in team_game_ratios(lines) if r.ratio_kind is kind]
    design, y = build_team_design(obs)
    fit = fit_team_model(design, y)
    fit.diagnostics["ratio"] = kind.value
    fit.diagnostics["league_ratio"] = float(np.mean(y))
    fit.save(o["out"])
    pr = predicted_ratios(fit, float(np.mean(y)))
    frame = pd.DataFrame([(sk, h, a) for sk, (h, a) in sorted(pr.items())],
                         columns=["scorekeeper", "predicted_home", "predicted_away"])
    if o["ratios_out"]:
        _write_csv(frame, o["ratios_out"])
    print(frame.to_csv(sep="\t", index=False), end="")
    logger.info("team model on %d observations, R^2 %.4f", fit.n_obs, fit.diagnostics["r_squared"])
    return EXIT_OK


def run_fit_contextual(o: dict) -> int:
    pas = read_potential_assists(o["pa"])
    design, y = build_contextual_design(pas)
    if o["lam"] is not None:
        lam = float(o["lam"])
    else:
        grid = parse_lambda_grid(str(o["lambda_grid"]))
        folds = min(int(o["folds"]), len(y))
        lam = select_lambda(design, y, grid, folds=folds, seed=int(o["seed"]), threads=o["threads"])
    fit = fit_contextual_model(design, y, lam)
    fit.save(o["out"])
    print(f"lambda\t{lam!r}\nn_obs\t{fit.n_obs}\n"
          f"mean_log_likelihood\t{fit.diagnostics['mean_log_likelihood']:.6f}")
    return EXIT_OK


def run_validate(o: dict) -> int:
    pas = read_potential_assists(o["pa"])
    r = cross_validate(pas, o["spec"].replace("-", "_"), folds=int(o["folds"]),
                       seed=int(o["seed"]), lam=float(o["lam"]), threads=o["threads"])
    result = {"spec": o["spec"], "folds": r.folds, "n_obs": r.n_obs, "lambda": float(o["lam"]),
              "mean_log_likelihood": r.mean_log_likelihood, "misclassification": r.misclassification}
    print(f"{'model':<16}{'mean_log_lik':>14}{'misclass':>10}")
    print(f"{o['spec']:<16}{r.mean_log_likelihood:>14.4f}{r.misclassification:>10.4f}")
    print(json.dumps(result, sort_keys=True))
    if o["json_out"]:
        _write_json(o["json_out"], result)
    return EXIT_OK


def run_adjust(o: dict) -> int:
    fit = ModelFit.load(o["fit"])
    pas = read_potential_assists(o["pa"])
    report = adjust_assists(fit, pas, mode=o["mode"].replace("-", "_"))
    _write_csv(report.frame(), o["out"])
    logger.info("adjusted totals for %d players", len(report.players))
    return EXIT_OK


def run_bonus(o: dict) -> int:
    fit = ModelFit.load(o["fit"])
    pas = read_potential_assists(o["pa"])
    _write_csv(bonus_frame(bonus_samples(fit, pas)), o["out"])
    summary = [d.summary() for d in scorekeeper_bonus(fit, pas)]
    if o["summary_out"]:
        _write_json(o["summary_out"], summary)
    frame = pd.DataFrame(summary)
    print(frame.to_csv(sep="\t", index=False, float_format="%.4f"), end="")
    return EXIT_OK


def run_stability(o: dict) -> int:
    fits = [ModelFit.load(p) for p in o["fits"]]
    names = o["names"] or [os.path.splitext(os.path.basename(p))[0] for p in o["fits"]]
    if len(names) != len(fits):
        raise UsageError("--names must match --fits in length")
    table = coefficient_stability(fits, names)
    _write_csv(table, o["out"])
    print(table.to_csv(sep="\t", index=False, float_format="%.3f"), end="")
    return EXIT_OK


def run_synth(o: dict) -> int:
    if o["truth"]:
        truth = GroundTruth.load(o["truth"])
    else:
        seed = o["truth_seed"] if o["truth_seed"] is not None else o["seed"]
        truth = default_truth(int(seed))
    step = int(o["frame_step_ms"]) or None
    n = write_season(iter_season(truth, int(o["games"]), int(o["seed"]), step), truth, o["out"])
    logger.info("wrote %d synthetic games to %s", n, o["out"])
    print(f"games\t{n}")
    return EXIT_OK


def run_recover(o: dict) -> int:
    report = recovery_report(GroundTruth.load(o["truth"]), ModelFit.load(o["fit"]))
    print(f"{'group':<28}{'levels':>7}{'correlation':>13}{'rmse':>10}")
    for g, r in report.items():
        print(f"{g:<28}{r['n_levels']:>7}{r['correlation']:>13.4f}{r['rmse']:>10.4f}")
    if o["json_out"]:
        _write_json(o["json_out"], {g: {k: (None if isinstance(v, float) and math.isnan(v) else v)
                                         for k, v in r.items()} for g, r in report.items()})
    return EXIT_OK


def run_print_config(args: argparse.Namespace, cfg: dict) -> int:
    out = {"global": {k: _config_value(cfg, "", k)[1] if _config_value(cfg, "", k)[0] else v
                      for k, v in GLOBAL_DEFAULTS.items()}}
    for command, defaults in DEFAULTS.items():
        if not defaults:
            continue
        section = {}
        for key, default in defaults.items():
            found, value = _config_value(cfg, command, key)
            section[key] = value if found else default
        out[command] = section
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "ingest": run_ingest,
    "extract": run_extract,
    "fit-team": run_fit_team,
    "fit-contextual": run_fit_contextual,
    "validate": run_validate,
    "adjust": run_adjust,
    "bonus": run_bonus,
    "stability": run_stability,
    "synth": run_synth,
    "recover": run_recover,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        cfg = _load_config(args.config)
        if args.command == "print-config":
            return run_print_config(args, cfg)
        opts = resolve(args.command, args, cfg)
        logging.basicConfig(level=opts["log_level"], stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](opts)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except GenerationError as exc:
        print(f"error: synthetic generation failed: {exc}", file=sys.stderr)
        return EXIT_SOFTWARE
    except ConvergenceError as exc:
        print(f"error: model did not converge: {exc} (gradient norm {exc.grad_norm:.3g})",
              file=sys.stderr)
        return EXIT_SOFTWARE
    except (ParseError, ValidationError, UnderdeterminedError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOINPUT


if __name__ == "__main__":
    sys.exit(main())
