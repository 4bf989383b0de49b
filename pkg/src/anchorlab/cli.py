"""Command-line surface: fit, path, cv, simulate, verify, rank.

Outputs are plain data files (CSV or JSON) with all floats at 12 significant
digits, so repeated runs with the same seed and config are byte-identical.
Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 verification failure.

The environment variable ANCHORLAB_THREADS caps worker parallelism. The
current solvers are sequential, so any positive value is honored; the knob
exists so scripted callers stay valid if grid loops gain workers later.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import batteries, datamodel, estimators, modelsel, numkern, scm as scm_mod, sparse
from .datamodel import FLOAT_FORMAT
from .exceptions import AnchorlabError, InvalidConfig, ParseError, MissingColumn

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_VERIFY = 4

CONFIG_ERRORS = (
    InvalidConfig,
    ParseError,
    MissingColumn,
    FileNotFoundError,
    IsADirectoryError,
    PermissionError,
    json.JSONDecodeError,
    KeyError,
)


def max_threads() -> int:
    """Positive worker cap from ANCHORLAB_THREADS (default 1)."""
    raw = os.environ.get("ANCHORLAB_THREADS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise InvalidConfig(f"ANCHORLAB_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise InvalidConfig(f"ANCHORLAB_THREADS must be positive, got {value}")
    return value


def _fmt(x) -> str:
    return FLOAT_FORMAT % float(x)


def _round_tripped(obj):
    """Clamp every float in a JSON tree to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _round_tripped(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tripped(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round_tripped(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(_fmt(obj))
    return obj


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_round_tripped(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_table(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [cell if isinstance(cell, str) else _fmt(cell) for cell in row]
            )


def _parse_gamma(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    try:
        value = float(text)
    except ValueError:
        raise InvalidConfig(f"cannot parse gamma value {text!r}") from None
    return value


def _parse_float_list(text: str, name: str) -> list:
    if not text.strip():
        raise InvalidConfig(f"{name} grid must be nonempty")
    out = []
    for piece in text.split(","):
        piece = piece.strip()
        if name == "gamma":
            out.append(_parse_gamma(piece))
        else:
            try:
                out.append(float(piece))
            except ValueError:
                raise InvalidConfig(f"cannot parse {name} value {piece!r}") from None
    return out


def _load_dataset(args) -> datamodel.AnchorDataset:
    if args.data is None:
        raise InvalidConfig("--data is required for this subcommand")
    if args.config is None:
        raise InvalidConfig("--config is required when reading a dataset")
    config = datamodel.load_column_config(args.config)
    return datamodel.read_csv(args.data, config)


def _outdir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _coef_rows(names, coef):
    return [(name, float(c)) for name, c in zip(names, coef)]


def cmd_fit(args) -> int:
    ds = datamodel.center(_load_dataset(args))
    gamma = _parse_gamma(args.gamma)
    lam = float(args.lam)
    scales = None
    if args.standardize:
        scales = ds.X.std(axis=0)
        if (scales == 0.0).any():
            raise InvalidConfig("cannot standardize a constant predictor column")
        ds = datamodel.AnchorDataset(
            X=ds.X / scales,
            Y=ds.Y,
            A=ds.A,
            anchor_levels=ds.anchor_levels,
            predictor_names=ds.predictor_names,
        )
        ds = datamodel.center(ds)
    if lam > 0:
        fit = sparse.fit_anchor_lasso(ds, gamma, lam)
    else:
        fit = estimators.fit_anchor(ds, gamma)
    coef = fit.coef / scales if scales is not None else fit.coef
    out = _outdir(args)
    _write_table(
        os.path.join(out, "coefficients.csv"),
        ["coordinate", "estimate"],
        _coef_rows(fit.predictor_names, coef),
    )
    _write_json(
        os.path.join(out, "fit.json"),
        {
            "gamma": "inf" if fit.gamma == math.inf else fit.gamma,
            "lambda": fit.lam,
            "objective": fit.objective,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "standardized": bool(args.standardize),
            "n": ds.n,
            "d": ds.d,
        },
    )
    return EXIT_OK


def cmd_path(args) -> int:
    if args.grid is None:
        raise InvalidConfig("--grid with gamma values is required for path")
    gammas = _parse_float_list(args.grid, "gamma")
    lam = float(args.lam)
    shift = None
    if args.shift is not None:
        shift = np.array(_parse_float_list(args.shift, "shift"))
    model = scm_mod.load_scm(args.scm) if args.scm is not None else None
    out = _outdir(args)

    rows = []
    if args.data is not None:
        ds = datamodel.center(_load_dataset(args))
        names = ds.predictor_names
        coefs = []
        for gamma in gammas:
            if lam > 0:
                coefs.append(sparse.fit_anchor_lasso(ds, gamma, lam).coef)
            else:
                coefs.append(estimators.fit_anchor(ds, gamma).coef)
    elif model is not None:
        names = tuple(f"x{j + 1}" for j in range(model.d))
        coefs = [scm_mod.population_anchor(model, gamma) for gamma in gammas]
    else:
        raise InvalidConfig("path needs --data and/or --scm")

    header = ["gamma", *names]
    if model is not None:
        header += ["shift_risk", "worst_case_risk"]
        if shift is not None and shift.shape[0] != model.p:
            raise InvalidConfig(
                f"--shift must have {model.p} components, got {shift.shape[0]}"
            )
    for gamma, coef in zip(gammas, coefs):
        row = ["inf" if gamma == math.inf else gamma, *coef]
        if model is not None:
            risk_shift = scm_mod.Shift(vector=shift) if shift is not None else None
            row.append(scm_mod.shift_risk(model, coef, risk_shift))
            row.append(
                scm_mod.worst_case_risk(model, coef, gamma)
                if gamma != math.inf
                else math.inf
            )
        rows.append(row)

    if args.format == "json":
        payload = [
            {key: ("inf" if isinstance(v, float) and v == math.inf else v)
             for key, v in zip(header, row)}
            for row in rows
        ]
        _write_json(os.path.join(out, "path.json"), payload)
    else:
        _write_table(os.path.join(out, "path.csv"), header, rows)
    return EXIT_OK


def cmd_cv(args) -> int:
    ds = _load_dataset(args)
    if args.grid is None:
        raise InvalidConfig("--grid with gamma values is required for cv")
    gammas = _parse_float_list(args.grid, "gamma")
    if any(g == math.inf for g in gammas):
        raise InvalidConfig("cv grid must be finite")
    alphas = _parse_float_list(args.alpha, "alpha")
    lam = float(args.lam) if args.lam is not None else None
    result = modelsel.cv_gamma(
        ds,
        alphas=alphas,
        gamma_grid=gammas,
        folds=args.folds,
        lam=lam if lam else None,
        seed=args.seed,
    )
    out = _outdir(args)
    if args.format == "json":
        _write_json(
            os.path.join(out, "cv.json"),
            {
                "gamma_grid": list(result.gamma_grid),
                "alphas": list(result.alphas),
                "curves": result.curves,
                "selected": {_fmt(a): g for a, g in result.selected.items()},
            },
        )
    else:
        header = ["gamma"] + [f"q{_fmt(a)}" for a in result.alphas]
        rows = [
            [g, *result.curves[:, j]] for j, g in enumerate(result.gamma_grid)
        ]
        _write_table(os.path.join(out, "cv.csv"), header, rows)
        _write_table(
            os.path.join(out, "cv_selected.csv"),
            ["alpha", "gamma"],
            [[a, g] for a, g in result.selected.items()],
        )
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.scm is None:
        raise InvalidConfig("--scm is required for simulate")
    if args.n is None or args.n < 1:
        raise InvalidConfig("--n must be a positive integer")
    model = scm_mod.load_scm(args.scm)
    rng = numkern.make_rng(args.seed)
    shift = None
    if args.shift is not None:
        vec = np.array(_parse_float_list(args.shift, "shift"))
        if vec.shape[0] != model.p:
            raise InvalidConfig(
                f"--shift must have {model.p} components, got {vec.shape[0]}"
            )
        shift = scm_mod.Shift(vector=vec)
    ds = scm_mod.sample(model, args.n, rng, shift=shift)
    out = _outdir(args)
    labels = None
    if ds.anchor_levels is not None:
        labels = np.empty(ds.n, dtype=object)
        for label, idx in ds.anchor_levels.items():
            labels[np.asarray(idx)] = str(label)
    datamodel.write_csv(os.path.join(out, "data.csv"), ds, anchor_labels=labels)
    anchors = (
        [{"name": "env", "kind": "categorical"}]
        if labels is not None
        else [{"name": f"a{j + 1}", "kind": "continuous"} for j in range(ds.q)]
    )
    _write_json(
        os.path.join(out, "config.json"),
        {"response": "y", "anchors": anchors},
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.scm is not None:
        report = batteries.run_scm_checks(scm_mod.load_scm(args.scm), seed=args.seed)
    elif args.battery == "default":
        report = batteries.run_battery(seed=args.seed)
    else:
        raise InvalidConfig(f"unknown battery {args.battery!r}")
    out = _outdir(args)
    _write_json(os.path.join(out, "verify.json"), report)
    for check in report["checks"]:
        status = "pass" if check["passed"] else "FAIL"
        print(f"{status}: {check['name']}")
    if not report["passed"]:
        print("verification failed", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_rank(args) -> int:
    ds = _load_dataset(args)
    lam = float(args.lam)
    if args.grid is not None:
        endpoints = _parse_float_list(args.grid, "gamma")
        gamma_range = (min(endpoints), max(endpoints))
    else:
        gamma_range = (0.0, 1.0)
    table = modelsel.replicability_rank(ds, lam=lam, gamma_range=gamma_range)
    out = _outdir(args)
    rows = [
        [name, a, l]
        for name, a, l in zip(table.predictor_names, table.a_scores, table.l_scores)
    ]
    if args.format == "json":
        _write_json(
            os.path.join(out, "ranking.json"),
            [
                {"coordinate": name, "a_score": a, "l_score": l}
                for name, a, l in rows
            ],
        )
    else:
        _write_table(
            os.path.join(out, "ranking.csv"),
            ["coordinate", "a_score", "l_score"],
            rows,
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anchorlab",
        description="Anchor regression: fitting, diagnostics and model oracles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_required=False):
        p.add_argument("--data", default=None, help="CSV dataset path")
        p.add_argument("--config", default=None, help="column-role JSON path")
        p.add_argument("--scm", default=None, help="structural model JSON path")
        p.add_argument("--seed", type=int, default=0, required=seed_required)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p_fit = sub.add_parser("fit", help="fit at a single (gamma, lambda)")
    common(p_fit)
    p_fit.add_argument("--gamma", default="1")
    p_fit.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p_fit.add_argument("--standardize", action="store_true")
    p_fit.set_defaults(func=cmd_fit)

    p_path = sub.add_parser("path", help="coefficients along a gamma grid")
    common(p_path)
    p_path.add_argument("--grid", default=None, help="comma-separated gammas")
    p_path.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p_path.add_argument("--shift", default=None, help="comma-separated shift vector")
    p_path.set_defaults(func=cmd_path)

    p_cv = sub.add_parser("cv", help="pick gamma by grouped cross-validation")
    common(p_cv, seed_required=True)
    p_cv.add_argument("--grid", default=None, help="comma-separated gammas")
    p_cv.add_argument("--alpha", default="0.9", help="comma-separated quantile levels")
    p_cv.add_argument("--folds", type=int, default=5)
    p_cv.add_argument("--lambda", dest="lam", type=float, default=None)
    p_cv.set_defaults(func=cmd_cv)

    p_sim = sub.add_parser("simulate", help="draw a dataset from a model")
    common(p_sim, seed_required=True)
    p_sim.add_argument("--n", type=int, default=None)
    p_sim.add_argument("--shift", default=None, help="comma-separated shift vector")
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="run the certification battery")
    common(p_ver, seed_required=True)
    p_ver.add_argument("--battery", default="default")
    p_ver.set_defaults(func=cmd_verify)

    p_rank = sub.add_parser("rank", help="stability vs. lasso coefficient ranking")
    common(p_rank)
    p_rank.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p_rank.add_argument("--grid", default=None, help="gamma range endpoints")
    p_rank.set_defaults(func=cmd_rank)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        max_threads()
        return args.func(args)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AnchorlabError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
