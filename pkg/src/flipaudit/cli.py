"""Command-line surface for reproducible audit runs.

Every command resolves its full configuration, writes its artifacts under
``--out``, and drops a ``run.json`` with the resolved configuration and
sha256 digests of everything written, so any run can be replayed exactly.
All randomness flows from ``--seed`` through named substreams.

Exit codes: 2 configuration error, 3 data error, 4 numeric failure.
"""

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    CostFunction,
    GroupedDataset,
    Normalizer,
    normalize_dataset,
    read_grouped_csv_indexed,
    write_grouped_csv,
)
from .errors import AuditError, DataError, NumericError
from .exact import ExactMap, solve_exact, subsample
from .flips import (
    audit_exact_from_labels,
    demographic_parity_audit,
    equalized_odds_audit,
    label_stratum,
    marginal_histograms,
)
from .gan import TrainConfig, load_generator, save_generator, train
from .rng import derive_seed
from .synth import (
    ArrestsModel,
    LinearThresholdModel,
    PredictionsFileModel,
    gen_control_normal,
    gen_gaussian,
    gen_geometric_arrests,
    gen_two_feature_hiring,
    ssl_style_models,
)
from .validation import ControlConfig, control_experiment, stability_harness, validate_gan

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

COSTS = {c.value: c for c in CostFunction}


class ConfigError(Exception):
    """Bad command-line configuration (exit code 2)."""


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _run_payload(command: str, args, artifacts) -> str:
    run = {
        "command": command,
        "version": __version__,
        "config": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "artifacts": {p.name: _digest(p) for p in artifacts},
    }
    return json.dumps(run, indent=2, sort_keys=True) + "\n"


def _write_run_json(out_dir: Path, command: str, args, artifacts) -> Path:
    path = out_dir / "run.json"
    path.write_text(_run_payload(command, args, artifacts))
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_raw(args):
    return read_grouped_csv_indexed(args.input, source_group=args.source_group)


def _normalized_space(data: GroupedDataset, no_normalize: bool):
    if no_normalize:
        return data, None
    normalized, norm = normalize_dataset(data)
    return normalized, norm


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    seed = derive_seed(args.seed, "synth", args.kind)
    if args.kind == "hiring":
        data = gen_two_feature_hiring(args.n, seed)
        groups = ("women", "men")
    elif args.kind == "geometric":
        data = gen_geometric_arrests(args.n, seed)
        groups = ("a", "b")
    elif args.kind == "control":
        data = gen_control_normal(args.n, seed)
        groups = ("a", "b")
    else:  # gaussian
        if args.mu_a is None or args.mu_b is None:
            raise ConfigError("--kind gaussian requires --mu-a and --mu-b")
        mu_a = [float(v) for v in args.mu_a.split(",")]
        mu_b = [float(v) for v in args.mu_b.split(",")]
        cov = None
        if args.cov is not None:
            diag = [float(v) for v in args.cov.split(",")]
            if len(diag) == 1:
                diag = diag * len(mu_a)
            cov = np.diag(diag)
        data = gen_gaussian(args.n, seed, mu_a, mu_b, cov)
        groups = ("a", "b")
    write_grouped_csv(out, data, groups)
    Path(str(out) + ".run.json").write_text(_run_payload("synth", args, [out]))
    print(f"wrote {out} ({data.group_a.n_rows}+{data.group_b.n_rows} rows)")
    return 0


# ---------------------------------------------------------------------------
# map
# ---------------------------------------------------------------------------


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        cost_weight=getattr(args, "lambda"),
        batch_size=args.batch,
        generator_steps=args.steps,
        critic_steps_per_gen=args.critic_steps,
        learning_rate=args.lr,
        clip=args.clip,
        seed=derive_seed(args.seed, "train"),
    )


def cmd_map(args) -> int:
    out = _out_dir(args)
    raw, _, _ = _load_raw(args)
    data, norm = _normalized_space(raw, args.no_normalize)
    cost = COSTS[args.cost]
    artifacts = []
    if args.method == "exact":
        if args.label_stratum is not None:
            raise ConfigError("--label-stratum applies to --method gan only")
        if args.subsample is not None:
            data = GroupedDataset(
                subsample(data.group_a, args.subsample, derive_seed(args.seed, "subsample-a")),
                subsample(data.group_b, args.subsample, derive_seed(args.seed, "subsample-b")),
            )
        mapping = solve_exact(data, cost)
        path = out / "assignment.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["source_index", "target_index"])
            writer.writerows((i, int(j)) for i, j in enumerate(mapping.assignment))
        artifacts.append(path)
        summary = out / "summary.json"
        summary.write_text(
            json.dumps(
                {
                    "n": mapping.n,
                    "total_cost": mapping.total_cost,
                    "mean_cost": mapping.mean_cost,
                    "cost": args.cost,
                    "subsample": args.subsample,
                    "normalizer": None if norm is None else norm.to_dict(),
                },
                indent=2,
            )
            + "\n"
        )
        artifacts.append(summary)
        print(f"exact map: n={mapping.n} mean_cost={mapping.mean_cost:.6g}")
    else:
        cfg = _train_config(args)
        train_data = data if args.label_stratum is None else label_stratum(data, args.label_stratum)
        gen = train(train_data, cfg, cost)
        path = out / "generator.json"
        save_generator(path, gen, cfg, norm)
        artifacts.append(path)
        print(f"trained generator -> {path}")
    _write_run_json(out, "map", args, artifacts)
    return 0


# ---------------------------------------------------------------------------
# flipset / audit
# ---------------------------------------------------------------------------


def _load_transport(path_str: str):
    """Load a map artifact; returns (transport, normalizer | None).

    Generator artifacts are generator.json files; exact artifacts are
    assignment.csv files with their summary.json sibling.
    """
    path = Path(path_str)
    if path.suffix == ".json":
        gen, _, norm = load_generator(path)
        return gen, norm
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["source_index", "target_index"]:
            raise DataError(f"{path}: expected header 'source_index,target_index'")
        pairs = [(int(r[0]), int(r[1])) for r in reader if r]
    if not pairs:
        raise DataError(f"{path}: empty assignment")
    assignment = np.full(len(pairs), -1, dtype=int)
    for i, j in pairs:
        if not 0 <= i < len(pairs):
            raise DataError(f"{path}: source index {i} out of range")
        assignment[i] = j
    norm = None
    summary = path.with_name("summary.json")
    if summary.exists():
        stored = json.loads(summary.read_text()).get("normalizer")
        if stored is not None:
            norm = Normalizer.from_dict(stored)
    # stored costs are not needed for auditing
    return ExactMap(assignment, 0.0, 0.0), norm


def _build_classifier(args, space: GroupedDataset, seed: int):
    name = args.classifier
    if name == "linear":
        if args.weights is None or args.threshold is None:
            raise ConfigError("--classifier linear requires --weights and --threshold")
        weights = np.array([float(w) for w in args.weights.split(",")])
        if len(weights) != space.n_features:
            raise ConfigError(
                f"--weights has {len(weights)} entries, data has {space.n_features} features"
            )
        return LinearThresholdModel(weights, args.threshold)
    if name == "arrests":
        return ArrestsModel(seed=derive_seed(seed, "classifier"))
    if name in ("age_narc", "multi_feature"):
        return ssl_style_models(calibration=space.group_a)[name]
    raise ConfigError(f"unknown classifier {name!r}")


def _report_to_dict(report) -> dict:
    if report is None:
        return {"empty": True}
    return {
        "mean_diff": {n: float(v) for n, v in zip(report.feature_names, report.mean_diff)},
        "mean_sign": {n: float(v) for n, v in zip(report.feature_names, report.mean_sign)},
        "ranking_by_diff": list(report.ranking_by_diff),
        "ranking_by_sign": list(report.ranking_by_sign),
    }


def _write_flip_artifacts(out_dir, tag, bundle, source) -> list:
    flipset = bundle.flipset
    parity = bundle.parity
    payload = {
        "n_source": flipset.n_source,
        "flip_pos": parity.flip_pos,
        "flip_neg": parity.flip_neg,
        "net": parity.net,
        "positives_a": parity.positives_a,
        "positives_b": parity.positives_b,
        "per_side": {
            "positive": _report_to_dict(bundle.report_pos),
            "negative": _report_to_dict(bundle.report_neg),
        },
    }
    json_path = out_dir / f"flipset{tag}.json"
    json_path.write_text(json.dumps(payload, indent=2) + "\n")
    csv_path = out_dir / f"flipped_rows{tag}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_index", "side", *source.feature_names])
        for side, idx in (("positive", flipset.positive), ("negative", flipset.negative)):
            for i in idx:
                row = flipset.counterpart_rows.values[i]
                writer.writerow([int(i), side, *[repr(float(v)) for v in row]])
    return [json_path, csv_path]


def cmd_flipset(args) -> int:
    out = _out_dir(args)
    raw, rows_a, rows_b = _load_raw(args)
    exclude = tuple(args.exclude_feature or ())
    artifacts = []

    if args.classifier == "predictions":
        if args.predictions is None:
            raise ConfigError("--classifier predictions requires --predictions FILE")
        if args.map is None or args.mode != "demographic_parity":
            raise ConfigError("predictions classifiers support demographic-parity exact maps only")
        transport, norm = _load_transport(args.map)
        if not isinstance(transport, ExactMap):
            raise ConfigError("predictions classifiers require an exact assignment artifact")
        space = raw if norm is None else GroupedDataset(
            norm.transform(raw.group_a), norm.transform(raw.group_b), raw.labels_a, raw.labels_b
        )
        preds = PredictionsFileModel.from_csv(args.predictions)
        bundle = audit_exact_from_labels(
            space, transport, preds.lookup(rows_a), preds.lookup(rows_b), exclude
        )
        artifacts += _write_flip_artifacts(out, "", bundle, space.group_a)
        print(
            f"flip_pos={bundle.parity.flip_pos} flip_neg={bundle.parity.flip_neg} "
            f"net={bundle.parity.net}"
        )
        _write_run_json(out, "flipset", args, artifacts)
        return 0

    if args.mode == "demographic_parity":
        if args.map is None:
            raise ConfigError("demographic-parity mode requires --map")
        transport, norm = _load_transport(args.map)
        space = raw if norm is None else GroupedDataset(
            norm.transform(raw.group_a), norm.transform(raw.group_b), raw.labels_a, raw.labels_b
        )
        h = _build_classifier(args, space, args.seed)
        bundle = demographic_parity_audit(space, h, transport, exclude)
        artifacts += _write_flip_artifacts(out, "", bundle, space.group_a)
        print(
            f"flip_pos={bundle.parity.flip_pos} flip_neg={bundle.parity.flip_neg} "
            f"net={bundle.parity.net}"
        )
    else:
        if args.map_pos is None or args.map_neg is None:
            raise ConfigError("equalized-odds mode requires --map-pos and --map-neg")
        map_pos, norm = _load_transport(args.map_pos)
        map_neg, _ = _load_transport(args.map_neg)
        space = raw if norm is None else GroupedDataset(
            norm.transform(raw.group_a), norm.transform(raw.group_b), raw.labels_a, raw.labels_b
        )
        h = _build_classifier(args, space, args.seed)
        bundles = equalized_odds_audit(space, h, map_pos, map_neg, exclude)
        for label in (1, 0):
            bundle = bundles[label]
            stratum = label_stratum(space, label)
            artifacts += _write_flip_artifacts(out, f"_y{label}", bundle, stratum.group_a)
            print(
                f"y={label}: flip_pos={bundle.parity.flip_pos} "
                f"flip_neg={bundle.parity.flip_neg} net={bundle.parity.net}"
            )
    _write_run_json(out, "flipset", args, artifacts)
    return 0


# ---------------------------------------------------------------------------
# report / validate / stability / control
# ---------------------------------------------------------------------------


def cmd_report(args) -> int:
    out = _out_dir(args)
    raw, _, _ = _load_raw(args)
    space, _ = _normalized_space(raw, args.no_normalize)
    with open(args.flipped, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["source_index", "side"]:
            raise DataError(f"{args.flipped}: expected the flipped_rows.csv schema")
        indices = [int(r[0]) for r in reader if r and r[1] == args.side]
    records = marginal_histograms(space.group_a, indices, bins=args.bins)
    path = out / "histogram.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=["feature", "bin_left", "bin_right", "count_population", "count_flipset"],
        )
        writer.writeheader()
        writer.writerows(records)
    _write_run_json(out, "report", args, [path])
    print(f"wrote {path} ({len(records)} rows)")
    return 0


def cmd_validate(args) -> int:
    out = _out_dir(args)
    raw, _, _ = _load_raw(args)
    data, _ = _normalized_space(raw, args.no_normalize)
    cfg = _train_config(args)
    report = validate_gan(data, cfg, COSTS[args.cost], trials=args.trials, subset=args.subset)
    table = out / "validation.csv"
    with open(table, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "ks_mean", "ks_std", "msediff_mean", "msediff_std"])
        for j, name in enumerate(report.feature_names):
            writer.writerow(
                [
                    name,
                    repr(float(report.ks_mean[j])),
                    repr(float(report.ks_std[j])),
                    repr(float(report.mse_mean[j])),
                    repr(float(report.mse_std[j])),
                ]
            )
    dists = out / "distances.csv"
    with open(dists, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dist_exact", "dist_gan"])
        writer.writerow([repr(float(report.dist_exact)), repr(float(report.dist_gan))])
    _write_run_json(out, "validate", args, [table, dists])
    print(f"wrote {table} and {dists}")
    return 0


def cmd_stability(args) -> int:
    out = _out_dir(args)
    dims = [int(v) for v in args.dims.split(",")]
    cfg = _train_config(args)
    path = out / "stability.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dim", "feature_index", "variance_exact", "variance_gan"])
        for d in dims:
            probe = np.ones(d) if args.probe == "ones" else np.zeros(d)
            results = {
                method: stability_harness(
                    d,
                    probe,
                    method,
                    cfg,
                    n=args.n,
                    draws=args.draws,
                    c=COSTS[args.cost],
                    seed=args.seed,
                )
                for method in ("exact", "gan")
            }
            for j in range(d):
                writer.writerow(
                    [
                        d,
                        j,
                        repr(float(results["exact"].variance[j])),
                        repr(float(results["gan"].variance[j])),
                    ]
                )
            print(
                f"d={d}: mean variance exact={results['exact'].variance.mean():.4g} "
                f"gan={results['gan'].variance.mean():.4g}"
            )
    _write_run_json(out, "stability", args, [path])
    return 0


def cmd_control(args) -> int:
    out = _out_dir(args)
    res = control_experiment(
        ControlConfig(
            n_per_group=args.n, anchors=args.anchors, seed=args.seed, train=_train_config(args)
        )
    )
    payload = {
        "flip_pos": res.flip_pos,
        "flip_neg": res.flip_neg,
        "classified_pos": res.classified_pos,
        "classified_neg": res.classified_neg,
        "pos_rate": res.pos_rate,
        "neg_rate": res.neg_rate,
        "mean_abs_displacement": res.mean_abs_displacement.tolist(),
    }
    path = out / "control.json"
    path.write_text(json.dumps(payload, indent=2) + "\n")
    _write_run_json(out, "control", args, [path])
    print(
        f"flip_pos={res.flip_pos}/{res.classified_pos} ({res.pos_rate:.2%}) "
        f"flip_neg={res.flip_neg}/{res.classified_neg} ({res.neg_rate:.2%})"
    )
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=0, help="root seed for all substreams")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--no-normalize", action="store_true", help="skip feature normalization")
    parser.add_argument("--cost", choices=sorted(COSTS), default="sql1", help="transport cost")


def _add_input(parser):
    parser.add_argument("--input", required=True, help="grouped CSV file")
    parser.add_argument("--source-group", default=None, help="group value to treat as source")


def _add_train(parser):
    parser.add_argument("--lambda", type=float, default=1e-4, help="transport-cost penalty weight")
    parser.add_argument("--batch", type=int, default=64, help="batch size")
    parser.add_argument("--steps", type=int, default=20000, help="generator update count")
    parser.add_argument(
        "--critic-steps", type=int, default=5, help="critic updates per generator update"
    )
    parser.add_argument("--lr", type=float, default=5e-5, help="RMSProp learning rate")
    parser.add_argument("--clip", type=float, default=0.01, help="critic weight clip")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flipaudit",
        description="Audit a binary classifier for group-dependent decisions via transport maps.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic grouped dataset")
    p.add_argument("--kind", required=True, choices=["hiring", "geometric", "control", "gaussian"])
    p.add_argument("--n", type=int, required=True, help="rows per group")
    p.add_argument("--mu-a", default=None, help="comma-separated group-a mean (gaussian)")
    p.add_argument("--mu-b", default=None, help="comma-separated group-b mean (gaussian)")
    p.add_argument("--cov", default=None, help="diagonal covariance entries (gaussian)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("map", help="fit a transport map and save the artifact")
    _add_common(p)
    _add_input(p)
    p.add_argument("--method", required=True, choices=["exact", "gan"])
    p.add_argument("--subsample", type=int, default=None, help="rows per group for the exact solver")
    p.add_argument(
        "--label-stratum",
        type=int,
        default=None,
        choices=[0, 1],
        help="train on one true-label stratum only (gan)",
    )
    _add_train(p)
    p.set_defaults(func=cmd_map)

    for name in ("flipset", "audit"):
        p = sub.add_parser(name, help="flipset and transparency report for a saved map")
        _add_common(p)
        _add_input(p)
        p.add_argument("--map", default=None, help="assignment.csv or generator.json")
        p.add_argument("--map-pos", default=None, help="map artifact for the y=1 stratum")
        p.add_argument("--map-neg", default=None, help="map artifact for the y=0 stratum")
        p.add_argument(
            "--mode",
            default="demographic_parity",
            choices=["demographic_parity", "equalized_odds"],
        )
        p.add_argument(
            "--exclude-feature",
            action="append",
            default=None,
            help="drop a feature from report rankings (repeatable)",
        )
        p.add_argument(
            "--classifier",
            required=True,
            choices=["linear", "arrests", "age_narc", "multi_feature", "predictions"],
        )
        p.add_argument("--weights", default=None, help="comma-separated weights (linear)")
        p.add_argument("--threshold", type=float, default=None, help="decision threshold (linear)")
        p.add_argument(
            "--predictions", default=None, help="CSV of row_index,prediction over the input file"
        )
        p.set_defaults(func=cmd_flipset)

    p = sub.add_parser("report", help="per-feature histograms of population vs flipset")
    _add_common(p)
    _add_input(p)
    p.add_argument("--histogram", action="store_true", help="emit binned marginals (the default)")
    p.add_argument("--flipped", required=True, help="flipped_rows.csv from the flipset command")
    p.add_argument("--side", default="positive", choices=["positive", "negative"])
    p.add_argument("--bins", type=int, default=20)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("validate", help="KS / MSE / distance battery for a trained map")
    _add_common(p)
    _add_input(p)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--subset", type=int, default=2000, help="subsample size for the exact distance")
    _add_train(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stability", help="probe-point variance of exact vs trained maps")
    _add_common(p)
    p.add_argument("--dims", default="2,4,8", help="comma-separated dimensions")
    p.add_argument("--n", type=int, default=500, help="points per group per draw")
    p.add_argument("--draws", type=int, default=100)
    p.add_argument("--probe", default="zeros", choices=["zeros", "ones"])
    _add_train(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("control", help="identical-distributions control experiment")
    _add_common(p)
    p.add_argument("--n", type=int, default=10000, help="points per group")
    p.add_argument("--anchors", type=int, default=2000, help="random-label anchor count")
    _add_train(p)
    p.set_defaults(func=cmd_control)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (AuditError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
