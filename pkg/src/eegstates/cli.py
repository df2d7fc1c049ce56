"""Command-line front end.

Subcommands: synth (write a synthetic dataset), extract (feature tables),
run (one paradigm evaluation), sweep (window x hop heatmaps + best-accuracy
table), audit (leakage check). Every command echoes its effective
configuration to run_config.json in the output directory, and identical
invocations rewrite identical bytes.

Exit codes: 0 success, 1 usage/input error, 2 leakage detected by audit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .data import DatasetManifest, generate_synthetic, load_record, write_dataset
from .errors import WorkbenchError
from .experiment import (
    DEFAULT_HOPS,
    DEFAULT_WINDOWS_S,
    SweepGrid,
    best_accuracy_table,
    emit_heatmap,
    run_paradigm,
    run_sweep,
    table_to_csv,
    write_summary,
)
from .features import FeatureSet, SpectrogramConfig, extract_features
from .models import ClassifierSpec, ModelKind
from .splits import (
    Paradigm,
    cap_40min,
    drop_habituation,
    split_common_subject,
    split_leave_one_out,
    split_subject_specific,
)
from .standardize import (
    Scheme,
    StandardizationRun,
    audit_leakage,
    load_params,
    save_params,
    standardize_split,
)

# Fixed default seed so fresh clones reproduce the documented outputs.
DEFAULT_SEED = 1729

OUT_ENV_VAR = "EEGSTATES_OUT"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_LEAKY = 2


class _UsageError(WorkbenchError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        raise _UsageError(message)


def _model_kind(name: str) -> ModelKind:
    try:
        return ModelKind(name)
    except ValueError:
        valid = ", ".join(k.value for k in ModelKind)
        raise _UsageError(f"unknown model {name!r}; valid kinds: {valid}")


def _parse_hyper(pairs: list[str] | None) -> dict:
    hp = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise _UsageError(f"--hyper expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        try:
            hp[key] = json.loads(raw)
        except json.JSONDecodeError:
            hp[key] = raw
    return hp


def _int_list(raw: str) -> list[int]:
    try:
        return [int(v) for v in raw.split(",") if v]
    except ValueError:
        raise _UsageError(f"expected a comma-separated integer list, got {raw!r}")


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV_VAR)
    if not out:
        raise _UsageError(f"--out is required (or set {OUT_ENV_VAR})")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(payload: dict, path: Path) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _echo_config(command: str, args: argparse.Namespace, out: Path, **extra) -> None:
    payload = {"command": command, "package_version": __version__}
    for key, value in sorted(vars(args).items()):
        if key == "func":
            continue
        payload[key] = str(value) if isinstance(value, Path) else value
    payload.update(extra)
    _write_json(payload, out / "run_config.json")


def _load_eligible_features(
    manifest_path: str, window: int, hop: int
) -> tuple[FeatureSet, list]:
    """Manifest -> habituation drop -> load -> 40-minute cap -> features."""
    manifest = drop_habituation(DatasetManifest.load(manifest_path))
    records = [cap_40min(r) for r in manifest.load_records()]
    config = SpectrogramConfig(window, hop)
    features = FeatureSet.concat([extract_features(r, config) for r in records])
    return features, records


def _build_splits(features, args) -> dict[str, object]:
    """Key -> split mapping for the requested paradigm (LOSO: one per fold)."""
    paradigm = Paradigm(args.paradigm)
    if paradigm is Paradigm.LEAVE_ONE_OUT:
        subjects = (
            [args.test_subject] if getattr(args, "test_subject", None) else features.subjects()
        )
        return {str(s): split_leave_one_out(features, s) for s in subjects}
    if paradigm is Paradigm.COMMON_SUBJECT:
        return {
            "all": split_common_subject(
                features,
                args.train_fraction,
                args.seed,
                with_validation=bool(args.with_validation),
            )
        }
    subjects = (
        [args.subject] if getattr(args, "subject", None) else features.subjects()
    )
    return {
        str(s): split_subject_specific(
            features,
            s,
            args.train_fraction,
            args.seed,
            with_validation=bool(args.with_validation),
        )
        for s in subjects
    }


def cmd_synth(args) -> int:
    out = _out_dir(args)
    records, manifest = generate_synthetic(
        args.subjects, args.records, args.duration, args.seed
    )
    write_dataset(records, manifest, out)
    _echo_config("synth", args, out)
    print(f"wrote {len(records)} records + manifest.json to {out}")
    return EXIT_OK


def cmd_extract(args) -> int:
    out = _out_dir(args)
    manifest = DatasetManifest.load(args.manifest)
    config = SpectrogramConfig(args.window, args.hop)
    written = []
    for entry in manifest.entries:
        record = load_record(
            manifest.resolve(entry), entry.subject_id, entry.record_index
        )
        features = extract_features(record, config)
        name = f"features_s{entry.subject_id:02d}_r{entry.record_index:02d}.csv"
        features.to_csv(out / name)
        written.append(name)
    _echo_config("extract", args, out, files=written)
    print(f"wrote {len(written)} feature tables to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    out = _out_dir(args)
    kind = _model_kind(args.model)
    scheme = Scheme(args.scheme)
    paradigm = Paradigm(args.paradigm)
    features, _ = _load_eligible_features(args.manifest, args.window, args.hop)
    spec = ClassifierSpec(kind, _parse_hyper(args.hyper), seed=args.seed)

    from .models import MLP_KINDS

    if args.with_validation is None:
        args.with_validation = kind in MLP_KINDS

    result = run_paradigm(
        features,
        paradigm,
        spec,
        scheme,
        seed=args.seed,
        train_fraction=args.train_fraction,
        with_validation=args.with_validation,
        subject=args.subject,
        test_subject=args.test_subject,
    )

    # Audit the standardization of every fold and save its parameters.
    std_dir = out / "standardizers"
    std_dir.mkdir(exist_ok=True)
    folds = {}
    leaky = False
    for key, split in _build_splits(features, args).items():
        std = standardize_split(features, split, scheme)
        report = audit_leakage(std.run)
        leaky = leaky or report.leaky
        folds[key] = report.to_dict()
        save_params(std.run.params, std_dir / f"fold_{key}.json")

    payload = {
        "command": "run",
        "paradigm": paradigm.value,
        "model": kind.value,
        "scheme": scheme.value,
        "seed": args.seed,
        "window_length_s": args.window,
        "hop_samples": args.hop,
        "leaky_baseline": scheme is Scheme.PER_RECORD,
        "audit": {"verdict": "LEAKY" if leaky else "CLEAN", "folds": folds},
        "mean_accuracy": result.mean_accuracy,
        "per_subject": {str(k): v for k, v in result.per_subject.items()},
    }
    if scheme is Scheme.PER_RECORD:
        payload["marker"] = (
            "LEAKY-BASELINE: per-record standardization reads held-out frames;"
            " results are for baseline comparison only"
        )
    _write_json(payload, out / "report.json")
    _echo_config("run", args, out)
    print(f"mean accuracy: {result.mean_accuracy:.4f}  (report: {out / 'report.json'})")
    if scheme is Scheme.PER_RECORD:
        print("note: LEAKY-BASELINE scheme; audit verdict "
              f"{payload['audit']['verdict']}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    out = _out_dir(args)
    kinds = [_model_kind(name) for name in args.models.split(",") if name]
    if not kinds:
        raise _UsageError("--models must name at least one model kind")
    windows = tuple(args.windows)
    hops = tuple(args.hops)
    manifest = drop_habituation(DatasetManifest.load(args.manifest))
    records = [cap_40min(r) for r in manifest.load_records()]

    from .models import DEFAULT_HYPERPARAMETERS

    hyper = _parse_hyper(args.hyper)
    known = {key for defaults in DEFAULT_HYPERPARAMETERS.values() for key in defaults}
    unknown = set(hyper) - known
    if unknown:
        raise _UsageError(f"unknown hyperparameters: {sorted(unknown)}")

    results = {}
    outputs = []
    for kind in kinds:
        # one --hyper set serves heterogeneous models: keep each kind's keys
        kind_hyper = {
            k: v for k, v in hyper.items() if k in DEFAULT_HYPERPARAMETERS[kind]
        }
        grid = SweepGrid(
            windows,
            hops,
            kind,
            Scheme(args.scheme),
            Paradigm(args.paradigm),
            kind_hyper,
        )
        sweep = run_sweep(records, grid, master_seed=args.seed, jobs=args.jobs)
        results[kind] = sweep
        heatmap = out / f"heatmap_{kind.value}.csv"
        summary = out / f"summary_{kind.value}.json"
        emit_heatmap(sweep, heatmap)
        write_summary(sweep, summary)
        outputs += [heatmap.name, summary.name]

    table_to_csv(best_accuracy_table(results), out / "best_accuracy_table.csv")
    outputs.append("best_accuracy_table.csv")
    _echo_config("sweep", args, out, files=outputs)
    print(f"wrote {len(outputs)} sweep outputs to {out}")
    return EXIT_OK


def cmd_audit(args) -> int:
    out = _out_dir(args)
    scheme = Scheme(args.scheme)
    features, _ = _load_eligible_features(args.manifest, args.window, args.hop)
    splits_by_key = _build_splits(features, args)

    supplied = load_params(args.standardizers) if args.standardizers else None
    if supplied is not None and len(splits_by_key) != 1:
        raise _UsageError(
            "--standardizers audits a single split; pass --test-subject"
            " (or a non-LOSO paradigm)"
        )

    folds = {}
    leaky = False
    for key, split in splits_by_key.items():
        if supplied is not None:
            run = StandardizationRun(features, split, scheme, supplied)
        else:
            run = standardize_split(features, split, scheme).run
        report = audit_leakage(run)
        leaky = leaky or report.leaky
        folds[key] = report.to_dict()

    verdict = "LEAKY" if leaky else "CLEAN"
    payload = {
        "command": "audit",
        "scheme": scheme.value,
        "paradigm": args.paradigm,
        "window_length_s": args.window,
        "hop_samples": args.hop,
        "seed": args.seed,
        "verdict": verdict,
        "folds": folds,
    }
    _write_json(payload, out / "leakage_report.json")
    _echo_config("audit", args, out)
    print(f"audit verdict: {verdict}")
    for key, fold in folds.items():
        for finding in fold["findings"]:
            print(f"  fold {key}: {finding}")
    return EXIT_LEAKY if leaky else EXIT_OK


def _add_common_eval_args(p: _Parser) -> None:
    p.add_argument("--manifest", required=True, help="dataset manifest JSON")
    p.add_argument("--window", type=int, required=True, help="window length, seconds (4-40)")
    p.add_argument("--hop", type=int, required=True, help="hop length, samples (8-396)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument(
        "--paradigm",
        choices=[p.value for p in Paradigm],
        default=Paradigm.LEAVE_ONE_OUT.value,
    )
    p.add_argument("--scheme", choices=[s.value for s in Scheme], required=True)
    p.add_argument("--test-subject", type=int, default=None,
                   help="restrict LOSO to one fold")
    p.add_argument("--subject", type=int, default=None,
                   help="subject for the subject-specific paradigm")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--with-validation", action="store_true", default=None,
                   help="carve a validation set in shuffled paradigms"
                        " (defaults to on for neural-network models)")


def build_parser() -> _Parser:
    parser = _Parser(prog="eegstates", description=__doc__)
    parser.add_argument("--version", action="version", version=f"eegstates {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[], help="generate a synthetic dataset")
    p.add_argument("--subjects", type=int, required=True)
    p.add_argument("--records", type=int, required=True, help="records per subject")
    p.add_argument("--duration", type=int, required=True, help="seconds per record (>= 60)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="write per-record feature tables")
    p.add_argument("--manifest", required=True)
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--hop", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("run", help="one paradigm evaluation, report JSON")
    _add_common_eval_args(p)
    p.add_argument("--model", required=True,
                   help="one of: " + ", ".join(k.value for k in ModelKind))
    p.add_argument("--hyper", action="append", default=None, metavar="KEY=VALUE",
                   help="hyperparameter override (repeatable)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="window x hop sweep; heatmaps + table")
    p.add_argument("--manifest", required=True)
    p.add_argument("--models", required=True,
                   help="comma-separated model kinds, e.g. rf,svm,xgb,dnn4,dnn6")
    p.add_argument("--windows", type=_int_list, default=list(DEFAULT_WINDOWS_S),
                   help="comma-separated window lengths in seconds")
    p.add_argument("--hops", type=_int_list, default=list(DEFAULT_HOPS),
                   help="comma-separated hop lengths in samples")
    p.add_argument("--scheme", choices=[s.value for s in Scheme], required=True)
    p.add_argument("--paradigm", choices=[p.value for p in Paradigm],
                   default=Paradigm.LEAVE_ONE_OUT.value)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
    p.add_argument("--hyper", action="append", default=None, metavar="KEY=VALUE",
                   help="hyperparameter override; each model keeps the keys"
                        " it understands")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("audit", help="leakage audit of a standardization run")
    _add_common_eval_args(p)
    p.add_argument("--standardizers", default=None,
                   help="audit saved standardizer parameters (JSON) instead of"
                        " refitting")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_audit)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except WorkbenchError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
