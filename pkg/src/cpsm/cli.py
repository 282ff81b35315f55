"""Command-line entry point: dataset generation, adaptation, benchmark sweeps.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bench
from .data import (
    LabeledDataset,
    UnlabeledDataset,
    read_dataset_csv,
    write_dataset_csv,
    write_labels_csv,
)
from .em import (
    EmConfig,
    fit_cpsm,
    fit_mlls,
    save_fit_json,
    SourceModels,
)
from .errors import NumericalError, ValidationError
from .softmax import FitConfig, fit_hard
from .synth import ShiftProtocolConfig, SynthConfig, generate_pair, induce_conditional_shift

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: top-level JSON value must be an object")
    return doc


def _synth_config_from(doc: dict) -> SynthConfig:
    try:
        return SynthConfig(
            dataset_kind=doc["dataset_kind"],
            n_source=int(doc["n_source"]),
            n_target=int(doc["n_target"]),
            d_z=int(doc.get("d_z", 5)),
            d_x=int(doc.get("d_x", 10)),
            source_cond_prob=float(doc.get("source_cond_prob", 0.05)),
            shift_slope=float(doc.get("shift_slope", 0.0)),
            target_prior=float(doc.get("target_prior", 0.05)),
            seed=int(doc.get("seed", 0)),
        )
    except KeyError as exc:
        raise ValidationError(f"generation config missing field: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"generation config malformed: {exc}") from None


def cmd_generate(args) -> int:
    doc = _load_json(args.config)
    out_dir = args.output_dir or doc.get("output_dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    kind = doc.get("kind", "synthetic")
    if kind == "synthetic":
        source, target = generate_pair(_synth_config_from(doc))
    elif kind == "resample":
        try:
            z, x, y = read_dataset_csv(doc["input_csv"])
            if y is None:
                raise ValidationError(f"{doc['input_csv']}: resample input must be labeled")
            base = LabeledDataset(z=z, x=x, y=y)
            proto = ShiftProtocolConfig(
                base_rate=float(doc["base_rate"]),
                shift_delta=float(doc["shift_delta"]),
                n_source=int(doc["n_source"]),
                n_target=int(doc["n_target"]),
                conditioning_column=int(doc.get("conditioning_column", 0)),
                seed=int(doc.get("seed", 0)),
            )
        except KeyError as exc:
            raise ValidationError(f"generation config missing field: {exc}") from None
        source, target = induce_conditional_shift(base, proto)
    else:
        raise ValidationError(f"unknown generation kind {kind!r}")

    source_path = os.path.join(out_dir, "source.csv")
    target_path = os.path.join(out_dir, "target.csv")
    labels_path = os.path.join(out_dir, "target_labels.csv")
    write_dataset_csv(source_path, source.z, source.x, source.y)
    write_dataset_csv(target_path, target.z, target.x, None)
    write_labels_csv(labels_path, target.y)
    print(f"wrote {source_path}: {source.n_rows} rows, class-1 rate {np.mean(source.y == 1):.4f}")
    print(f"wrote {target_path}: {target.n_rows} rows (labels withheld)")
    print(f"wrote {labels_path}: evaluation-only labels, class-1 rate {np.mean(target.y == 1):.4f}")
    return EXIT_OK


def cmd_adapt(args) -> int:
    z_s, x_s, y_s = read_dataset_csv(args.source)
    if y_s is None:
        raise ValidationError(f"{args.source}: source must be labeled")
    source_data = LabeledDataset(z=z_s, x=x_s, y=y_s)
    z_t, x_t, y_t = read_dataset_csv(args.target)
    if y_t is not None:
        raise ValidationError(f"{args.target}: target must have empty y cells")
    if z_t.shape[1] != source_data.d_z or x_t.shape[1] != source_data.d_x:
        raise ValidationError(
            f"schema mismatch: source has z1..z{source_data.d_z},x1..x{source_data.d_x}, "
            f"target has z1..z{z_t.shape[1]},x1..x{x_t.shape[1]}"
        )
    target = UnlabeledDataset(z=z_t, x=x_t)

    fit_config = FitConfig(seed=args.seed)
    em_config = EmConfig(
        max_em_iters=args.max_em_iters if args.method != "naive" else 0,
        em_tolerance=args.em_tolerance,
    )
    posterior_model = fit_hard(source_data, fit_config, feature_block="zx")
    if args.method == "mlls":
        counts = np.bincount(source_data.y, minlength=source_data.n_classes + 1)[1:]
        fit = fit_mlls(posterior_model, counts / counts.sum(), target, em_config)
    else:
        models = SourceModels(
            posterior_model=posterior_model,
            conditional_model=fit_hard(source_data, fit_config, feature_block="z"),
        )
        fit = fit_cpsm(models, target, em_config)

    json_path = f"{args.output}.fit.json"
    posterior_path = f"{args.output}.posterior.csv"
    save_fit_json(json_path, fit)
    _write_posterior_csv(posterior_path, fit.target_posterior)
    print(f"method={args.method} iterations={fit.iterations_run} "
          f"estimated_prior={fit.estimated_prior.round(6).tolist()}")
    print(f"wrote {json_path} and {posterior_path}")
    return EXIT_OK


def _write_posterior_csv(path, posterior: np.ndarray) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"p{j}" for j in range(1, posterior.shape[1] + 1)])
        for row in posterior:
            writer.writerow([repr(float(v)) for v in row])


def cmd_benchmark(args) -> int:
    config = bench.experiment_config_from_dict(_load_json(args.config))
    rows = bench.run_benchmark(config)
    n_failed = sum(1 for r in rows if not np.isfinite(r.balanced_accuracy))
    print(f"wrote {config.output_path}: {len(rows)} rows ({n_failed} failed)")
    if config.aggregate_path:
        print(f"wrote {config.aggregate_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpsm",
        description="Shift-aware posterior adaptation: generate data, adapt classifiers, run benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write source.csv/target.csv/target_labels.csv from a JSON config")
    gen.add_argument("config", help="JSON generation config")
    gen.add_argument("--output-dir", default=None, help="override the config's output_dir")
    gen.set_defaults(func=cmd_generate)

    adapt = sub.add_parser("adapt", help="fit source models and adapt posteriors to a target CSV")
    adapt.add_argument("source", help="labeled source CSV")
    adapt.add_argument("target", help="unlabeled target CSV (empty y cells)")
    adapt.add_argument("--method", choices=["naive", "mlls", "cpsm"], default="cpsm")
    adapt.add_argument("--seed", type=int, default=0)
    adapt.add_argument("--max-em-iters", type=int, default=EmConfig().max_em_iters)
    adapt.add_argument("--em-tolerance", type=float, default=EmConfig().em_tolerance)
    adapt.add_argument("--output", default="adapt", help="output prefix for .fit.json/.posterior.csv")
    adapt.set_defaults(func=cmd_adapt)

    benchp = sub.add_parser("benchmark", help="run a grid benchmark from a JSON config")
    benchp.add_argument("config", help="JSON benchmark config")
    benchp.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"cpsm: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"cpsm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"cpsm: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
