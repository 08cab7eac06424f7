"""Batch command-line pipeline from segmentation volumes to diagnosis.

Subcommands: validate, features, segscore, ssl-eval, agreement, train,
predict, report. Every command is deterministic given (inputs, config,
seed): outputs carry no timestamps, parallel work is merged in case-id
order, and the effective configuration is echoed into each run report.

Exit codes: 0 success (warnings allowed), 1 usage or configuration error,
2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import traceback
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import agreement as agree
from .config import PipelineConfig, load_config
from .errors import CardiaqError, ConfigError, InvalidArgumentError
from .features import FeatureTable, extract_all, feature_schema, split_table
from .ingest import list_case_dirs, load_case, read_probability_map
from .learn import evaluate, load_model, predict_dual, save_model, tune_dual
from .losses import DecoderOutputs, SharpenConfig, pairwise_consistency
from .segmetrics import score_case
from .volume import FOREGROUND_CLASSES, DiseaseClass

# dataset-typical acquisition ranges; spacings outside them are flagged as
# warnings by `validate`, never rejected
IN_PLANE_RANGE_MM = (1.37, 1.68)
SLICE_RANGE_MM = (5.0, 10.0)


def _fmt(x) -> str:
    """CSV cell: full-precision float repr, empty for missing."""
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


class _Run:
    """Collects outputs and warnings of one command, writes its report."""

    def __init__(self, command: str, config: PipelineConfig, inputs: dict):
        self.command = command
        self.config = config
        self.inputs = inputs
        self.outdir = Path(config.output)
        self.outputs: list[str] = []
        self._catcher = warnings.catch_warnings(record=True)

    def __enter__(self):
        self._records = self._catcher.__enter__()
        warnings.simplefilter("always")
        return self

    def __exit__(self, *exc):
        return self._catcher.__exit__(*exc)

    @property
    def warning_messages(self) -> list[str]:
        return sorted({str(w.message) for w in self._records})

    def write_text(self, name: str, text: str) -> Path:
        self.outdir.mkdir(parents=True, exist_ok=True)
        path = self.outdir / name
        path.write_text(text, encoding="utf-8")
        self.outputs.append(name)
        return path

    def write_bytes(self, name: str, data: bytes) -> Path:
        self.outdir.mkdir(parents=True, exist_ok=True)
        path = self.outdir / name
        path.write_bytes(data)
        self.outputs.append(name)
        return path

    def write_report(self, body: dict) -> Path:
        report = {
            "command": self.command,
            "inputs": self.inputs,
            **body,
            "warnings": self.warning_messages,
            "outputs": sorted(self.outputs),
            "config": self.config.as_dict(),
        }
        return self.write_text(f"{self.command}_report.json", json.dumps(report, indent=2) + "\n")


def _load_cases(root, config: PipelineConfig):
    dirs = list_case_dirs(root)
    if not dirs:
        raise InvalidArgumentError(f"no case directories (with Info.cfg) under {root}")
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(load_case, dirs))  # map preserves the sorted order


def _spacing_warnings(spacing) -> list[str]:
    notes = []
    for axis, value in (("dx", spacing.dx), ("dy", spacing.dy)):
        if not IN_PLANE_RANGE_MM[0] <= value <= IN_PLANE_RANGE_MM[1]:
            notes.append(
                f"in-plane spacing {axis}={value:g} mm outside "
                f"{IN_PLANE_RANGE_MM[0]}-{IN_PLANE_RANGE_MM[1]} mm"
            )
    if not SLICE_RANGE_MM[0] <= spacing.dz <= SLICE_RANGE_MM[1]:
        notes.append(
            f"slice spacing dz={spacing.dz:g} mm outside "
            f"{SLICE_RANGE_MM[0]:g}-{SLICE_RANGE_MM[1]:g} mm"
        )
    return notes


def cmd_validate(args, config: PipelineConfig) -> int:
    with _Run("validate", config, {"data_root": str(args.data_root)}) as run:
        entries = []
        n_ok = 0
        for case_dir in list_case_dirs(args.data_root):
            entry: dict = {"case_id": case_dir.name}
            try:
                case = load_case(case_dir)
            except (CardiaqError, FileNotFoundError, OSError) as exc:
                entry["status"] = "error"
                entry["error"] = str(exc)
            else:
                sp = case.ed_volume.spacing
                entry["status"] = "ok"
                entry["dims"] = list(case.ed_volume.dims)
                entry["spacing_mm"] = [sp.dx, sp.dy, sp.dz]
                entry["has_truth"] = case.ed_truth is not None and case.es_truth is not None
                entry["group"] = case.metadata.group.name if case.metadata.group else None
                entry["warnings"] = _spacing_warnings(sp)
                n_ok += 1
            entries.append(entry)
        if not entries:
            raise InvalidArgumentError(f"no case directories (with Info.cfg) under {args.data_root}")
        run.write_report({"n_cases": len(entries), "n_ok": n_ok, "cases": entries})
        for e in entries:
            flags = "" if e["status"] == "ok" else f"  ({e['error']})"
            extra = "".join(f"\n    warning: {w}" for w in e.get("warnings", []))
            print(f"{e['case_id']}: {e['status']}{flags}{extra}")
        print(f"{n_ok}/{len(entries)} cases loadable")
    return 0


def cmd_features(args, config: PipelineConfig) -> int:
    with _Run("features", config, {"data_root": str(args.data_root)}) as run:
        cases = _load_cases(args.data_root, config)
        fconfig = config.feature_config()
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            # extract_all is sequential; parallelize per case here instead
            results = list(pool.map(lambda c: extract_all([c], fconfig), cases))
        vectors, quarantined, qc = [], [], {}
        for table, bad, case_qc in results:
            if table is not None:
                vectors.append(table)
            quarantined.extend(bad)
            qc.update(case_qc)
        if vectors:
            merged = FeatureTable(
                case_ids=tuple(i for t in vectors for i in t.case_ids),
                groups=tuple(g for t in vectors for g in t.groups),
                names=vectors[0].names,
                matrix=np.vstack([t.matrix for t in vectors]),
            )
            csv_text = merged.to_csv_text()
        else:
            header = ["case_id", "group", *feature_schema(fconfig)]
            csv_text = ",".join(header) + "\n"
        run.write_text("features.csv", csv_text)
        run.write_text(
            "quarantine.json",
            json.dumps([{"case_id": q.case_id, "reason": q.reason} for q in quarantined], indent=2)
            + "\n",
        )
        run.write_report(
            {
                "n_cases": len(cases),
                "n_extracted": len(cases) - len(quarantined),
                "n_quarantined": len(quarantined),
                "quarantined": [{"case_id": q.case_id, "reason": q.reason} for q in quarantined],
                "slice_qc": {k: list(v) for k, v in sorted(qc.items())},
            }
        )
        print(f"extracted {len(cases) - len(quarantined)}/{len(cases)} cases")
    return 0


def cmd_segscore(args, config: PipelineConfig) -> int:
    with _Run("segscore", config, {"data_root": str(args.data_root)}) as run:
        cases = _load_cases(args.data_root, config)
        scored = [c for c in cases if c.ed_truth is not None and c.es_truth is not None]
        scored_ids = {c.case_id for c in scored}
        skipped = [c.case_id for c in cases if c.case_id not in scored_ids]
        if not scored:
            raise InvalidArgumentError(
                f"no case under {args.data_root} has ground-truth (_gt) volumes to score against"
            )

        def score(case):
            return (
                score_case(case.ed_truth, case.ed_volume, unit=config.seg_units),
                score_case(case.es_truth, case.es_volume, unit=config.seg_units),
            )

        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(score, scored))

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["case_id", "phase", "class", "dice", "hd95", "asd", "flag"])
        acc: dict[tuple[str, str], dict[str, list]] = {}
        for case, (ed_score, es_score) in zip(scored, results):
            for phase, seg in (("ED", ed_score), ("ES", es_score)):
                for c in FOREGROUND_CLASSES:
                    s = seg.per_class[c]
                    writer.writerow(
                        [case.case_id, phase, c.name, _fmt(s.dice), _fmt(s.hd95), _fmt(s.asd),
                         s.flag or ""]
                    )
                    bucket = acc.setdefault((phase, c.name), {"dice": [], "hd95": [], "asd": []})
                    bucket["dice"].append(s.dice)
                    if s.hd95 is not None:
                        bucket["hd95"].append(s.hd95)
                        bucket["asd"].append(s.asd)
        run.write_text("segscore_cases.csv", buf.getvalue())

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["phase", "class", "n", "mean_dice", "mean_hd95", "mean_asd"])
        overall = {"dice": [], "hd95": [], "asd": []}
        for (phase, cls_name), bucket in sorted(acc.items()):
            writer.writerow(
                [
                    phase,
                    cls_name,
                    len(bucket["dice"]),
                    _fmt(float(np.mean(bucket["dice"]))),
                    _fmt(float(np.mean(bucket["hd95"])) if bucket["hd95"] else None),
                    _fmt(float(np.mean(bucket["asd"])) if bucket["asd"] else None),
                ]
            )
            for key in overall:
                overall[key].extend(bucket[key])
        writer.writerow(
            [
                "ALL",
                "ALL",
                len(overall["dice"]),
                _fmt(float(np.mean(overall["dice"]))),
                _fmt(float(np.mean(overall["hd95"])) if overall["hd95"] else None),
                _fmt(float(np.mean(overall["asd"])) if overall["asd"] else None),
            ]
        )
        run.write_text("segscore_aggregate.csv", buf.getvalue())
        run.write_report(
            {
                "n_cases": len(cases),
                "n_scored": len(scored),
                "skipped_no_truth": skipped,
                "unit": config.seg_units,
                "mean_dice": float(np.mean(overall["dice"])),
            }
        )
        print(
            f"scored {len(scored)}/{len(cases)} cases; "
            f"mean Dice {float(np.mean(overall['dice'])):.4f} ({config.seg_units} units)"
        )
    return 0


def cmd_ssl_eval(args, config: PipelineConfig) -> int:
    with _Run("ssl_eval", config, {"maps": [str(p) for p in args.maps]}) as run:
        maps = [read_probability_map(Path(p).read_bytes()) for p in args.maps]
        outs = DecoderOutputs(*maps)
        breakdown = pairwise_consistency(outs, SharpenConfig(config.sharpen_temperature))
        body = {
            "temperature": config.sharpen_temperature,
            "pairwise_mse": {k: v for k, v in breakdown.items() if k != "mean"},
            "consistency_loss": breakdown["mean"],
        }
        print(json.dumps(body, indent=2))
        run.write_report(body)
    return 0


def cmd_agreement(args, config: PipelineConfig) -> int:
    with _Run(
        "agreement", config, {"auto": str(args.auto_csv), "ref": str(args.ref_csv)}
    ) as run:
        auto = FeatureTable.from_csv_text(Path(args.auto_csv).read_text(encoding="utf-8"))
        ref = FeatureTable.from_csv_text(Path(args.ref_csv).read_text(encoding="utf-8"))
        common_ids = sorted(set(auto.case_ids) & set(ref.case_ids))
        if len(common_ids) < 2:
            raise InvalidArgumentError(
                f"need >= 2 common cases, found {len(common_ids)}"
            )
        a_rows = auto.take([auto.case_ids.index(i) for i in common_ids])
        r_rows = ref.take([ref.case_ids.index(i) for i in common_ids])
        indexes = [n for n in auto.names if n in ref.names]

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["index", "n", "bias", "sd_diff", "loa_low", "loa_high",
             "pearson_r", "slope", "intercept", "within_loa"]
        )
        for name in indexes:
            a = a_rows.matrix[:, a_rows.names.index(name)]
            r = r_rows.matrix[:, r_rows.names.index(name)]
            res = agree.bland_altman(a, r)
            within = agree.percent_within_loa(a, r)
            writer.writerow(
                [name, res.n, _fmt(res.bias), _fmt(res.sd_diff), _fmt(res.loa_low),
                 _fmt(res.loa_high), _fmt(res.pearson_r), _fmt(res.slope),
                 _fmt(res.intercept), _fmt(within)]
            )
            if args.plot_data:
                pbuf = io.StringIO()
                pwriter = csv.writer(pbuf, lineterminator="\n")
                pwriter.writerow(["case_id", "mean", "diff"])
                for cid, av, rv in zip(common_ids, a, r):
                    pwriter.writerow([cid, _fmt((av + rv) / 2.0), _fmt(av - rv)])
                run.write_text(f"plotdata_{name}.csv", pbuf.getvalue())
        run.write_text("agreement.csv", buf.getvalue())
        run.write_report({"n_common_cases": len(common_ids), "n_indexes": len(indexes)})
        print(f"agreement over {len(indexes)} indexes on {len(common_ids)} cases")
    return 0


def cmd_train(args, config: PipelineConfig) -> int:
    with _Run("train", config, {"features": str(args.features_csv)}) as run:
        table = FeatureTable.from_csv_text(Path(args.features_csv).read_text(encoding="utf-8"))
        labeled = table.labeled_only()
        if not len(labeled):
            raise InvalidArgumentError("feature table has no labeled rows to train on")
        train_t, val_t, test_t = split_table(labeled, config.split_ratios, config.seed)
        model, chosen, trials = tune_dual(
            train_t, val_t, config.learner_config(), config.grids, config.seed
        )
        run.write_bytes("model.json", save_model(model))
        run.write_text(
            "splits.json",
            json.dumps(
                {
                    "train": list(train_t.case_ids),
                    "val": list(val_t.case_ids),
                    "test": list(test_t.case_ids),
                },
                indent=2,
            )
            + "\n",
        )

        body: dict = {
            "n_labeled": len(labeled),
            "n_train": len(train_t),
            "n_val": len(val_t),
            "n_test": len(test_t),
            "grid_trials": trials,
            "chosen_hyperparameters": {
                "voting_weights": list(chosen.voting_weights),
                "rf": {"n_trees": chosen.rf.n_trees, "max_depth": chosen.rf.max_depth,
                       "min_leaf": chosen.rf.min_leaf, "max_features": chosen.rf.max_features},
                "svm": {"kernel": chosen.svm.kernel, "c": chosen.svm.c,
                        "gamma": chosen.svm.gamma, "tol": chosen.svm.tol},
                "mlp": {"hidden": list(chosen.mlp.hidden),
                        "learning_rate": chosen.mlp.learning_rate,
                        "epochs": chosen.mlp.epochs},
            },
        }
        if len(val_t):
            preds = [int(p.predicted) for p in predict_dual(model, val_t)]
            report = evaluate(preds, [int(g) for g in val_t.groups])
            body["val_accuracy"] = report.accuracy
            body["val_confusion"] = report.confusion.tolist()
            print(f"validation accuracy {report.accuracy:.3f} on {report.n} cases")
        run.write_report(body)
        print(f"model written to {Path(config.output) / 'model.json'}")
    return 0


def cmd_predict(args, config: PipelineConfig) -> int:
    with _Run(
        "predict", config, {"model": str(args.model), "features": str(args.features_csv)}
    ) as run:
        model = load_model(Path(args.model).read_bytes())
        table = FeatureTable.from_csv_text(Path(args.features_csv).read_text(encoding="utf-8"))
        if args.ids:
            wanted = [l.strip() for l in Path(args.ids).read_text(encoding="utf-8").splitlines()
                      if l.strip()]
            missing = [i for i in wanted if i not in table.case_ids]
            if missing:
                raise InvalidArgumentError(f"ids not present in feature table: {missing}")
            table = table.take([table.case_ids.index(i) for i in wanted])
        predictions = predict_dual(model, table)

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["case_id", "predicted_class",
             *[f"p_{c.name.lower()}" for c in DiseaseClass], "l2_p_minf", "l2_p_dcm"]
        )
        for p in predictions:
            l2 = ["", ""] if p.layer2_probs is None else [_fmt(float(x)) for x in p.layer2_probs]
            writer.writerow(
                [p.case_id, p.predicted.name, *[_fmt(float(x)) for x in p.layer1_probs], *l2]
            )
        run.write_text("predictions.csv", buf.getvalue())
        run.write_report({"n_cases": len(predictions)})
        print(f"predicted {len(predictions)} cases")
    return 0


def cmd_report(args, config: PipelineConfig) -> int:
    with _Run(
        "report", config,
        {"predictions": str(args.predictions_csv), "features": str(args.features_csv)},
    ) as run:
        predicted: dict[str, DiseaseClass] = {}
        with open(args.predictions_csv, encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "predicted_class" not in reader.fieldnames:
                raise InvalidArgumentError(
                    f"{args.predictions_csv} is not a predictions CSV (missing predicted_class)"
                )
            for row in reader:
                predicted[row["case_id"]] = DiseaseClass.parse(row["predicted_class"])
        table = FeatureTable.from_csv_text(Path(args.features_csv).read_text(encoding="utf-8"))
        truth = {cid: g for cid, g in zip(table.case_ids, table.groups) if g is not None}
        ids = sorted(set(predicted) & set(truth))
        if not ids:
            raise InvalidArgumentError("no overlap between predictions and labeled cases")
        report = evaluate([int(predicted[i]) for i in ids], [int(truth[i]) for i in ids])

        run.write_report(
            {
                "n_evaluated": report.n,
                "accuracy": report.accuracy,
                "per_class_recall": report.per_class_recall,
                "confusion_rows_truth": {
                    c.name: report.confusion[int(c)].tolist() for c in DiseaseClass
                },
            }
        )
        names = [c.name for c in DiseaseClass]
        width = max(len(n) for n in names) + 2
        print(f"accuracy {report.accuracy:.3f} on {report.n} cases")
        print(" " * width + "".join(f"{n:>6}" for n in names) + "   (prediction)")
        for c in DiseaseClass:
            row = report.confusion[int(c)]
            print(f"{c.name:<{width}}" + "".join(f"{v:>6}" for v in row))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cardiaq",
        description="Cardiac segmentation quantification and disease prediction pipeline.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="override config seed")
    common.add_argument("--workers", type=int, help="case-level parallelism")
    common.add_argument("--output", help="output directory")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="override any config key (dotted for learner params, JSON values)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a data root case by case")
    p.add_argument("data_root")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("features", parents=[common], help="extract the feature table")
    p.add_argument("data_root")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("segscore", parents=[common],
                       help="score predictions against ground-truth volumes")
    p.add_argument("data_root")
    p.set_defaults(func=cmd_segscore)

    p = sub.add_parser("ssl-eval", parents=[common],
                       help="consistency-loss breakdown of three decoder probability maps")
    p.add_argument("maps", nargs=3, metavar="MAP")
    p.set_defaults(func=cmd_ssl_eval)

    p = sub.add_parser("agreement", parents=[common],
                       help="agreement statistics between two feature tables")
    p.add_argument("auto_csv")
    p.add_argument("ref_csv")
    p.add_argument("--plot-data", action="store_true",
                   help="also write per-index (mean, difference) files")
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("train", parents=[common], help="train the dual-layer classifier")
    p.add_argument("features_csv")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="predict disease classes")
    p.add_argument("model")
    p.add_argument("features_csv")
    p.add_argument("--ids", help="file with one case id per line to restrict prediction to")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", parents=[common], help="confusion matrix and accuracy")
    p.add_argument("predictions_csv")
    p.add_argument("features_csv")
    p.set_defaults(func=cmd_report)
    return parser


def _resolve_config(args) -> PipelineConfig:
    overrides: dict = {}
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            overrides[key] = json.loads(value)
        except json.JSONDecodeError:
            overrides[key] = value  # allow bare strings
    for name in ("seed", "workers", "output"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; remap to 1
        return 0 if exc.code in (0, None) else 1

    try:
        config = _resolve_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1

    try:
        return args.func(args, config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (CardiaqError, FileNotFoundError, NotADirectoryError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # noqa: BLE001 - anything else is an internal failure
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
