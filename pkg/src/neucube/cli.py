"""Command-line front end.

Every subcommand reads one JSON run configuration (``--config``), applies
``--set section.field=value`` overrides and a handful of shortcut flags,
validates the result, and only then touches data. Exit status is 0 on
success, 1 on usage or configuration errors and 2 on data errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace

import numpy as np

from .analysis import (
    PropagationConfig,
    assign_clusters,
    export_snapshot,
    firing_frames,
    propagate,
    propagation_rates,
    source_matrix,
    spectral_radius,
)
from .dataset import FILL_POLICIES, CsvSchema, DataError, SyntheticConfig, generate_synthetic, load_samples, truncate, write_samples
from .encoding import write_raster
from .mapping import write_mapping
from .optimizer import GaConfig, ga_optimize
from .pipeline import NeuCube, PipelineConfig, confusion_counts
from .reservoir import build_cube, simulate, spike_flow
from .similarity import write_similarity

log = logging.getLogger("neucube")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    ga: GaConfig = field(default_factory=GaConfig)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    csv: CsvSchema = field(default_factory=CsvSchema)

    def to_dict(self) -> dict:
        return asdict(self)


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(x) for x in value)
    return value


def merge(obj, doc: dict, where: str = ""):
    """Copy of dataclass ``obj`` with ``doc`` applied; unknown keys are errors."""
    if not isinstance(doc, dict):
        raise UsageError(f"{where or 'config'}: expected an object")
    names = {f.name for f in fields(obj)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise UsageError(f"unknown config keys in {where or 'config'}: {unknown}")
    changes = {}
    for key, value in doc.items():
        current = getattr(obj, key)
        path = f"{where}.{key}" if where else key
        changes[key] = merge(current, value, path) if is_dataclass(current) else _tuplify(value)
    try:
        return replace(obj, **changes)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{where or 'config'}: {exc}") from None


def parse_assignment(text: str) -> dict:
    """``a.b.c=value`` to the nested dict ``{"a": {"b": {"c": value}}}``;
    the value is parsed as JSON when possible, else kept as a string."""
    if "=" not in text:
        raise UsageError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    doc: dict = {}
    node = doc
    parts = key.strip().split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value
    return doc


def load_run_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise UsageError(f"{args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: invalid JSON ({exc})") from None
        cfg = merge(cfg, doc)
    for text in getattr(args, "set", None) or []:
        cfg = merge(cfg, parse_assignment(text))
    seed = getattr(args, "seed", None)
    if seed is not None:
        cfg = merge(cfg, {
            "synthetic": {"seed": seed},
            "ga": {"seed": seed},
            "pipeline": {"cube": {"seed": seed}, "mapping": {"seed": seed}},
        })
    mode = getattr(args, "mapping_mode", None)
    if mode is not None:
        cfg = merge(cfg, {"pipeline": {"mapping_mode": mode}, "ga": {"mapping_mode": mode}})
    try:
        cfg.synthetic.validate()
    except DataError as exc:
        raise UsageError(f"synthetic: {exc}") from None
    if cfg.csv.fill not in FILL_POLICIES:
        raise UsageError(f"csv.fill must be one of {FILL_POLICIES}")
    return cfg


# ------------------------------------------------------------------ helpers


def _write_json(doc, path) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def _emit(doc) -> None:
    print(json.dumps(doc, indent=2))


def _load_data(path, cfg: RunConfig):
    return load_samples(path, cfg.csv)


def _seeds(cfg: RunConfig) -> dict:
    p = cfg.pipeline
    return {"cube": p.cube.seed, "mapping": p.mapping.seed, "synthetic": cfg.synthetic.seed, "ga": cfg.ga.seed}


def _load_model(directory) -> NeuCube:
    for name in ("pipeline.json", "cube.json", "model.json"):
        if not os.path.exists(os.path.join(directory, name)):
            raise DataError(f"{directory}: missing {name}; run `neucube train` first")
    try:
        return NeuCube.load(directory)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"{directory}: unreadable model ({exc})") from None


def _check_variables(model: NeuCube, data, where) -> None:
    v = model.cube.input_ids.size
    if data.v != v:
        raise DataError(f"{where}: {data.v} variables, model was trained on {v}")


# -------------------------------------------------------------- subcommands


def cmd_synth(args, cfg: RunConfig) -> dict:
    data = generate_synthetic(cfg.synthetic)
    write_samples(data, args.out)
    return {"out": args.out, "samples": data.s, "variables": data.v, "ticks": data.t, "seed": cfg.synthetic.seed}


def cmd_encode(args, cfg: RunConfig) -> dict:
    data = _load_data(args.data, cfg)
    raster = NeuCube(cfg.pipeline).encode(data)
    write_raster(raster, args.out, data.ids)
    return {"out": args.out, "spikes": int(raster.total_spikes()), "alpha": cfg.pipeline.encoding.alpha}


def cmd_map(args, cfg: RunConfig) -> dict:
    data = _load_data(args.data, cfg)
    model = NeuCube(cfg.pipeline)
    raster = model.encode(data)
    cube = build_cube(cfg.pipeline.cube, cfg.pipeline.lif, data.v)
    mapping = model.compute_mapping(raster, cube, data.variable_names)
    write_mapping(mapping, cube.input_coordinates(), args.out, data.variable_names, cube.input_ids.tolist())
    if args.similarity_out and model.similarity is not None:
        write_similarity(model.similarity, args.similarity_out)
    return {
        "out": args.out,
        "objective": mapping.objective,
        "mapping_mode": cfg.pipeline.mapping_mode,
        "seeds": _seeds(cfg),
    }


def cmd_train(args, cfg: RunConfig) -> dict:
    data = _load_data(args.data, cfg)
    model = NeuCube(cfg.pipeline).fit(data)
    model.save(args.model_dir)
    _write_json(cfg.to_dict(), os.path.join(args.model_dir, "config.json"))
    write_mapping(
        model.mapping, model.cube.input_coordinates(), os.path.join(args.model_dir, "mapping.csv"),
        data.variable_names, model.cube.input_ids.tolist(),
    )
    pred = model.predict(data, model.train_records)
    metrics = {
        "samples": data.s,
        "train_accuracy": float(np.mean(pred == data.labels)),
        "confusion": confusion_counts(data.labels, pred, data.class_count).tolist(),
        "sparsity": float(np.mean([r.sparsity for r in model.train_records])),
        "mapping_objective": float(model.mapping.objective),
        "mapping_mode": cfg.pipeline.mapping_mode,
        "seeds": _seeds(cfg),
        "timings": model.timings,
    }
    _write_json(metrics, os.path.join(args.model_dir, "metrics.json"))
    return metrics


def cmd_predict(args, cfg: RunConfig) -> dict:
    model = _load_model(args.model_dir)
    data = _load_data(args.data, cfg)
    _check_variables(model, data, args.data)
    t0 = time.perf_counter()
    records = model.records(data)
    pred = model.predict(data, records)
    elapsed = time.perf_counter() - t0
    tmp = f"{args.out}.tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "label", "predicted"])
        for sid, y, p in zip(data.ids, data.labels, pred):
            w.writerow([sid, int(y), int(p)])
    os.replace(tmp, args.out)
    class_count = max(data.class_count, model.classifier.class_count)
    metrics = {
        "out": args.out,
        "accuracy": float(np.mean(pred == data.labels)),
        "confusion": confusion_counts(data.labels, pred, class_count).tolist(),
        "sparsity": float(np.mean([r.sparsity for r in records])),
        "timings": {"recall": elapsed},
    }
    if args.metrics:
        _write_json(metrics, args.metrics)
    return metrics


def _fractions(text: str) -> list[float]:
    try:
        out = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--fractions expects comma-separated numbers, got {text!r}") from None
    if not out or any(not 0.0 < f <= 1.0 for f in out):
        raise UsageError("--fractions values must lie in (0, 1]")
    return out


def cmd_early_predict(args, cfg: RunConfig) -> dict:
    fractions = _fractions(args.fractions)
    model = _load_model(args.model_dir)
    data = _load_data(args.data, cfg)
    _check_variables(model, data, args.data)
    rows = []
    for f in fractions:
        part = truncate(data, f)
        pred = model.predict(part)
        rows.append({"fraction": f, "ticks": part.t, "accuracy": float(np.mean(pred == part.labels))})
    doc = {"results": rows}
    if args.out:
        _write_json(doc, args.out)
    return doc


def cmd_analyze(args, cfg: RunConfig) -> dict:
    model = _load_model(args.model_dir)
    cube = model.cube
    if cube.mapping is None:
        raise DataError(f"{args.model_dir}: cube has no mapping")
    A = spike_flow(cube)
    F_src = source_matrix(cube.n_neurons, cube.variable_neurons)
    rates = propagation_rates(A, cube.positions, cfg.propagation)
    result = propagate(A, F_src, rates, cfg.propagation)
    clusters = assign_clusters(result, F_src)
    doc = export_snapshot(cube, "clusters", clusters=clusters)
    doc["counts"] = clusters.counts().tolist()
    doc["iterations"] = result.iterations
    doc["spectral_radius"] = spectral_radius(A, rates)
    _write_json(doc, args.out)
    summary = {"out": args.out, "counts": doc["counts"], "iterations": result.iterations,
               "spectral_radius": doc["spectral_radius"]}
    if args.snapshots:
        path = os.path.join(args.snapshots, "connectivity.json")
        _write_json(export_snapshot(cube, "connectivity"), path)
        summary["connectivity"] = path
    if args.frames:
        if not args.data:
            raise UsageError("--frames needs --data to replay a sample")
        data = _load_data(args.data, cfg)
        _check_variables(model, data, args.data)
        if args.sample not in data.ids:
            raise DataError(f"{args.data}: no sample {args.sample!r}")
        n = data.ids.index(args.sample)
        raster = model.encode(data.subset([n]))
        record = simulate(cube.copy(), raster.row(0))
        path = os.path.join(args.frames, f"frames_{args.sample}.json")
        _write_json(firing_frames(cube, record), path)
        summary["frames"] = path
    return summary


def cmd_optimize(args, cfg: RunConfig) -> dict:
    data = _load_data(args.data, cfg)
    ga = cfg.ga
    if args.generations is not None:
        ga = replace(ga, generations=args.generations)
    if args.population is not None:
        ga = replace(ga, population=args.population)
    if args.reevaluate_elites:
        ga = replace(ga, reevaluate_elites=True)
    modes = ("graph", "random") if args.compare_mapping else (ga.mapping_mode,)
    stem, ext = os.path.splitext(args.trace)
    out = {"seed": ga.seed, "generations": ga.generations, "population": ga.population, "runs": {}}
    for mode in modes:
        res = ga_optimize(data, cfg=replace(ga, mapping_mode=mode), base=cfg.pipeline)
        trace_path = f"{stem}_{mode}{ext}" if args.compare_mapping else args.trace
        res.trace.write_csv(trace_path)
        out["runs"][mode] = {
            "best_error": res.best.fitness,
            "params": res.params,
            "evaluations": res.evaluations,
            "trace": trace_path,
        }
    _write_json(out, args.out)
    return out


# ------------------------------------------------------------------ parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field, e.g. pipeline.lif.leak=0.2 (repeatable)")
    p.add_argument("--seed", type=int, help="set every seed in the configuration")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="neucube", description="Spiking reservoir pipeline for multivariate temporal data.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic correlated-group dataset")
    _common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("encode", help="ATB-encode a dataset into a spike raster CSV")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("map", help="place variables onto input neurons")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="mapping CSV")
    p.add_argument("--similarity-out", help="also write the similarity matrix CSV")
    p.add_argument("--mapping-mode", choices=("graph", "random"))
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("train", help="fit cube and readout; write model directory")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model-dir", required=True)
    p.add_argument("--mapping-mode", choices=("graph", "random"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify samples with a trained model")
    _common(p)
    p.add_argument("--model-dir", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="labels CSV")
    p.add_argument("--metrics", help="also write metrics JSON here")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("early-predict", help="accuracy on truncated prefixes")
    _common(p)
    p.add_argument("--model-dir", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--fractions", default="1.0,0.75,0.5")
    p.add_argument("--out", help="results JSON")
    p.set_defaults(func=cmd_early_predict)

    p = sub.add_parser("analyze", help="cluster the trained cube by information propagation")
    _common(p)
    p.add_argument("--model-dir", required=True)
    p.add_argument("--out", required=True, help="clusters JSON")
    p.add_argument("--snapshots", help="directory for the connectivity snapshot")
    p.add_argument("--frames", help="directory for per-tick firing frames of one sample")
    p.add_argument("--data", help="dataset holding the sample to replay with --frames")
    p.add_argument("--sample", help="sample id to replay (default: first)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("optimize", help="genetic search over the model parameters")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="best parameters JSON")
    p.add_argument("--trace", required=True, help="per-generation trace CSV")
    p.add_argument("--generations", type=int)
    p.add_argument("--population", type=int)
    p.add_argument("--mapping-mode", choices=("graph", "random"))
    p.add_argument("--compare-mapping", action="store_true",
                   help="run graph and random mapping with identical seeds")
    p.add_argument("--reevaluate-elites", action="store_true",
                   help="re-score elites every generation instead of caching")
    p.set_defaults(func=cmd_optimize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        cfg = load_run_config(args)
        if args.command == "analyze" and args.frames and args.sample is None and args.data:
            args.sample = load_samples(args.data, cfg.csv).ids[0]
        _emit(args.func(args, cfg))
        return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
