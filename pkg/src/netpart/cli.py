"""``netpart`` command line: one subcommand per pipeline stage.

Every stage reads and writes plain files under ``--out``:

    series.csv                      ingest: gap-filled series per (date, road)
    gaf/<date>/<road>.gaf           encode: GAF1 dumps
    excluded.csv                    encode: roads left out (road_id, dates, reason)
    model.npae, loss.csv            train
    features.csv                    features: date, road_id, f0..f80
    partitions/<method>_k<k>.json   partition (+ .geojson with --geometry)
    metrics/<method>_k<k>.json      evaluate (across-day mean)
    metrics/per_day/<method>_k<k>_<date>.json
    comparison.csv                  evaluate / compare
    records.csv, edges.csv, roads.txt, truth.json, scenario.json   synth

Exit codes: 0 ok, 2 input error, 3 training divergence, 4 infeasible k,
5 evaluation input mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import clustering, gaf, graph as graphmod, ingest, metrics, neuralnet, synth
from .errors import (
    KTooLarge,
    KTooSmall,
    MissingSeries,
    NetpartError,
    NonFiniteLoss,
)

log = logging.getLogger("netpart")

EXIT_INPUT, EXIT_DIVERGED, EXIT_K, EXIT_EVAL = 2, 3, 4, 5
METHODS = ("ae-hier", "spectral", "raw-hier")


class CliError(Exception):
    def __init__(self, message, code=EXIT_INPUT):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# helpers


def _need(path, what):
    if path is None:
        raise CliError(f"missing --{what}")
    if not Path(path).exists():
        raise CliError(f"{what} file not found: {path}")
    return Path(path)


def parse_k(text):
    lo, sep, hi = text.partition("..")
    try:
        ks = list(range(int(lo), int(hi) + 1)) if sep else [int(lo)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k spec {text!r}; use A or A..B") from None
    if not ks:
        raise argparse.ArgumentTypeError(f"empty k range {text!r}")
    return ks


def _load_records(args):
    path = _need(args.records, "records")
    with open(path, newline="") as fh:
        try:
            records = ingest.parse_records(fh, period_base=args.period_base)
        except NetpartError as exc:
            raise CliError(f"{path}: {exc}") from None
    try:
        return ingest.assemble_all(records)
    except NetpartError as exc:
        raise CliError(f"{path}: {exc}") from None


def _load_graph(args, series=None):
    path = _need(args.edges, "edges")
    try:
        edges = graphmod.read_edges(path)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    if getattr(args, "roads", None):
        roads = graphmod.read_roads(_need(args.roads, "roads"))
    else:
        seen = {}
        if series:
            for day in series.values():
                for r in day:
                    seen.setdefault(r, None)
        for a, b in edges:
            seen.setdefault(a, None)
            seen.setdefault(b, None)
        roads = list(seen)
    try:
        return graphmod.build_graph(roads, edges)
    except NetpartError as exc:
        raise CliError(f"{path}: {exc}") from None


def _select_dates(series, selector):
    dates = list(series)
    if selector in (None, "all"):
        return dates
    try:
        want = ingest.parse_date(selector)
    except ValueError:
        raise CliError(f"bad --date {selector!r}") from None
    if want not in series:
        raise CliError(f"no records for date {selector}")
    return [want]


def _mean_values(series, dates, roads):
    missing = [r for r in roads if any(r not in series[d] for d in dates)]
    if missing:
        raise MissingSeries(f"roads without series on every selected date: {missing[:5]}")
    return {r: np.mean([series[d][r].values for d in dates], axis=0) for r in roads}


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _out(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(args):
    series = _load_records(args)
    out = _out(args)
    rows = []
    for date, day in series.items():
        for road, s in day.items():
            rows.append([ingest.format_date(date), road, int(s.imputed_mask.sum())] + [repr(float(v)) for v in s.values])
    slots = len(rows[0]) - 3 if rows else ingest.SLOTS_PER_DAY
    _write_csv(out / "series.csv", ["date", "road_id", "imputed"] + [f"v{i}" for i in range(slots)], rows)
    log.info("wrote %d series", len(rows))


def cmd_encode(args):
    series = _load_records(args)
    graph = _load_graph(args, series)
    out = _out(args)
    excluded = {}
    written = 0
    for date in _select_dates(series, args.date):
        day = series[date]
        folder = out / "gaf" / ingest.format_date(date)
        folder.mkdir(parents=True, exist_ok=True)
        for road in graph.roads:
            if road not in day:
                continue
            values = day[road].values
            try:
                if args.paa:
                    values = gaf.paa_downsample(values, args.paa)
                g = gaf.encode_values(values)
            except NetpartError as exc:
                entry = excluded.setdefault(road, [[], type(exc).__name__])
                entry[0].append(ingest.format_date(date))
                continue
            gaf.write_gaf(g, folder / f"{road}.gaf")
            written += 1
    _write_csv(
        out / "excluded.csv",
        ["road_id", "dates", "reason"],
        [[road, ";".join(dates), reason] for road, (dates, reason) in excluded.items()],
    )
    log.info("wrote %d GAF files, excluded %d roads", written, len(excluded))


def _gaf_files(out):
    root = Path(out) / "gaf"
    if not root.is_dir():
        raise CliError(f"no GAF dump under {root}; run encode first")
    files = sorted(root.glob("*/*.gaf"))
    if not files:
        raise CliError(f"GAF dump under {root} is empty")
    return files


def cmd_train(args):
    out = _out(args)
    files = _gaf_files(out)
    images = np.array([gaf.read_gaf(f).data for f in files])
    try:
        model = neuralnet.AutoencoderModel.build(images.shape[-1], seed=args.seed)
    except NetpartError as exc:
        raise CliError(str(exc)) from None
    config = neuralnet.TrainConfig(args.epochs, args.batch, args.lr, seed=args.seed)
    try:
        result = neuralnet.train(
            model, images, config, progress=lambda e, l: log.info("epoch %d loss %.6g", e + 1, l)
        )
    except NonFiniteLoss as exc:
        raise CliError(str(exc), EXIT_DIVERGED) from None
    neuralnet.save_checkpoint(model, out / "model.npae")
    _write_csv(out / "loss.csv", ["epoch", "loss"], [[i + 1, repr(l)] for i, l in enumerate(result.losses)])


def _compute_features(out):
    model_path = out / "model.npae"
    if not model_path.exists():
        raise CliError(f"no model checkpoint at {model_path}; run train first")
    model = neuralnet.load_checkpoint(model_path)
    rows = []
    for f in _gaf_files(out):
        try:
            vec = neuralnet.extract_features(model, gaf.read_gaf(f).data)
        except NetpartError as exc:
            raise CliError(f"{f}: {exc}") from None
        rows.append([f.parent.name, f.stem] + [repr(float(v)) for v in vec])
    return rows


def cmd_features(args):
    out = _out(args)
    rows = _compute_features(out)
    width = len(rows[0]) - 2
    _write_csv(out / "features.csv", ["date", "road_id"] + [f"f{i}" for i in range(width)], rows)


def _read_features(out, dates):
    path = out / "features.csv"
    if path.exists():
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            rows = list(reader)
    else:
        rows = _compute_features(out)
    want = {ingest.format_date(d) for d in dates}
    per_road = {}
    for row in rows:
        if row[0] in want:
            per_road.setdefault(row[1], []).append([float(v) for v in row[2:]])
    return {r: np.mean(v, axis=0) for r, v in per_road.items()}


def _excluded_roads(out):
    path = out / "excluded.csv"
    if not path.exists():
        return set()
    with open(path, newline="") as fh:
        return {row["road_id"] for row in csv.DictReader(fh)}


def cmd_partition(args):
    series = _load_records(args)
    graph = _load_graph(args, series)
    out = _out(args)
    dates = _select_dates(series, args.date)
    if args.method == "ae-hier":
        feats = _read_features(out, dates)
        skip = _excluded_roads(out) | {r for r in graph.roads if r not in feats}
        if skip:
            log.warning("ae-hier: %d roads without features are left out", len(skip))
            keep = [r for r in graph.roads if r not in skip]
            graph = graphmod.build_graph(
                keep, [tuple(e) for e in graph.edges if not (set(e) & skip)]
            )
            feats = {r: feats[r] for r in keep}
    else:
        try:
            feats = _mean_values(series, dates, graph.roads)
        except MissingSeries as exc:
            raise CliError(str(exc)) from None
    geometry = None
    if args.geometry:
        with open(_need(args.geometry, "geometry")) as fh:
            geometry = json.load(fh)
    folder = out / "partitions"
    folder.mkdir(exist_ok=True)
    try:
        if args.method == "spectral":
            parts = {k: clustering.spectral_partition(graph, feats, k, seed=args.seed) for k in args.k}
        else:
            parts = clustering.hierarchical_sweep(graph, feats, args.k)
    except (KTooSmall, KTooLarge) as exc:
        raise CliError(str(exc), EXIT_K) from None
    except NetpartError as exc:
        raise CliError(str(exc)) from None
    for k, cs in parts.items():
        if args.method != "spectral":
            for c in cs.clusters():
                if len(graphmod.connected_components(graph, c)) != 1:
                    raise CliError(f"internal error: disconnected cluster at k={k}", 1)
        stem = f"{args.method}_k{k}"
        clustering.write_partition(cs, args.method, folder / f"{stem}.json")
        if geometry is not None:
            with open(folder / f"{stem}.geojson", "w") as fh:
                json.dump(clustering.partition_geojson(cs, geometry), fh)
                fh.write("\n")


def _partition_files(out, methods=None):
    folder = out / "partitions"
    files = sorted(folder.glob("*.json")) if folder.is_dir() else []
    if not files:
        raise CliError(f"no partitions under {folder}; run partition first")
    parts = []
    for f in files:
        cs, method = clustering.read_partition(f)
        if methods and method not in methods:
            continue
        parts.append((method, cs))
    return parts


def _mean_report(reports, method):
    first = reports[0]
    return metrics.MetricsReport(
        k=first.k,
        intra=float(np.mean([r.intra for r in reports])),
        inter=float(np.mean([r.inter for r in reports])),
        network_intra=float(np.mean([r.network_intra for r in reports])),
        per_cluster_intra=[float(v) for v in np.mean([r.per_cluster_intra for r in reports], axis=0)],
        adjacent_pair_count=first.adjacent_pair_count,
        method=method,
    )


def _dump_json(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def cmd_evaluate(args):
    series = _load_records(args)
    full = _load_graph(args, series)
    out = _out(args)
    dates = _select_dates(series, args.date)
    folder = out / "metrics"
    (folder / "per_day").mkdir(parents=True, exist_ok=True)
    summary = {}
    for method, cs in _partition_files(out):
        roads = [r for r in full.roads if r in cs.assignment]
        if len(roads) != len(cs.assignment):
            raise CliError(f"{method} k={cs.k}: partition names roads outside the network", EXIT_EVAL)
        graph = full if len(roads) == len(full.roads) else graphmod.build_graph(
            roads, [tuple(e) for e in full.edges if set(e) <= set(roads)]
        )
        reports = []
        for date in dates:
            try:
                rep = metrics.evaluate(cs, series[date], graph, method)
            except (MissingSeries, NetpartError) as exc:
                raise CliError(f"{method} k={cs.k} on {date}: {exc}", EXIT_EVAL) from None
            _dump_json(rep.to_json(), folder / "per_day" / f"{method}_k{cs.k}_{ingest.format_date(date)}.json")
            reports.append(rep)
        mean = _mean_report(reports, method)
        _dump_json(mean.to_json(), folder / f"{method}_k{cs.k}.json")
        summary[(method, cs.k)] = mean
    _write_comparison(out, summary, args.baseline)


def _load_metric_reports(out):
    folder = out / "metrics"
    reports = {}
    for f in sorted(folder.glob("*.json")) if folder.is_dir() else []:
        with open(f) as fh:
            d = json.load(fh)
        reports[(d["method"], d["k"])] = metrics.MetricsReport(**d)
    if not reports:
        raise CliError(f"no metrics under {folder}; run evaluate first", EXIT_EVAL)
    return reports


def _write_comparison(out, reports, baseline):
    rows = []
    methods = sorted({m for m, _ in reports})
    for method in methods:
        if method == baseline:
            continue
        for (m, k), rep in sorted(reports.items(), key=lambda kv: (kv[0][0], kv[0][1])):
            if m != method or (baseline, k) not in reports:
                continue
            base = reports[(baseline, k)]
            c = metrics.compare(rep, base)
            rows.append([k, method, baseline, repr(rep.intra), repr(base.intra), repr(rep.inter),
                         repr(base.inter), repr(c["intra_improvement_pct"]), repr(c["inter_improvement_pct"])])
    _write_csv(
        out / "comparison.csv",
        ["k", "method", "baseline", "intra", "baseline_intra", "inter", "baseline_inter",
         "intra_improvement_pct", "inter_improvement_pct"],
        rows,
    )


def cmd_compare(args):
    out = _out(args)
    _write_comparison(out, _load_metric_reports(out), args.baseline)


def cmd_synth(args):
    out = _out(args)
    if args.scenario:
        try:
            scenario = synth.load_scenario(_need(args.scenario, "scenario"))
        except (TypeError, ValueError, KeyError) as exc:
            raise CliError(f"bad scenario file: {exc}") from None
    else:
        scenario = synth.SynthScenario(seed=args.seed)
    try:
        data = synth.generate(scenario)
    except NetpartError as exc:
        raise CliError(str(exc)) from None
    with open(out / "records.csv", "w", newline="") as fh:
        ingest.write_records(synth.to_records(data), fh)
    graphmod.write_edges(data.graph, out / "edges.csv")
    graphmod.write_roads(data.graph.roads, out / "roads.txt")
    clustering.write_partition(data.truth, "truth", out / "truth.json")
    _dump_json(scenario.to_json(), out / "scenario.json")


COMMANDS = {
    "ingest": cmd_ingest,
    "encode": cmd_encode,
    "train": cmd_train,
    "features": cmd_features,
    "partition": cmd_partition,
    "evaluate": cmd_evaluate,
    "synth": cmd_synth,
    "compare": cmd_compare,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="netpart", description="Road-network partitioning pipeline")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, *flags):
        p = sub.add_parser(name)
        p.add_argument("--out", required=True)
        p.add_argument("--threads", type=int, default=None)
        if "records" in flags:
            p.add_argument("--records")
            p.add_argument("--period-base", type=int, choices=(0, 1), default=0)
        if "edges" in flags:
            p.add_argument("--edges")
            p.add_argument("--roads")
        if "date" in flags:
            p.add_argument("--date", default="all")
        return p

    add("ingest", "records")
    p = add("encode", "records", "edges", "date")
    p.add_argument("--paa", type=int, default=None)
    p = add("train")
    p.add_argument("--epochs", type=int, default=neuralnet.TrainConfig.epochs)
    p.add_argument("--batch", type=int, default=neuralnet.TrainConfig.batch_size)
    p.add_argument("--lr", type=float, default=neuralnet.TrainConfig.learning_rate)
    p.add_argument("--seed", type=int, default=0)
    add("features")
    p = add("partition", "records", "edges", "date")
    p.add_argument("--method", choices=METHODS, default="ae-hier")
    p.add_argument("--k", type=parse_k, required=True)
    p.add_argument("--geometry")
    p.add_argument("--seed", type=int, default=0)
    p = add("evaluate", "records", "edges", "date")
    p.add_argument("--baseline", default="spectral")
    p = add("compare")
    p.add_argument("--baseline", default="spectral")
    p = add("synth")
    p.add_argument("--scenario")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.threads:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(args.threads):
                COMMANDS[args.command](args)
        else:
            COMMANDS[args.command](args)
    except CliError as exc:
        print(f"netpart {args.command}: {exc}", file=sys.stderr)
        return exc.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
