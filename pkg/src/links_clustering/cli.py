"""Streaming command-line front end.

Subcommands: ``cluster`` (vectors in, cluster ids out, line by line),
``generate`` (synthetic labeled streams), ``evaluate`` (matched accuracy
of a labeled stream), ``tune`` (grid search over thresholds).

Record formats, selected with --format:

* jsonl: one JSON object per line, {"id": "...", "vec": [...], "label": "..."},
  id and label optional; a {"header": {...}} line carries stream metadata.
* csv: headerless lines id,label,v1,...,vN; lines starting with '#' carry
  stream metadata.

Outputs are flushed per record, so the command composes into shell
pipelines. Exit codes: 0 success, 1 usage error, 2 data error.
"""

import argparse
import contextlib
import json
import sys

import numpy as np

from .clusterer import LinksClusterer, load_snapshot, save_snapshot
from .errors import LinksError, SnapshotError
from .evaluation import TuningGrid, matched_accuracy, tune_grid, write_accuracy_table
from .hypersphere import GenerativeParams, generate_labeled_stream
from .thresholds import LinksConfig, validate_config

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


class _DataError(Exception):
    pass


def _open_in(path: str):
    if path == "-":
        return contextlib.nullcontext(sys.stdin)
    return open(path, "r", encoding="utf-8")


def _open_out(path: str):
    if path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8")


def _parse_record(line: str, fmt: str):
    """(external_id | None, label | None, list of floats) from one line.

    Returns None for metadata/blank lines. Raises ValueError on malformed
    input.
    """
    text = line.strip()
    if not text:
        return None
    if fmt == "jsonl":
        obj = json.loads(text)
        if not isinstance(obj, dict):
            raise ValueError("record line is not a JSON object")
        if "header" in obj:
            return None
        if "vec" not in obj:
            raise ValueError("record has no 'vec' field")
        vec = [float(v) for v in obj["vec"]]
        ext = obj.get("id")
        label = obj.get("label")
        return (None if ext is None else str(ext), None if label is None else str(label), vec)
    if text.startswith("#"):
        return None
    parts = text.split(",")
    if len(parts) < 3:
        raise ValueError("csv record needs id,label and at least one component")
    ext = parts[0] or None
    label = parts[1] or None
    vec = [float(v) for v in parts[2:]]
    return (ext, label, vec)


def _write_output(out, fmt: str, external_id: str, cluster_id: int, action: str):
    if fmt == "jsonl":
        out.write(
            json.dumps(
                {"id": external_id, "cluster_id": cluster_id, "action": action},
                separators=(",", ":"),
            )
        )
        out.write("\n")
    else:
        out.write(f"{external_id},{cluster_id},{action}\n")
    out.flush()


def _iter_records(stream, fmt: str, strict: bool, err):
    """Yield (line_number, id, label, vector); skip or abort on bad lines."""
    skipped = 0
    for lineno, line in enumerate(stream, start=1):
        try:
            rec = _parse_record(line, fmt)
        except ValueError as exc:
            print(f"line {lineno}: {exc}", file=err)
            if strict:
                raise _DataError(f"malformed record at line {lineno}") from exc
            skipped += 1
            continue
        if rec is None:
            continue
        yield lineno, rec[0], rec[1], rec[2]
    if skipped:
        print(f"skipped {skipped} malformed line(s)", file=err)


def _add_format_flag(p):
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl",
                   help="record format (default jsonl)")


def _add_config_flags(p):
    p.add_argument("--tc", type=float, help="cluster similarity threshold")
    p.add_argument("--ts", type=float, help="subcluster similarity threshold")
    p.add_argument("--tp", type=float, help="pair similarity maximum")
    p.add_argument("--no-anisotropy", action="store_true",
                   help="use the raw thresholds instead of the tp-interpolated ones")
    p.add_argument("--strict", action="store_true",
                   help="abort on malformed lines and non-unit vectors")
    p.add_argument("--dim", type=int, default=None,
                   help="assert the stream dimension instead of inferring it")
    p.add_argument("--seed", type=int, default=0, help="seed (reserved; recorded in snapshots)")


def _config_from_args(args, dimension: int) -> LinksConfig:
    if args.tc is None or args.ts is None:
        raise _UsageError("--tc and --ts are required")
    if not args.no_anisotropy and args.tp is None:
        raise _UsageError("--tp is required unless --no-anisotropy is given")
    return validate_config(
        LinksConfig(
            dimension=dimension,
            tc=args.tc,
            ts=args.ts,
            tp=None if args.no_anisotropy else args.tp,
            use_anisotropy=not args.no_anisotropy,
            strict_unit_norm=args.strict,
        )
    )


def _cmd_cluster(args, out, err) -> int:
    clusterer = None
    if args.snapshot_in:
        if args.tc is not None or args.ts is not None or args.tp is not None:
            raise _UsageError("--tc/--ts/--tp conflict with --snapshot-in (config comes from the snapshot)")
        clusterer = load_snapshot(args.snapshot_in)
        if args.dim is not None and clusterer.config.dimension != args.dim:
            raise _DataError(
                f"--dim {args.dim} does not match snapshot dimension "
                f"{clusterer.config.dimension}"
            )
    else:
        # fail fast on flag problems; the full range check happens once the
        # dimension is known (here, when --dim is given)
        if args.tc is None or args.ts is None:
            raise _UsageError("--tc and --ts are required")
        if not args.no_anisotropy and args.tp is None:
            raise _UsageError("--tp is required unless --no-anisotropy is given")
        if args.dim is not None:
            clusterer = LinksClusterer(_config_from_args(args, args.dim), seed=args.seed)

    with _open_in(args.input) as stream:
        index = 0
        for lineno, ext, _label, vec in _iter_records(stream, args.format, args.strict, err):
            if clusterer is None:
                dim = args.dim if args.dim is not None else len(vec)
                clusterer = LinksClusterer(_config_from_args(args, dim), seed=args.seed)
            try:
                result = clusterer.add_vector(vec)
            except LinksError as exc:
                print(f"line {lineno}: {exc}", file=err)
                if args.strict:
                    raise _DataError(f"bad vector at line {lineno}") from exc
                continue
            _write_output(out, args.format, ext if ext is not None else str(index), result.cluster_id, result.action)
            index += 1

    if args.snapshot_out:
        if clusterer is None:
            dim = args.dim
            if dim is None:
                raise _DataError("empty stream and no --dim: cannot snapshot an unsized clusterer")
            clusterer = LinksClusterer(_config_from_args(args, dim), seed=args.seed)
        save_snapshot(clusterer, args.snapshot_out)
    return EXIT_OK


def _cmd_generate(args, out, err) -> int:
    params = GenerativeParams(
        dimension=args.dim,
        sigma=args.sigma,
        num_clusters=args.clusters,
        points_per_cluster=args.points,
        seed=args.seed,
        min_center_angle=args.min_center_angle,
        separated_centers=args.separated_centers,
    )
    stream = generate_labeled_stream(params)
    meta = {
        "dim": args.dim,
        "sigma": args.sigma,
        "clusters": args.clusters,
        "points": args.points,
        "seed": args.seed,
        "min_center_angle": args.min_center_angle,
        "separated_centers": args.separated_centers,
    }
    if args.format == "jsonl":
        out.write(json.dumps({"header": meta}, separators=(",", ":")) + "\n")
        for i, (label, vec) in enumerate(stream):
            out.write(
                json.dumps(
                    {"id": str(i), "label": str(label), "vec": vec.tolist()},
                    separators=(",", ":"),
                )
                + "\n"
            )
    else:
        pairs = " ".join(f"{k}={v}" for k, v in meta.items())
        out.write(f"# {pairs}\n")
        for i, (label, vec) in enumerate(stream):
            comps = ",".join(repr(float(v)) for v in vec)
            out.write(f"{i},{label},{comps}\n")
    out.flush()
    return EXIT_OK


def _collect_labeled(args, err):
    records = []
    with _open_in(args.input) as stream:
        for lineno, _ext, label, vec in _iter_records(stream, args.format, args.strict, err):
            if label is None:
                raise _DataError(f"record at line {lineno} has no true label")
            records.append((label, np.asarray(vec, dtype=np.float64)))
    if not records:
        raise _DataError("no labeled records in input")
    if args.dim is not None and len(records[0][1]) != args.dim:
        raise _DataError(f"--dim {args.dim} does not match stream dimension {len(records[0][1])}")
    return records


def _cmd_evaluate(args, out, err) -> int:
    records = _collect_labeled(args, err)
    config = _config_from_args(args, len(records[0][1]))
    clusterer = LinksClusterer(config, seed=args.seed)
    predicted = [clusterer.add_vector(vec).cluster_id for _, vec in records]
    accuracy = matched_accuracy(predicted, [label for label, _ in records])
    stats = clusterer.stats()
    out.write(f"accuracy={accuracy!r}\n")
    out.write(f"clusters={stats.num_clusters}\n")
    out.write(f"subclusters={stats.num_subclusters}\n")
    out.write(f"vectors={stats.num_vectors}\n")
    out.flush()
    return EXIT_OK


def _parse_grid(text: str, flag: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise _UsageError(f"{flag}: {exc}") from exc
    if not values:
        raise _UsageError(f"{flag} needs at least one value")
    return values


def _cmd_tune(args, out, err) -> int:
    if not args.no_anisotropy and args.tp_grid is None:
        raise _UsageError("--tp-grid is required unless --no-anisotropy is given")
    records = _collect_labeled(args, err)
    grid = TuningGrid(
        tc_values=_parse_grid(args.tc_grid, "--tc-grid"),
        ts_values=_parse_grid(args.ts_grid, "--ts-grid"),
        tp_values=(_parse_grid(args.tp_grid, "--tp-grid") if args.tp_grid else (None,)),
        use_anisotropy=not args.no_anisotropy,
    )
    result = tune_grid(grid, records)
    write_accuracy_table(result.table, args.table)
    for tc, ts, tp, reason in result.skipped:
        print(f"skipped tc={tc} ts={ts} tp={tp}: {reason}", file=err)
    best = result.best
    out.write(
        f"best tc={best.tc!r} ts={best.ts!r} tp={best.tp!r} "
        f"accuracy={result.best_accuracy!r}\n"
    )
    out.flush()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="links", description="Streaming unit-vector clustering")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="assign a cluster id to each input vector")
    _add_format_flag(p)
    _add_config_flags(p)
    p.add_argument("--input", default="-", help="input path or - for stdin")
    p.add_argument("--output", default="-", help="output path or - for stdout")
    p.add_argument("--snapshot-in", default=None, help="resume from this snapshot")
    p.add_argument("--snapshot-out", default=None, help="write final state here")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("generate", help="emit a synthetic labeled stream")
    _add_format_flag(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--sigma", type=float, required=True, help="angular spread in radians")
    p.add_argument("--clusters", type=int, required=True)
    p.add_argument("--points", type=int, required=True, help="points per cluster")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--min-center-angle", type=float, default=None,
                   help="redraw uniform centers until pairwise angles exceed this")
    p.add_argument("--separated-centers", action="store_true",
                   help="place centers on a randomly oriented regular simplex")
    p.add_argument("--output", default="-")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("evaluate", help="matched accuracy of a labeled stream")
    _add_format_flag(p)
    _add_config_flags(p)
    p.add_argument("--input", default="-")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("tune", help="grid-search thresholds on a labeled stream")
    _add_format_flag(p)
    p.add_argument("--tc-grid", required=True, help="comma-separated tc candidates")
    p.add_argument("--ts-grid", required=True, help="comma-separated ts candidates")
    p.add_argument("--tp-grid", default=None, help="comma-separated tp candidates")
    p.add_argument("--no-anisotropy", action="store_true")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--input", default="-")
    p.add_argument("--table", required=True, help="write the accuracy table CSV here")
    p.set_defaults(func=_cmd_tune)
    return parser


def main(argv=None, out=None, err=None) -> int:
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "output", "-") != "-":
            with _open_out(args.output) as fh:
                return args.func(args, fh, err)
        return args.func(args, out, err)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=err)
        return EXIT_USAGE
    except _DataError as exc:
        print(f"data error: {exc}", file=err)
        return EXIT_DATA
    except SnapshotError as exc:
        print(f"data error: {exc}", file=err)
        return EXIT_DATA
    except LinksError as exc:
        print(f"data error: {exc}", file=err)
        return EXIT_DATA
    except BrokenPipeError:
        return EXIT_OK


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
