"""Command-line front door.

Subcommands: score, refine, meta-eval, sweep, serve-check. Exit codes:
0 success, 1 usage error, 2 data error, 3 backend/transport error.
Primary results go to stdout or --out; diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import conformance, dataio, metaeval
from .config import EvalConfig
from .errors import ArgumentError, BackendError, DataError, ErrlensError
from .metric import evaluate
from .analysis import refine
from .ngram import NgramBackend
from .remote import RemoteBackend, ServerEndpoint
from .scorer import PromptSet, ScorerBackend, Variant

ENDPOINT_ENV = "ERRLENS_ENDPOINT"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(message)


def _parse_weights(spec: str) -> tuple[float, float]:
    try:
        exp_str, imp_str = spec.split(":")
        weights = float(exp_str), float(imp_str)
    except ValueError:
        raise ArgumentError(f"--weights expects EXP:IMP (e.g. 1.4:1), got {spec!r}")
    return weights


def _parse_sweep(spec: str) -> list[float]:
    try:
        return [float(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise ArgumentError(f"--sweep expects comma-separated ratios, got {spec!r}")


def _load_prompts(path: Optional[str]) -> PromptSet:
    if not path:
        return PromptSet.empty()
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read prompts file: {exc}")
    except json.JSONDecodeError as exc:
        raise DataError(f"prompts file is not valid JSON: {exc}")
    return PromptSet(
        encoder_suffixes=tuple(obj.get("encoder_suffixes", ())),
        decoder_prefixes=tuple(obj.get("decoder_prefixes", ())),
    )


def _endpoint_from(args) -> ServerEndpoint:
    url = args.endpoint or os.environ.get(ENDPOINT_ENV)
    if not url:
        raise ArgumentError(
            f"remote backend requires --endpoint or ${ENDPOINT_ENV}"
        )
    return ServerEndpoint(url)


def _build_backend(args) -> ScorerBackend:
    if args.backend == "ngram":
        return NgramBackend()
    return RemoteBackend(_endpoint_from(args))


def _build_config(args) -> EvalConfig:
    weight_exp, weight_imp = _parse_weights(args.weights)
    return EvalConfig(
        k=args.k,
        iterations=args.iterations,
        weight_exp=weight_exp,
        weight_imp=weight_imp,
        overlap_threshold=args.overlap_threshold,
        low_prob_threshold=args.lowprob_threshold,
        variant=Variant(args.variant),
        prompts=_load_prompts(args.prompts),
    )


def _add_backend_flags(parser):
    parser.add_argument("--backend", choices=("ngram", "remote"), default="ngram",
                        help="scoring backend (default: ngram oracle)")
    parser.add_argument("--endpoint", help=f"remote server URL (or ${ENDPOINT_ENV})")


def _add_config_flags(parser):
    parser.add_argument("--variant", choices=[v.value for v in Variant],
                        default=Variant.PRECISION.value,
                        help="scoring variant (default: precision)")
    parser.add_argument("--prompts", help="JSON file with encoder_suffixes/decoder_prefixes")
    parser.add_argument("--k", type=int, default=10, help="top-k correction candidates")
    parser.add_argument("--iterations", type=int, default=5,
                        help="maximum detect-correct rounds")
    parser.add_argument("--weights", default="1.4:1",
                        help="explicit:implicit error weights (default 1.4:1)")
    parser.add_argument("--overlap-threshold", type=float, default=0.15,
                        help="non-translation token-overlap threshold")
    parser.add_argument("--lowprob-threshold", type=float, default=0.6,
                        help="non-translation low-probability-fraction threshold")


def _build_parser() -> _Parser:
    parser = _Parser(prog="errlens", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("score", help="evaluate a corpus and emit JSONL reports")
    _add_backend_flags(p)
    _add_config_flags(p)
    p.add_argument("--samples", required=True, help="corpus file (.jsonl or .tsv)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--trace", action="store_true", help="include refinement traces")
    p.add_argument("--jobs", type=int, default=1, help="parallel sample evaluations")

    p = sub.add_parser("refine", help="refine one hypothesis and show the trace")
    _add_backend_flags(p)
    _add_config_flags(p)
    p.add_argument("--ref", help="reference text")
    p.add_argument("--src", help="source text (faithfulness variant)")
    p.add_argument("--hyp", required=True, help="hypothesis text")
    p.add_argument("--trace", action="store_true", help="emit the full JSON trace")
    p.add_argument("--out", help="output path (default: stdout)")

    p = sub.add_parser("meta-eval", help="correlate metric scores with judgments")
    p.add_argument("--judgments", required=True, help="DARR TSV file")
    p.add_argument("--scores", action="append", required=True,
                   help="scored-corpus JSONL (repeat for metric comparison)")
    p.add_argument("--bootstrap", type=int, help="paired bootstrap resamples")
    p.add_argument("--seed", type=int, help="bootstrap RNG seed (required with --bootstrap)")
    p.add_argument("--mqm", help="MQM TSV for top-K system filtering")
    p.add_argument("--topk", type=int, help="keep only the top-K systems by MQM mean")
    p.add_argument("--json", action="store_true", help="emit JSON instead of TSV")
    p.add_argument("--out", help="output path (default: stdout)")

    p = sub.add_parser("sweep", help="sweep explicit:implicit weight ratios")
    _add_backend_flags(p)
    _add_config_flags(p)
    p.add_argument("--samples", required=True, help="corpus file (.jsonl or .tsv)")
    p.add_argument("--judgments", required=True, help="DARR TSV file")
    p.add_argument("--sweep", required=True, help='ratios, e.g. "1.0,1.1,1.2,1.3,1.4,1.5"')
    p.add_argument("--jobs", type=int, default=1, help="parallel sample evaluations")
    p.add_argument("--out", help="output path (default: stdout)")

    p = sub.add_parser("serve-check", help="ping a remote backend and run conformance checks")
    p.add_argument("--endpoint", help=f"remote server URL (or ${ENDPOINT_ENV})")
    return parser


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_corpus(path: str):
    fmt = dataio.SampleFormat.TSV if path.endswith(".tsv") else dataio.SampleFormat.JSONL
    samples = dataio.load_samples(path, fmt)
    if not samples:
        raise DataError(f"no samples in {path}")
    return samples


def _evaluate_corpus(samples, backend, cfg, jobs: int):
    def one(sample):
        return evaluate(backend, sample.source, list(sample.references),
                        sample.hypothesis, cfg)

    if jobs <= 1:
        return [one(s) for s in samples]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, samples))


def _cmd_score(args) -> int:
    samples = _load_corpus(args.samples)
    backend = _build_backend(args)
    cfg = _build_config(args)
    reports = _evaluate_corpus(samples, backend, cfg, args.jobs)
    if args.out:
        dataio.write_scored_corpus(samples, reports, args.out, include_trace=args.trace)
    else:
        rows = []
        for sample, report in zip(samples, reports):
            row = {"id": sample.id, "system": sample.system,
                   **dataio.report_to_dict(report)}
            if not args.trace:
                del row["trace"]
            rows.append(json.dumps(row, sort_keys=True, ensure_ascii=False))
        sys.stdout.write("".join(r + "\n" for r in rows))
    return EXIT_OK


def _cmd_refine(args) -> int:
    cfg = _build_config(args)
    if cfg.variant is Variant.FAITHFULNESS:
        if not args.src:
            raise ArgumentError("faithfulness refinement requires --src")
        condition = args.src
    else:
        if not args.ref:
            raise ArgumentError(f"{cfg.variant.value} refinement requires --ref")
        condition = args.ref
    backend = _build_backend(args)
    trace = refine(backend, condition, args.hyp, cfg)
    if args.trace:
        _emit(trace.to_json() + "\n", args.out)
    else:
        _emit(trace.final_text + "\n", args.out)
    return EXIT_OK


def _correlation_rows(args, judgments):
    rows = []
    for path in args.scores:
        scores = dataio.load_scores(path)
        result = metaeval.kendall_darr(judgments, scores)
        rows.append({
            "metric": Path(path).name,
            "dataset": Path(args.judgments).name,
            "kind": result.kind.value,
            "statistic": result.statistic,
            "n": result.n_items,
            "p_value": None,
        })
    return rows


def _cmd_meta_eval(args) -> int:
    judgments = dataio.load_darr(args.judgments)
    if args.topk is not None:
        if not args.mqm:
            raise ArgumentError("--topk requires --mqm human scores")
        keep = metaeval.topk_filter(dataio.load_mqm(args.mqm), args.topk)
        judgments = [j for j in judgments
                     if j.system_better in keep and j.system_worse in keep]
        if not judgments:
            raise DataError("top-K filtering removed every judgment")
    rows = _correlation_rows(args, judgments)
    if args.bootstrap is not None:
        if args.seed is None:
            raise ArgumentError("--bootstrap requires --seed for reproducibility")
        if len(args.scores) != 2:
            raise ArgumentError("--bootstrap compares exactly two --scores files")
        p = metaeval.bootstrap_significance(
            judgments,
            dataio.load_scores(args.scores[0]),
            dataio.load_scores(args.scores[1]),
            resamples=args.bootstrap,
            seed=args.seed,
        )
        for row in rows:
            row["p_value"] = p
    if args.json:
        text = json.dumps(rows, sort_keys=True, indent=2) + "\n"
    else:
        header = "metric\tdataset\tkind\tstatistic\tn\tp_value\n"
        body = "".join(
            "{metric}\t{dataset}\t{kind}\t{statistic!r}\t{n}\t{p}\n".format(
                p="" if row["p_value"] is None else repr(row["p_value"]), **row
            )
            for row in rows
        )
        text = header + body
    _emit(text, args.out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    samples = _load_corpus(args.samples)
    judgments = dataio.load_darr(args.judgments)
    ratios = _parse_sweep(args.sweep)
    if not ratios:
        raise ArgumentError("--sweep lists no ratios")
    backend = _build_backend(args)
    cfg = _build_config(args)
    reports = _evaluate_corpus(samples, backend, cfg, args.jobs)
    distances = {
        (sample.system, sample.id): (report.dist_exp, report.dist_imp)
        for sample, report in zip(samples, reports)
    }
    results = metaeval.weight_sweep(distances, judgments, cfg, ratios)
    text = "ratio\tkind\tstatistic\tn\n" + "".join(
        f"{ratio!r}\t{res.kind.value}\t{res.statistic!r}\t{res.n_items}\n"
        for ratio, res in results
    )
    _emit(text, args.out)
    return EXIT_OK


def _cmd_serve_check(args) -> int:
    endpoint = _endpoint_from(args)
    for line in conformance.run_conformance(endpoint):
        print(f"ok: {line}")
    print("conformance: all checks passed")
    return EXIT_OK


_COMMANDS = {
    "score": _cmd_score,
    "refine": _cmd_refine,
    "meta-eval": _cmd_meta_eval,
    "sweep": _cmd_sweep,
    "serve-check": _cmd_serve_check,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.subcommand](args)
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except ArgumentError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except ErrlensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
