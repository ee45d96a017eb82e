"""Command-line entry point: prove, extract, eval, serve, bench."""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
from pathlib import Path

from .bench import run_bench
from .core import Theory
from .engine import ConfigError, EngineConfig, build_config, load_config_file, prove_theorem, write_report
from .evaluation import (
    RunRecord,
    aes,
    completion_experiment,
    coverage_lines,
    jaccard_similarity,
    length_bucket,
    proof_text,
    sequence_similarity,
    success_rate,
)
from .extraction import extract_pairs, write_dataset
from .hammer import hammer_fallback
from .prover import ProverError, ToyProver, load_theory, render_theory
from .protocol import ProverServer
from .search import best_first_search


def _add_engine_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("engine")
    group.add_argument("--config", help="flat key = value config file")
    group.add_argument("--seed", type=int)
    group.add_argument("--generator", choices=("mock", "http"))
    group.add_argument("--backend", choices=("in_process", "remote"))
    group.add_argument("--endpoint", help="host:port of a remote prover server")
    group.add_argument("--k", type=int, dest="top_k", help="states expanded per iteration")
    group.add_argument("--alpha", type=float, help="length-normalisation exponent")
    group.add_argument("--candidates", type=int, help="candidate steps per state")
    group.add_argument("--max-iterations", type=int)
    group.add_argument("--time-limit", type=float, help="search time limit in seconds")
    group.add_argument("--node-budget", type=int)
    group.add_argument("--no-revision", action="store_const", const=False,
                       dest="revision_enabled")
    group.add_argument("--no-filtering", action="store_const", const=False,
                       dest="filtering_enabled")
    group.add_argument("--hammer-timeout", type=float, help="fallback seconds per state")
    group.add_argument("--hammer-states", type=int, help="fallback states to try")
    group.add_argument("--jobs", type=int, help="theorem-level parallelism")


def _engine_config(args: argparse.Namespace) -> EngineConfig:
    file_values = load_config_file(args.config) if args.config else {}
    flags = {
        "seed": args.seed,
        "generator": args.generator,
        "backend": args.backend,
        "backend_endpoint": args.endpoint,
        "top_k": args.top_k,
        "alpha": args.alpha,
        "candidates_per_state": args.candidates,
        "n_candidates": args.candidates,
        "max_iterations": args.max_iterations,
        "time_limit_s": args.time_limit,
        "node_budget": args.node_budget,
        "revision_enabled": args.revision_enabled,
        "filtering_enabled": args.filtering_enabled,
        "hammer_timeout_s": args.hammer_timeout,
        "hammer_states": args.hammer_states,
        "jobs": args.jobs,
    }
    return build_config(file_values, flags)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stepwise",
        description="Best-first proof search over a miniature interactive prover")
    sub = parser.add_subparsers(dest="command", required=True)

    p_prove = sub.add_parser("prove", help="search for proofs and write reports")
    p_prove.add_argument("--theory", required=True, help="theory file")
    p_prove.add_argument("--theorem", help="one theorem id (default: all theorems)")
    p_prove.add_argument("--out", default="reports", help="report directory")
    _add_engine_flags(p_prove)

    p_extract = sub.add_parser("extract", help="emit (state, step) training pairs")
    p_extract.add_argument("--theory", required=True)
    p_extract.add_argument("--out", required=True, help="output .jsonl path")

    p_eval = sub.add_parser("eval", help="metrics over report files")
    p_eval.add_argument("--reports", help="directory of per-theorem reports")
    p_eval.add_argument("--theory", help="theory file for ground-truth metrics")
    p_eval.add_argument("--out", help="write the JSON report here (default stdout)")
    p_eval.add_argument("--csv-dir", help="also write one CSV per table")
    p_eval.add_argument("--completion", action="store_true",
                        help="run the proof-completion experiment")
    p_eval.add_argument("--fractions", default="0.0,0.25,0.5,0.75,1.0",
                        help="ascending expert-written fractions")
    _add_engine_flags(p_eval)

    p_serve = sub.add_parser("serve", help="run the reference prover server")
    mode = p_serve.add_mutually_exclusive_group(required=True)
    mode.add_argument("--port", type=int, help="listen on TCP port")
    mode.add_argument("--stdio", action="store_true", help="serve stdin/stdout")

    p_bench = sub.add_parser("bench", help="seeded corpus + three-arm comparison")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", help="write corpus, reports, and tables here")

    return parser


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _load_theory_file(path: str) -> Theory:
    return load_theory(Path(path).read_text())


def cmd_prove(args: argparse.Namespace) -> int:
    config = _engine_config(args)
    theory = _load_theory_file(args.theory)
    if args.theorem:
        names = [args.theorem]
    else:
        names = [e.name for e in theory.entries if e.kind == "theorem"]
    if not names:
        print("no theorems to prove", file=sys.stderr)
        return 1

    shared_backend = config.make_backend() if config.backend == "in_process" else None

    def run_one(name: str):
        backend = shared_backend if shared_backend is not None else config.make_backend()
        try:
            return name, prove_theorem(theory, name, config, backend=backend), None
        except Exception as e:  # noqa: BLE001 - theorem-level errors must not kill the run
            return name, None, e

    results = []
    if config.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(run_one, names))
    else:
        results = [run_one(n) for n in names]

    failures = 0
    for name, result, error in results:
        if error is not None:
            failures += 1
            print(f"{theory.name}.{name}: ERROR {error}", file=sys.stderr)
            continue
        write_report(result.report, args.out)
        status = "PROVED" if result.proved else "FAILED"
        detail = f" via {result.via}, {len(result.steps)} steps" if result.proved else ""
        print(f"{theory.name}.{name}: {status}{detail}")
    print(f"reports written to {args.out}")
    return 1 if failures else 0


def cmd_extract(args: argparse.Namespace) -> int:
    theory = _load_theory_file(args.theory)
    result = extract_pairs(theory, ToyProver())
    count = write_dataset(result.pairs, args.out)
    print(f"wrote {count} pairs to {args.out}")
    for name, reason in result.failures:
        print(f"replay failed for {name}: {reason}", file=sys.stderr)
    return 0


def _records_from_reports(directory: str) -> list[RunRecord]:
    records = []
    for path in sorted(Path(directory).glob("*.json")):
        report = json.loads(path.read_text())
        steps = report.get("steps")
        records.append(RunRecord(
            theorem=f"{report['theory']}.{report['theorem']}",
            split=report.get("split", "all"),
            ground_truth_length=int(report.get("ground_truth_length", 0)),
            proved=bool(report.get("proved")),
            generated_proof=tuple(steps) if steps is not None else None,
            wall_time=float(report.get("stats", {}).get("wall_time", 0.0)),
            session=report.get("session", ""),
        ))
    return records


def _rows_to_csv(rows) -> str:
    lines = ["group,proved,total,rate"]
    for row in rows:
        rate = "" if row.rate is None else f"{row.rate}"
        lines.append(f"{row.group},{row.proved},{row.total},{rate}")
    return "\n".join(lines) + "\n"


def cmd_eval(args: argparse.Namespace) -> int:
    output: dict = {}
    if args.completion:
        if not args.theory:
            print("--completion requires --theory", file=sys.stderr)
            return 2
        config = _engine_config(args)
        theory = _load_theory_file(args.theory)
        fractions = [float(x) for x in args.fractions.split(",") if x.strip()]
        backend = config.make_backend()
        generator = config.make_generator()

        def prove_fn(th, entry_name, prefix):
            outcome = best_first_search(
                th, entry_name, backend, generator,
                config.search_config(), config.revision_config(th),
                prefix_steps=tuple(prefix))
            if outcome.proved:
                return True
            if config.fallback_enabled:
                return hammer_fallback(outcome, backend, config.fallback_config()) is not None
            return False

        curve, skipped = completion_experiment([theory], fractions, prove_fn)
        literal, saved = aes(curve)
        output["completion"] = {
            "points": [{"sigma": s, "rate": p} for s, p in curve.points],
            "aes_literal": literal,
            "aes_saved": saved,
            "skipped": [{"theorem": t, "reason": r} for t, r in skipped],
        }
    if args.reports:
        records = _records_from_reports(args.reports)
        by_split = success_rate(records, "split")
        by_length = success_rate(records, "length_bucket")
        by_session = success_rate(records, "session")
        lines, percent = coverage_lines(records)
        output["success_by_split"] = [row.__dict__ for row in by_split]
        output["success_by_length"] = [row.__dict__ for row in by_length]
        output["success_by_session"] = [row.__dict__ for row in by_session]
        output["coverage"] = {"lines": lines, "percent": round(percent, 1)}
        if args.theory:
            theory = _load_theory_file(args.theory)
            sims = []
            for record in records:
                if not record.proved or record.generated_proof is None:
                    continue
                name = record.theorem.split(".", 1)[-1]
                entry = theory.entry(name)
                if entry is None or not entry.proof:
                    continue
                gt = proof_text([s.text() for s in entry.proof])
                gen = proof_text(record.generated_proof)
                sims.append({
                    "theorem": record.theorem,
                    "length_bucket": length_bucket(record.ground_truth_length),
                    "sequence": round(sequence_similarity(gen, gt), 4),
                    "jaccard": round(jaccard_similarity(gen, gt), 4),
                })
            output["similarity"] = sims
        if args.csv_dir:
            csv_dir = Path(args.csv_dir)
            csv_dir.mkdir(parents=True, exist_ok=True)
            (csv_dir / "success_by_split.csv").write_text(_rows_to_csv(by_split))
            (csv_dir / "success_by_length.csv").write_text(_rows_to_csv(by_length))
            (csv_dir / "success_by_session.csv").write_text(_rows_to_csv(by_session))
    if not output:
        print("nothing to evaluate: pass --reports and/or --completion", file=sys.stderr)
        return 2
    text = json.dumps(output, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    server = ProverServer()
    if args.stdio:
        server.serve_stdio()
        return 0
    tcp = server.tcp_server(port=args.port)
    host, port = tcp.server_address[:2]
    print(f"listening on {host}:{port}", flush=True)
    try:
        with tcp:
            tcp.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    result = run_bench(args.seed)
    print(result.table_text(), end="")
    print(f"# wall time: {result.wall_time:.1f}s (not part of the table)")
    if args.out:
        out = Path(args.out)
        (out / "corpus").mkdir(parents=True, exist_ok=True)
        from .bench import generate_corpus

        for theory in generate_corpus(args.seed):
            (out / "corpus" / f"{theory.name}.thy").write_text(render_theory(theory))
        for report in result.reports:
            write_report(report, out / "reports")
        (out / "table.txt").write_text(result.table_text())
        (out / "table.csv").write_text(result.csv_text())
        print(f"bench artifacts written to {out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "prove": cmd_prove,
        "extract": cmd_extract,
        "eval": cmd_eval,
        "serve": cmd_serve,
        "bench": cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ProverError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
