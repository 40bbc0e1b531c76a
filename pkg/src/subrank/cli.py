"""Command-line entry point: convert, rank, evaluate, attribute, ablate.

Exit codes are a stable contract: 0 full success, 1 partial (some instances
failed but the run produced output), 2 usage or input error. Instance-level
parallelism never changes output bytes: results are merged in input order.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor

from . import attribution, data, metrics, scorer
from .backend import L2_NORM, VOCAB_PROB
from .encoder import ReferenceEncoder
from .errors import SubrankError
from .ranker import default_encoder_config
from .tokenizer import build_vocabulary, load_vocabulary
from .synthetic import corpus_vocabulary

SCHEME_FLAGS = {
    "target": attribution.TARGET_ONLY,
    "one": attribution.UNIFORM_ONE,
    "attn": attribution.ATTENTION,
    "ig": attribution.INTEGRATED_GRADIENTS,
}
IG_MODE_FLAGS = {"prob": VOCAB_PROB, "l2": L2_NORM}
POOL_FLAGS = {"lemma": data.POOL_LEMMA, "lemma-pos": data.POOL_LEMMA_POS}

_CONFIG_FIELDS = (
    "backend", "seed", "vocab", "weights", "scheme", "include_target",
    "layers", "ig_steps", "ig_mode", "pool", "jobs",
)


class UsageError(SubrankError):
    pass


def _parse_span(text: str) -> tuple[int, int]:
    try:
        start_text, end_text = text.split(":")
        start, end = int(start_text), int(end_text)
    except ValueError:
        raise UsageError(f"expected START:END, got {text!r}") from None
    return start, end


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill still-unset options from the JSON config file, then apply
    hard defaults. Flags always win over the file."""
    file_values = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            file_values = json.load(fh)
        unknown = set(file_values) - set(_CONFIG_FIELDS)
        if unknown:
            raise UsageError(f"unknown config-file fields: {sorted(unknown)}")
    defaults = {
        "backend": "reference",
        "seed": 42,
        "vocab": None,
        "weights": None,
        "scheme": "attn",
        "include_target": True,
        "layers": None,
        "ig_steps": 32,
        "ig_mode": "prob",
        "pool": None,
        "jobs": 1,
    }
    for field, fallback in defaults.items():
        if getattr(args, field, None) is None:
            setattr(args, field, file_values.get(field, fallback))
    return args


def _check_distinct_paths(*paths) -> None:
    real = [p for p in paths if p]
    if len(set(real)) != len(real):
        raise UsageError(f"input, output and report paths must be distinct: {real}")


def _resolve_stack(args: argparse.Namespace, instances=None, extra_words=()):
    """Vocabulary + backend for a run.

    The vocabulary comes from --vocab when given, otherwise it is built
    deterministically from the corpus (or sentence) words. The reference
    backend is seeded from --seed, or loaded verbatim from --weights.
    """
    if args.backend != "reference":
        raise UsageError(
            f"unknown backend {args.backend!r}; external adapters live out of tree"
        )
    if args.vocab:
        vocab = load_vocabulary(args.vocab)
    elif instances is not None:
        vocab = corpus_vocabulary(instances)
    else:
        vocab = build_vocabulary(sorted(extra_words))
    if args.weights:
        encoder = ReferenceEncoder.load_weights(args.weights)
        if encoder.config.vocab_size != len(vocab):
            raise UsageError(
                f"weight file expects vocabulary of {encoder.config.vocab_size} pieces, "
                f"got {len(vocab)}"
            )
    else:
        encoder = ReferenceEncoder(default_encoder_config(len(vocab), seed=args.seed))
    return vocab, encoder


def _layer_range_for(args: argparse.Namespace, encoder) -> attribution.LayerRange:
    if args.layers:
        start, end = _parse_span(args.layers) if isinstance(args.layers, str) else args.layers
        layer_range = attribution.LayerRange(start, end)
        layer_range.check_against(encoder.n_layers)
        return layer_range
    return attribution.default_layer_range(encoder.n_layers)


def _rank_corpus(instances, encoder, vocab, scheme, include_target, layer_range, ig_config, jobs):
    """Rank every instance; returns (results-in-input-order, failures)."""

    def worker(instance):
        return scorer.rank_candidates(
            instance, encoder, vocab, scheme,
            include_target=include_target, layer_range=layer_range, ig_config=ig_config,
        )

    results, failures = [], []
    if jobs <= 1:
        outcomes = []
        for instance in instances:
            try:
                outcomes.append(worker(instance))
            except SubrankError as exc:
                outcomes.append(exc)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(worker, instance) for instance in instances]
            outcomes = []
            for future in futures:
                try:
                    outcomes.append(future.result())
                except SubrankError as exc:
                    outcomes.append(exc)
    for instance, outcome in zip(instances, outcomes):
        if isinstance(outcome, SubrankError):
            failures.append((instance.id, str(outcome)))
        else:
            results.append(outcome)
    return results, failures


# -- subcommands -----------------------------------------------------------


def cmd_convert(args: argparse.Namespace) -> int:
    inputs = args.inputs
    _check_distinct_paths(*inputs, args.out)
    if args.kind == "ls07":
        if len(inputs) != 2:
            raise UsageError("convert ls07 needs two inputs: contexts XML and gold file")
        instances, counts = data.convert_ls07(inputs[0], inputs[1])
    else:
        if len(inputs) != 1:
            raise UsageError("convert swords needs one input file")
        instances, counts = data.convert_swords(inputs[0])
    if args.pool:
        instances, pool_counts = data.pool_candidates(instances, POOL_FLAGS[args.pool])
        counts.update({f"pool_{k}": v for k, v in pool_counts.items()})
    data.write_canonical(instances, args.out)
    for name, value in counts.items():
        print(f"{name}: {value}")
    return 0


def cmd_rank(args: argparse.Namespace) -> int:
    _check_distinct_paths(args.inputs[0], args.out)
    instances = data.load_canonical(args.inputs[0])
    if args.pool:
        instances, _ = data.pool_candidates(instances, POOL_FLAGS[args.pool])
    vocab, encoder = _resolve_stack(args, instances=instances)
    layer_range = _layer_range_for(args, encoder)
    ig_config = attribution.IgConfig(steps=args.ig_steps, mode=IG_MODE_FLAGS[args.ig_mode])
    results, failures = _rank_corpus(
        instances, encoder, vocab, SCHEME_FLAGS[args.scheme],
        args.include_target, layer_range, ig_config, args.jobs,
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        for result in results:
            fh.write(json.dumps(result.to_json_dict(), ensure_ascii=False) + "\n")
    for instance_id, message in failures:
        print(f"failed {instance_id}: {message}", file=sys.stderr)
    print(f"ranked {len(results)} instances, {len(failures)} failed")
    if not results:
        return 2
    return 1 if failures else 0


def _read_rankings(path) -> dict[str, list[str]]:
    rankings: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            if "id" not in record or "ranked" not in record:
                raise UsageError(f"{path}:{line_no}: rankings line needs 'id' and 'ranked'")
            rankings[record["id"]] = [entry["candidate"] for entry in record["ranked"]]
    return rankings


def cmd_evaluate(args: argparse.Namespace) -> int:
    if len(args.inputs) != 2:
        raise UsageError("evaluate needs two inputs: rankings file and canonical gold file")
    rankings_path, gold_path = args.inputs
    _check_distinct_paths(rankings_path, gold_path, args.report)
    rankings = _read_rankings(rankings_path)
    gold_sets = {inst.id: inst.gold_mapping() for inst in data.load_canonical(gold_path)}
    unranked = sorted(set(gold_sets) - set(rankings))
    if unranked:
        raise UsageError(f"gold instances without rankings: {unranked}")
    report = metrics.evaluate_rankings(rankings, gold_sets)
    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    print(f"mean GAP: {report.mean_percent()}")
    print(
        f"instances: {report.n_instances}, skipped: {report.n_skipped}, "
        f"multiword excluded: {report.n_excluded_gold_multiword} gold / "
        f"{report.n_excluded_candidate_multiword} candidates"
    )
    return 0


def cmd_attribute(args: argparse.Namespace) -> int:
    span = _parse_span(args.span)
    vocab, encoder = _resolve_stack(args, extra_words=set(args.sentence.split()))
    sent = scorer.prepare_sentence(vocab, args.sentence, span[0], span[1])
    output = encoder.encode(sent.token_ids)
    layer_range = _layer_range_for(args, encoder)
    ig_config = attribution.IgConfig(steps=args.ig_steps, mode=IG_MODE_FLAGS[args.ig_mode])
    scheme = SCHEME_FLAGS[args.scheme]
    raw = attribution.raw_influence_scores(
        encoder, sent, output, scheme, layer_range=layer_range, ig_config=ig_config
    )
    weights = attribution.normalize(raw, scheme, args.include_target)

    lines = []
    raw_known = scheme in attribution.SOFTMAX_SCHEMES
    for position, raw_score, weight in zip(raw.positions, raw.scores, weights.weights):
        lines.append({
            "token": vocab.piece(sent.token_ids[position]),
            "position": position,
            "raw_score": float(raw_score) if raw_known else None,
            "weight": float(weight),
            "scheme": scheme,
            "target": False,
        })
    a, b = sent.target_span
    for position in range(a, b):
        lines.append({
            "token": vocab.piece(sent.token_ids[position]),
            "position": position,
            "raw_score": None,
            "weight": weights.target_weight,
            "scheme": scheme,
            "target": True,
        })
    lines.sort(key=lambda item: item["position"])
    out_fh = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for line in lines:
            out_fh.write(json.dumps(line, ensure_ascii=False) + "\n")
    finally:
        if args.out:
            out_fh.close()
    return 0


ABLATION_GRID = (
    ("target", True),
    ("one", True),
    ("attn", True),
    ("attn", False),
    ("ig", True),
    ("ig", False),
)


def cmd_ablate(args: argparse.Namespace) -> int:
    _check_distinct_paths(args.inputs[0], args.report)
    instances = data.load_canonical(args.inputs[0])
    if args.pool:
        instances, _ = data.pool_candidates(instances, POOL_FLAGS[args.pool])
    vocab, encoder = _resolve_stack(args, instances=instances)
    layer_range = _layer_range_for(args, encoder)
    ig_config = attribution.IgConfig(steps=args.ig_steps, mode=IG_MODE_FLAGS[args.ig_mode])
    gold_sets = {inst.id: inst.gold_mapping() for inst in instances}

    rows = []
    any_failures = False
    for scheme_flag, include_target in ABLATION_GRID:
        results, failures = _rank_corpus(
            instances, encoder, vocab, SCHEME_FLAGS[scheme_flag],
            include_target, layer_range, ig_config, args.jobs,
        )
        any_failures = any_failures or bool(failures)
        rankings = {r.instance_id: list(r.candidates) for r in results}
        report = metrics.evaluate_rankings(rankings, gold_sets)
        rows.append({
            "scheme": SCHEME_FLAGS[scheme_flag],
            "include_target": include_target,
            "mean_gap": report.mean_gap,
            "n_instances": report.n_instances,
            "n_skipped": report.n_skipped,
            "n_failed": len(failures),
        })

    with open(args.report, "w", encoding="utf-8") as fh:
        json.dump({"rows": rows}, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    header = f"{'scheme':<22} {'target':<8} {'mean GAP':>8}"
    print(header)
    print("-" * len(header))
    for row in rows:
        flag = "with" if row["include_target"] else "without"
        print(f"{row['scheme']:<22} {flag:<8} {row['mean_gap'] * 100.0:>8.1f}")
    return 1 if any_failures else 0


# -- parser ------------------------------------------------------------------


def _add_shared_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON file with the same fields; flags override it")
    sub.add_argument("--backend", help="backend id (default: reference)")
    sub.add_argument("--seed", type=int, help="reference-encoder seed (default: 42)")
    sub.add_argument("--vocab", help="vocabulary file, one piece per line")
    sub.add_argument("--weights", help="reference-encoder weight dump to load")
    sub.add_argument("--scheme", choices=sorted(SCHEME_FLAGS), help="weighting scheme (default: attn)")
    sub.add_argument(
        "--include-target", action=argparse.BooleanOptionalAction, default=None,
        dest="include_target", help="include the target-position similarity (default: yes)",
    )
    sub.add_argument("--layers", help="layer range START:END, 1-based inclusive")
    sub.add_argument("--ig-steps", type=int, dest="ig_steps", help="path-integral steps (default: 32)")
    sub.add_argument("--ig-mode", choices=sorted(IG_MODE_FLAGS), dest="ig_mode",
                     help="gradient target: vocabulary probability or hidden norm (default: prob)")
    sub.add_argument("--pool", choices=sorted(POOL_FLAGS), help="re-pool candidates from gold")
    sub.add_argument("--jobs", type=int, help="instance-level parallelism (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subrank",
        description="Rank lexical-substitution candidates and evaluate rankings with GAP.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    convert = commands.add_parser("convert", help="convert a benchmark release to canonical JSONL")
    convert.add_argument("kind", choices=("ls07", "swords"))
    convert.add_argument("--in", dest="inputs", nargs="+", required=True,
                         help="ls07: contexts XML + gold file; swords: one JSON file")
    convert.add_argument("--out", required=True)
    convert.add_argument("--pool", choices=sorted(POOL_FLAGS))
    convert.set_defaults(func=cmd_convert)

    rank = commands.add_parser("rank", help="rank candidates for every instance")
    rank.add_argument("--in", dest="inputs", nargs=1, required=True, help="canonical JSONL")
    rank.add_argument("--out", required=True, help="rankings JSONL")
    _add_shared_options(rank)
    rank.set_defaults(func=cmd_rank)

    evaluate = commands.add_parser("evaluate", help="score rankings against gold with GAP")
    evaluate.add_argument("--in", dest="inputs", nargs=2, required=True,
                          help="rankings JSONL + canonical gold JSONL")
    evaluate.add_argument("--report", required=True, help="JSON report path")
    evaluate.set_defaults(func=cmd_evaluate)

    attribute = commands.add_parser("attribute", help="dump per-token weights for one sentence")
    attribute.add_argument("--sentence", required=True)
    attribute.add_argument("--span", required=True, help="target char span START:END")
    attribute.add_argument("--out", help="output JSONL (default: stdout)")
    _add_shared_options(attribute)
    attribute.set_defaults(func=cmd_attribute)

    ablate = commands.add_parser(
        "ablate", help="run all weighting schemes plus both target variants and tabulate GAP"
    )
    ablate.add_argument("--in", dest="inputs", nargs=1, required=True, help="canonical JSONL")
    ablate.add_argument("--report", required=True, help="combined JSON report path")
    _add_shared_options(ablate)
    ablate.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args)
        return args.func(args)
    except (SubrankError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
