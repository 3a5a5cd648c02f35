"""Command-line front end: ``kgtextgen <command> [flags]``.

Each command wraps one stage of the pipeline and writes its resolved
configuration (and that configuration's hash) into every output file.
Failures print a single JSON object on stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from . import synthetic
from .config import SELECTION_STRATEGIES, ConfigError, PipelineConfig, config_hash, resolve
from .evaluation import evaluate
from .extraction import (
    compute_priors,
    expand_query,
    extract_multihop,
    extraction_stats,
    read_concept_sets,
    read_paths_jsonl,
    select,
    write_paths_jsonl,
)
from .kg_store import Concept, KnowledgeGraph, load_dump

logger = logging.getLogger("kgtextgen")

EXIT_USAGE = 2
EXIT_FAILURE = 1


def _header(command: str, cfg: PipelineConfig) -> dict:
    return {"command": command, "config": cfg.to_dict(), "config_hash": cfg.digest()}


def _parallel_map(fn: Callable, items: Sequence, jobs: int) -> list:
    """Map preserving input order whatever the scheduling."""
    if jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _require(cfg: PipelineConfig, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(cfg, n) is None]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join(missing)}")


def _out_path(cfg: PipelineConfig) -> Path:
    _require(cfg, "out")
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _write_jsonl(path: Path, header: dict, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"kind": "header", **header}, sort_keys=True) + "\n")
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _fixture_header(header: dict) -> str:
    return f"config_hash: {header['config_hash']}\nconfig: {json.dumps(header['config'], sort_keys=True)}"


def _load_graph(cfg: PipelineConfig) -> KnowledgeGraph:
    _require(cfg, "dump")
    graph, _ = load_dump(cfg.dump, cfg.language)
    return graph


def _load_dataset(cfg: PipelineConfig):
    _require(cfg, "dataset")
    if not Path(cfg.dataset).is_file():
        raise FileNotFoundError(f"dataset not found: {cfg.dataset}")
    return read_concept_sets(cfg.dataset)


def read_expansions(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            record = json.loads(line)
            if record.get("kind") != "header":
                out[record["id"]] = [Concept(c["label"], c["pos"]) for c in record["expansions"]]
    return out


def _knowledge(cfg: PipelineConfig):
    paths = read_paths_jsonl(cfg.paths) if cfg.paths else {}
    expansions = read_expansions(cfg.expansions) if cfg.expansions else {}
    return paths, expansions


# commands


def cmd_ingest(cfg: PipelineConfig) -> dict:
    graph = _load_graph(cfg)
    out = _out_path(cfg)
    header = _header("ingest", cfg)
    with open(out, "w", encoding="utf-8") as fh:
        graph.write_fixture(fh, _fixture_header(header))
    return {"edges": len(graph), "labels": len(graph.labels()), "out": str(out)}


def cmd_extract(cfg: PipelineConfig) -> dict:
    graph = _load_graph(cfg)
    sets = _load_dataset(cfg)
    out = _out_path(cfg)
    raw = _parallel_map(lambda cs: extract_multihop(graph, cs, cfg.k_fallback), sets, cfg.jobs)
    selection = cfg.selection_config()
    priors = None
    if selection.strategy == "prior_subset":
        priors = compute_priors(p for paths in raw for p in paths)
    selected = _parallel_map(lambda pair: select(pair[0], pair[1], selection, priors), list(zip(raw, sets)), cfg.jobs)
    write_paths_jsonl(out, sets, selected, _header("extract", cfg))
    before = extraction_stats(raw, sets)
    after = extraction_stats(selected, sets)
    return {
        "samples": len(sets),
        "avg_relations_before": before.avg_relations,
        "avg_relations_after": after.avg_relations,
        "concept_coverage": after.concept_coverage,
        "out": str(out),
    }


def cmd_expand(cfg: PipelineConfig) -> dict:
    graph = _load_graph(cfg)
    sets = _load_dataset(cfg)
    out = _out_path(cfg)
    found = _parallel_map(lambda cs: expand_query(graph, cs, cfg.expansion_max), sets, cfg.jobs)
    records = (
        {"id": cs.source_id, "expansions": [{"label": c.label, "pos": c.pos} for c in concepts]}
        for cs, concepts in zip(sets, found)
    )
    _write_jsonl(out, _header("expand", cfg), records)
    return {"samples": len(sets), "avg_expansions": sum(map(len, found)) / max(len(found), 1), "out": str(out)}


def cmd_train(cfg: PipelineConfig) -> dict:
    from .model.checkpoint import save_checkpoint
    from .model.network import ModelConfig
    from .model.training import TrainConfig, train
    from .pipeline import build_vocab, make_examples

    sets = _load_dataset(cfg)
    out = _out_path(cfg)
    paths, expansions = _knowledge(cfg)
    examples = make_examples(sets, cfg.mode, paths, expansions)
    examples = [e for e in examples if e.target]
    if not examples:
        raise ConfigError("dataset has no reference sentences to train on")
    vocab = build_vocab(examples)
    model_config = ModelConfig(
        vocab_size=len(vocab),
        d_model=cfg.d_model,
        n_layers=cfg.n_layers,
        n_heads=cfg.n_heads,
        cs_encoder_hidden=cfg.cs_encoder_hidden,
        injection_layer_index=cfg.injection_layer_index,
        mask_lm_prob=cfg.mask_lm_prob,
        max_target_len=max(cfg.max_len, max(len(e.target) for e in examples)) + 1,
        seed=cfg.seed,
    )
    result = train(examples, vocab, model_config, TrainConfig(cfg.epochs, cfg.batch_size, cfg.lr, mode=cfg.mode, seed=cfg.seed))
    save_checkpoint(out, result.model, vocab, {**_header("train", cfg), "mode": cfg.mode})
    loss_csv = out.with_suffix(".losses.csv")
    result.write_loss_csv(loss_csv)
    return {"examples": len(examples), "first_loss": result.losses[0], "final_loss": result.losses[-1], "out": str(out)}


def cmd_generate(cfg: PipelineConfig) -> dict:
    from .model.checkpoint import load_checkpoint
    from .model.generate import generate
    from .pipeline import make_examples

    _require(cfg, "checkpoint")
    if not Path(cfg.checkpoint).is_file():
        raise FileNotFoundError(f"checkpoint not found: {cfg.checkpoint}")
    model, vocab, extra = load_checkpoint(cfg.checkpoint)
    trained_mode = extra.get("mode", cfg.mode)
    if trained_mode != cfg.mode:
        raise ConfigError(f"checkpoint was trained in {trained_mode!r} mode, not {cfg.mode!r}")
    sets = _load_dataset(cfg)
    out = _out_path(cfg)
    paths, expansions = _knowledge(cfg)
    examples = make_examples(sets, cfg.mode, paths, expansions, with_targets=False)
    decode = cfg.decode_config()
    if decode.max_len > model.config.max_target_len:
        logger.warning("max_len %d exceeds the model's target length %d", decode.max_len, model.config.max_target_len)
        decode = replace(decode, max_len=model.config.max_target_len)
    results = _parallel_map(lambda ex: generate(model, vocab, ex, decode, cfg.mode), examples, cfg.jobs)
    header = {**_header("generate", cfg), "checkpoint_hash": extra.get("config_hash")}
    _write_jsonl(out, header, (r.to_json() for r in results))
    return {"samples": len(results), "out": str(out)}


def read_outputs(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            record = json.loads(line)
            if record.get("kind") != "header":
                out[record["id"]] = record["sentence"]
    return out


def cmd_eval(cfg: PipelineConfig) -> dict:
    _require(cfg, "outputs")
    if not Path(cfg.outputs).is_file():
        raise FileNotFoundError(f"outputs not found: {cfg.outputs}")
    sets = _load_dataset(cfg)
    out = _out_path(cfg)
    outputs = read_outputs(cfg.outputs)
    missing = [cs.source_id for cs in sets if cs.source_id not in outputs]
    if missing:
        raise ConfigError(f"{len(missing)} samples have no output, e.g. {missing[0]!r}")
    if any(not cs.references for cs in sets):
        raise ConfigError("every dataset sample needs references for evaluation")
    report = evaluate([outputs[cs.source_id] for cs in sets], sets)
    out.write_text(report.to_json(_header("eval", cfg)) + "\n", encoding="utf-8")
    table = report.to_table(cfg.mode)
    out.with_suffix(".txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return {"samples": len(sets), "bleu_4": report.bleu_4, "out": str(out)}


def cmd_synth(cfg: PipelineConfig) -> dict:
    out = Path(cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    header = _header("synth", cfg)
    graph = synthetic.build_graph()
    with open(out / "graph.tsv", "w", encoding="utf-8") as fh:
        graph.write_fixture(fh, _fixture_header(header) + "\nsynthetic toy graph")
    corpus = synthetic.generate_corpus(cfg.seed)
    counts = {}
    for name in ("train", "test"):
        samples = synthetic.split(corpus, name)
        _write_jsonl(out / f"{name}.jsonl", header, (s.concept_set.to_json() for s in samples))
        counts[name] = len(samples)
    return {"edges": len(graph), **counts, "out": str(out)}


def verify_file(path) -> dict:
    """Check that the config embedded in an output file still matches its hash."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if first.startswith("# config_hash: "):
            stored = first.split(":", 1)[1].strip()
            second = fh.readline()
            if not second.startswith("# config: "):
                raise ConfigError(f"{path}: no embedded config")
            config = json.loads(second[len("# config: ") :])
        else:
            try:
                header = json.loads(first)
            except json.JSONDecodeError:
                # pretty-printed report: the header sits inside the whole document
                header = json.loads(first + fh.read()).get("header", {})
            if header.get("format") == "kgtextgen-checkpoint":
                header = header.get("extra", {})
            stored, config = header.get("config_hash"), header.get("config")
    if stored is None or config is None:
        raise ConfigError(f"{path}: no embedded config hash")
    actual = config_hash(config)
    if actual != stored:
        raise ConfigError(f"{path}: config hash mismatch (stored {stored}, computed {actual})")
    return {"file": str(path), "config_hash": stored, "ok": True}


COMMANDS = {
    "ingest": (cmd_ingest, "parse a ConceptNet dump and write the normalized graph"),
    "extract": (cmd_extract, "extract and select knowledge paths per sample"),
    "expand": (cmd_expand, "find query-expansion concepts per sample"),
    "train": (cmd_train, "train the seq2seq model"),
    "generate": (cmd_generate, "decode sentences with beam search and Best-N selection"),
    "eval": (cmd_eval, "score generated sentences"),
    "synth": (cmd_synth, "write the synthetic toy graph and corpus"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgtextgen", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    # every flag defaults to None so that unset flags never shadow the config file
    add = common.add_argument
    add("--config", help="YAML config file; explicit flags override it")
    add("--dump", help="ConceptNet dump or fixture graph")
    add("--dataset", help="concept sets (JSON lines or CommonGen lines)")
    add("--paths", help="extracted paths JSON lines")
    add("--expansions", help="query expansions JSON lines")
    add("--checkpoint")
    add("--outputs", help="generated sentences JSON lines")
    add("--out", help="output file (directory for synth)")
    add("--language")
    add("--mode", choices=["baseline", "concat", "inject"])
    add("--selection", choices=sorted(SELECTION_STRATEGIES))
    add("--random-p", type=float)
    add("--prior-threshold", type=float)
    add("--expansion-max", type=int)
    add("--k-fallback", type=int)
    add("--epochs", type=int)
    add("--batch-size", type=int)
    add("--lr", type=float)
    add("--d-model", type=int)
    add("--beam-width", type=int)
    add("--best-n", type=int)
    add("--max-len", type=int)
    add("--seed", type=int)
    add("--jobs", type=int)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    verify = sub.add_parser("verify", help="check the config hash embedded in an output file")
    verify.add_argument("file")
    return parser


def run(argv: Optional[Sequence[str]] = None) -> dict:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "verify":
        return verify_file(args.file)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    cfg = resolve(args.config, overrides)
    return COMMANDS[args.command][0](cfg)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        summary = run(argv)
    except SystemExit as exc:  # argparse: --help or a usage error
        if exc.code:
            print(json.dumps({"error": "UsageError", "message": "invalid command line"}), file=sys.stderr)
        return int(exc.code or 0)
    except (ConfigError, FileNotFoundError) as exc:
        _fail(exc)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - reported as JSON
        _fail(exc)
        return EXIT_FAILURE
    print(json.dumps(summary, sort_keys=True))
    return 0


def _fail(exc: BaseException) -> None:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
