"""Batch command line: ingest, train, query, recall, consolidate, export.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
All randomness comes from ``--seed`` (falling back to ``$ENGRAM_SEED``,
then 0).
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import consolidation, query_engine as qe
from .errors import (
    CheckpointError,
    ParseError,
    PatternError,
    SignedModeError,
    TrainingDivergedError,
    UnknownSymbolError,
    VocabularyTooLargeError,
)
from .memory_model import EpisodicModel, ModelConfig, SemanticModel
from .perception import Encoder, perceive, read_sensory
from .persistence import ingest, load_checkpoint, save_checkpoint
from .trainer import TrainConfig, fit

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

_SLOTS = {"s": "subject", "subject": "subject", "p": "predicate", "predicate": "predicate",
          "o": "object", "object": "object", "t": "time", "time": "time"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _beta(text):
    if text == qe.LINEAR:
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"beta must be a number or 'linear', got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError("beta must be >= 0")
    return value


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ENGRAM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"ENGRAM_SEED must be an integer, got {env!r}")


class _Out:
    def __init__(self, fmt, stream):
        self.fmt = fmt
        self.stream = stream

    def row(self, **fields):
        if self.fmt == "json":
            self.stream.write(json.dumps(fields, sort_keys=True) + "\n")
        else:
            self.stream.write("\t".join(_fmt(v) for v in fields.values()) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def _triple_names(model, ids):
    s, p, o = ids
    return model.entities.name(s), model.predicates.name(p), model.entities.name(o)


# -- subcommands ----------------------------------------------------------


def cmd_ingest(args, out):
    store = ingest(args.facts)
    out.row(
        entities=len(store.entities),
        predicates=len(store.predicates),
        times=len(store.times),
        triples=len(store.triples),
        quadruples=len(store.quadruples),
    )


def cmd_train(args, out):
    store = ingest(args.facts)
    seed = _seed(args)
    kind = args.kind
    if kind == "auto":
        kind = "episodic" if store.quadruples else "semantic"
    if kind == "episodic" and not store.quadruples:
        raise ParseError(f"{args.facts}: episodic training needs 4-column facts")
    config = ModelConfig(rank=args.rank, nonnegative=args.nonnegative, beta_default=args.beta_default, seed=seed)
    model = EpisodicModel(config) if kind == "episodic" else SemanticModel(config)
    train = TrainConfig(
        epochs=args.epochs, learning_rate=args.lr, negatives=args.negatives, l2=args.l2,
        seed=seed, nonnegative=args.nonnegative, batch_size=args.batch_size or None,
        corrupt=_corrupt_slots(args.corrupt), max_corrupt=args.max_corrupt,
    )
    report = fit(model, store, train)
    save_checkpoint(model, args.out)
    if args.report:
        Path(args.report).write_text(report.jsonl(), encoding="utf-8")
    out.row(kind=kind, epochs=len(report.losses), final_loss=float(report.final_loss), checkpoint=str(args.out))


def _corrupt_slots(text):
    if not text:
        return None
    slots = []
    for key in text.split(","):
        if key not in _SLOTS:
            raise UsageError(f"unknown slot {key!r} in --corrupt")
        slots.append(_SLOTS[key])
    return tuple(slots)


def _parse_pattern(model, args):
    specs = {}

    def put(key, spec):
        slot = _SLOTS.get(key)
        if slot is None or slot not in model.slots:
            raise PatternError(f"unknown slot {key!r} for a {len(model.slots)}-slot model")
        if slot in specs:
            raise PatternError(f"slot {slot} given twice")
        specs[slot] = spec

    for item in args.fix or []:
        key, sep, name = item.partition("=")
        if not sep:
            raise PatternError(f"--fix expects slot=name, got {item!r}")
        slot = _SLOTS.get(key, key)
        table = model.table(slot) if slot in model.slots else None
        if table is None:
            raise PatternError(f"unknown slot {key!r}")
        put(key, qe.Fixed(table.id(name)))
    for item in args.clamp or []:
        key, sep, values = item.partition("=")
        if not sep:
            raise PatternError(f"--clamp expects slot=v1,v2,..., got {item!r}")
        put(key, qe.Clamped(np.array([float(x) for x in values.split(",")])))
    for key in args.marginalize or []:
        put(key, qe.MARGINALIZED)
    put(args.free, qe.FREE)
    missing = [s for s in model.slots if s not in specs]
    if missing:
        raise PatternError(f"slots {missing} are unspecified; set each with --fix/--clamp/--marginalize")
    return qe.SlotPattern(**specs)


def cmd_query(args, out):
    model = load_checkpoint(args.model)
    pattern = _parse_pattern(model, args)
    slot = _SLOTS[args.free]
    table = model.table(slot)
    if args.sample:
        for i in qe.sample(model, pattern, args.beta, args.sample, _seed(args)):
            out.row(name=table.name(i))
        return
    result = qe.conditional_distribution(model, pattern, args.beta)
    for i, prob in result.top(args.top):
        out.row(name=table.name(i), probability=prob, score=float(result.scores[i]))


def cmd_recall(args, out):
    model = _episodic(args.model)
    t = model.times.id(args.time)
    if args.sample:
        for ids in qe.sample_recall(model, t, args.beta, args.sample, _seed(args)):
            s, p, o = _triple_names(model, ids)
            out.row(subject=s, predicate=p, object=o)
        return
    for ids, prob in qe.recall(model, t, args.beta, args.top):
        s, p, o = _triple_names(model, ids)
        out.row(subject=s, predicate=p, object=o, probability=prob)


def cmd_profile(args, out):
    model = load_checkpoint(args.model)
    if not isinstance(model, SemanticModel):
        raise CheckpointError("profile needs a semantic model checkpoint")
    i = model.entities.id(args.entity)
    for (p, o), prob in qe.entity_profile(model, i, args.beta, args.top):
        out.row(predicate=model.predicates.name(p), object=model.entities.name(o), probability=prob)


def cmd_associate(args, out):
    model = load_checkpoint(args.model)
    table = model.table({"entity": "subject", "predicate": "predicate", "time": "time"}[args.kind])
    i = table.id(args.name)
    for j, sim in qe.associate(table, i, min(args.k, len(table) - 1)):
        out.row(name=table.name(j), similarity=sim)


def _episodic(path):
    model = load_checkpoint(path)
    if not isinstance(model, EpisodicModel):
        raise CheckpointError(f"{path}: expected an episodic model checkpoint")
    return model


def cmd_perceive(args, out):
    model = _episodic(args.model)
    if args.encoder == "identity":
        enc = Encoder.identity(model.rank, nonnegative=model.nonnegative)
    else:
        enc = Encoder.from_dict(json.loads(Path(args.encoder).read_text(encoding="utf-8")))
    for n, u in enumerate(read_sensory(args.input)):
        engram, decoded = perceive(enc, model, u, args.memorable, args.beta, args.top)
        label = engram.label if engram else ""
        for ids, prob in decoded:
            s, p, o = _triple_names(model, ids)
            out.row(input=n, engram=label, subject=s, predicate=p, object=o, probability=prob)
    if args.memorable:
        save_checkpoint(model, args.out or args.model)


def cmd_consolidate(args, out):
    episodic = _episodic(args.model)
    times = None
    if args.times:
        times = [episodic.times.id(name) for name in args.times.split(",")]
    if args.mode == "marginalize":
        semantic = consolidation.marginalize_time(episodic, times, normalize=args.normalize)
        save_checkpoint(semantic, args.out)
        out.row(mode="marginalize", times=len(times) if times else len(episodic.times), checkpoint=args.out)
    elif args.mode == "replay":
        seed = _seed(args)
        schedule = times if times is not None else list(range(len(episodic.times)))
        semantic = consolidation.semantic_like(episodic, seed)
        train = TrainConfig(epochs=args.epochs, learning_rate=args.lr, seed=seed,
                            nonnegative=episodic.nonnegative)
        report = consolidation.replay_teach(
            episodic, semantic, schedule, args.samples_per_time, args.beta, train, seed=seed
        )
        save_checkpoint(semantic, args.out)
        out.row(mode="replay", final_loss=float(report.final_loss), checkpoint=args.out)
    else:
        if not args.target:
            raise UsageError("consolidate --mode copy needs --target")
        target = _episodic(args.target)
        count = consolidation.copy_engrams(episodic, target)
        save_checkpoint(target, args.out)
        out.row(mode="copy", copied=count, checkpoint=args.out)


def cmd_distill(args, out):
    model = load_checkpoint(args.model)
    kg_path = Path(args.kg)
    store = (
        consolidation.KnowledgeGraphStore.from_tsv(kg_path.read_text(encoding="utf-8"))
        if kg_path.exists() else consolidation.KnowledgeGraphStore()
    )
    time = None
    if isinstance(model, EpisodicModel):
        if not args.time:
            raise UsageError("distilling an episodic model needs --time")
        time = model.times.id(args.time)
    added = consolidation.distill_explicit(model, store, args.threshold, time=time)
    kg_path.write_text(store.to_tsv(), encoding="utf-8")
    for s, p, o, c in added:
        out.row(subject=s, predicate=p, object=o, confidence=c)


def cmd_export_kg(args, out):
    store = consolidation.KnowledgeGraphStore.from_tsv(Path(args.kg).read_text(encoding="utf-8"))
    for s, p, o, c in store:
        out.row(subject=s, predicate=p, object=o, confidence=c)


# -- parser ---------------------------------------------------------------


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (default: $ENGRAM_SEED or 0)")
    common.add_argument("--format", choices=("tsv", "json"), default="tsv")

    parser = _Parser(prog="tensormemory", description="Tensor memory engine")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="parse a fact file and report counts")
    p.add_argument("--facts", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common], help="fit a model to a fact file")
    p.add_argument("--facts", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rank", type=int, default=8)
    p.add_argument("--kind", choices=("auto", "episodic", "semantic"), default="auto")
    p.add_argument("--nonnegative", action="store_true")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=8, help="0 for full batch")
    p.add_argument("--corrupt", help="comma-separated slots to corrupt (default: all)")
    p.add_argument("--max-corrupt", type=int, default=1, help="slots replaced per negative, at most")
    p.add_argument("--beta-default", type=float, default=5.0)
    p.add_argument("--report", help="write per-epoch JSON lines here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("query", parents=[common], help="distribution over one free slot")
    p.add_argument("--model", required=True)
    p.add_argument("--fix", action="append", metavar="SLOT=NAME")
    p.add_argument("--clamp", action="append", metavar="SLOT=V1,V2,...")
    p.add_argument("--marginalize", action="append", metavar="SLOT")
    p.add_argument("--free", required=True, metavar="SLOT")
    p.add_argument("--beta", type=_beta, default=None)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--sample", type=int, default=0, help="draw this many samples instead of ranking")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("recall", parents=[common], help="triples of a past episode")
    p.add_argument("--model", required=True)
    p.add_argument("--time", required=True)
    p.add_argument("--beta", type=_beta, default=None)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--sample", type=int, default=0)
    p.set_defaults(func=cmd_recall)

    p = sub.add_parser("profile", parents=[common], help="what is known about an entity")
    p.add_argument("--model", required=True)
    p.add_argument("--entity", required=True)
    p.add_argument("--beta", type=_beta, default=None)
    p.add_argument("--top", type=int, default=10)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("associate", parents=[common], help="most similar symbols by cosine")
    p.add_argument("--model", required=True)
    p.add_argument("--name", "--entity", dest="name", required=True)
    p.add_argument("--kind", choices=("entity", "predicate", "time"), default="entity")
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=cmd_associate)

    p = sub.add_parser("perceive", parents=[common], help="encode sensory vectors and decode them")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="one comma-separated vector per line")
    p.add_argument("--encoder", default="identity", help="'identity' or an encoder JSON file")
    p.add_argument("--memorable", action="store_true")
    p.add_argument("--out", help="checkpoint for the model with new engrams (default: --model)")
    p.add_argument("--beta", type=_beta, default=None)
    p.add_argument("--top", type=int, default=5)
    p.set_defaults(func=cmd_perceive)

    p = sub.add_parser("consolidate", parents=[common], help="derive semantic memory from episodic memory")
    p.add_argument("--model", required=True)
    p.add_argument("--mode", choices=("marginalize", "replay", "copy"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--times", help="comma-separated time labels (default: all)")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--target", help="episodic checkpoint receiving copied engrams")
    p.add_argument("--samples-per-time", type=int, default=20)
    p.add_argument("--beta", type=_beta, default=None)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.05)
    p.set_defaults(func=cmd_consolidate)

    p = sub.add_parser("distill", parents=[common], help="store high-confidence triples in a KG file")
    p.add_argument("--model", required=True)
    p.add_argument("--kg", required=True)
    p.add_argument("--time")
    p.add_argument("--threshold", type=float, default=0.9)
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("export-kg", parents=[common], help="print a KG store")
    p.add_argument("--kg", required=True)
    p.set_defaults(func=cmd_export_kg)
    return parser


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        args.func(args, _Out(args.format, stdout))
    except UsageError as exc:
        stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except PatternError as exc:
        stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (TrainingDivergedError, FloatingPointError) as exc:
        stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except (ParseError, CheckpointError, UnknownSymbolError, SignedModeError,
            VocabularyTooLargeError, OSError, ValueError) as exc:
        stderr.write(f"data error: {exc}\n")
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
