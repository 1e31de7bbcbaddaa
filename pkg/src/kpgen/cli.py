"""Command-line pipeline: build-index, train, predict, evaluate, tune-alpha, stats.

Every option may also be given in a YAML file passed with ``--config``;
keys are the option names with dashes replaced by underscores (``beam_size``,
``k_refs``, ...). Command-line flags override the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import torch
import yaml

from .corpus import Phrase, read_corpus
from .embedding import load_vectors
from .estimator import KeyphraseGenerator
from .evaluation import ALPHA_GRID, dataset_stats, evaluate
from .phraseness import PhrasenessModel
from .retriever import PhraseBank, build_phrase_bank, update_phrase_bank

logger = logging.getLogger("kpgen")


class CommandError(Exception):
    pass


def _add_paths(p, *names):
    helps = {
        "corpus": "JSON Lines corpus ({id, title, abstract, keyphrases?, tags?})",
        "vectors": "word-vector text file",
        "bank": "phrase bank JSON Lines file",
        "checkpoint": "model checkpoint file",
        "output": "output file",
    }
    for n in names:
        p.add_argument(f"--{n}", help=helps[n])


def _add_retrieval(p):
    p.add_argument("--k-refs", type=int, default=15, help="references per document")
    p.add_argument("--tau", type=float, default=0.7, help="retrieval score threshold")
    p.add_argument("--no-references", dest="use_references", action="store_false", default=True)


def _add_decode(p):
    p.add_argument("--lambda", dest="lam", type=float, default=0.75, help="phraseness exponent")
    p.add_argument("--beta", type=float, default=5 / 6, help="weight for absent phrases found in the bank")
    p.add_argument("--alpha", type=float, default=0.0, help="length penalty")
    p.add_argument("--beam-size", type=int, default=100)
    p.add_argument("--beam-depth", type=int, default=6)
    p.add_argument("--top-n", type=int, default=10, help="keyphrases kept per present/absent list")
    p.add_argument("--epsilon", type=float, default=1e-4, help="informativeness floor")
    p.add_argument("--no-adjustment", dest="use_adjustment", action="store_false", default=True)
    p.add_argument("--no-pos", dest="use_pos", action="store_false", default=True)
    p.add_argument("--jobs", type=int, default=1, help="documents decoded in parallel")


def _add_model(p):
    p.add_argument("--enc-layers", type=int, default=3)
    p.add_argument("--dec-layers", type=int, default=3)
    p.add_argument("--d-model", type=int, default=256)
    p.add_argument("--heads", type=int, default=8)
    p.add_argument("--pos-emb-dim", type=int, default=64)
    p.add_argument("--enc-vocab", type=int, default=40000)
    p.add_argument("--dec-vocab", type=int, default=40000)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--max-src-len", type=int, default=400)
    p.add_argument("--mask-prob", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--lr-decay", type=float, default=0.9)
    p.add_argument("--decay-every", type=int, default=3)
    p.add_argument("--clip-norm", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--beam-depth", type=int, default=6, help="maximum phrase length")
    p.add_argument("--no-pos", dest="use_pos", action="store_false", default=True)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file of option defaults")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="kpgen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", parents=[common], help="build or update the phrase bank")
    _add_paths(p, "corpus", "vectors", "bank")
    p.add_argument("--min-df", type=int, default=5, help="documents a phrase needs to be retrievable")
    p.add_argument("--update", action="store_true", help="fold --corpus into the existing --bank")

    p = sub.add_parser("train", parents=[common], help="train the phraseness model")
    _add_paths(p, "corpus", "vectors", "bank", "checkpoint")
    _add_retrieval(p)
    _add_model(p)

    p = sub.add_parser("predict", parents=[common], help="generate keyphrases")
    _add_paths(p, "corpus", "vectors", "bank", "checkpoint", "output")
    _add_retrieval(p)
    _add_decode(p)

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against gold keyphrases")
    _add_paths(p, "corpus", "output")
    p.add_argument("--predictions", help="predictions JSON Lines file")
    p.add_argument("--per-document", action="store_true")

    p = sub.add_parser("tune-alpha", parents=[common], help="select the length penalty on validation data")
    _add_paths(p, "corpus", "vectors", "bank", "checkpoint", "output")
    _add_retrieval(p)
    _add_decode(p)
    p.add_argument("--grid", type=float, nargs="+", default=list(ALPHA_GRID))

    p = sub.add_parser("stats", parents=[common], help="dataset statistics")
    _add_paths(p, "corpus", "output")
    p.add_argument("--training-corpus", help="corpus for the overlap statistic")
    parser.set_defaults(_subparsers=sub.choices)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise CommandError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            values = yaml.safe_load(fh) or {}
        if not isinstance(values, dict):
            raise CommandError(f"{path}: expected a mapping of option names to values")
        aliases = {"lambda": "lam"}
        values = {aliases.get(k.replace("-", "_"), k.replace("-", "_")): v for k, v in values.items()}
        unknown = sorted(set(values) - (set(vars(args)) - {"command", "config", "_subparsers"}))
        if unknown:
            raise CommandError(f"{path}: unknown option(s) for {args.command}: {', '.join(unknown)}")
        # re-parse so that explicit flags win over the file
        args._subparsers[args.command].set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def _require(args, *names, exists: bool = True):
    for n in names:
        value = getattr(args, n)
        if value is None:
            raise CommandError(f"--{n.replace('_', '-')} is required for {args.command}")
        if exists and not Path(value).exists():
            raise CommandError(f"--{n.replace('_', '-')}: {value} does not exist")


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _generator(args) -> KeyphraseGenerator:
    embeddings = load_vectors(args.vectors)
    bank = PhraseBank.load(args.bank)
    decode = {}
    for name, param in (("lam", "lam"), ("beta", "beta"), ("alpha", "alpha"), ("beam_size", "beam_size"),
                        ("beam_depth", "beam_depth"), ("top_n", "top_n"), ("epsilon", "epsilon"),
                        ("use_adjustment", "use_adjustment"), ("use_pos", "use_pos"), ("jobs", "n_jobs")):
        if hasattr(args, name):
            decode[param] = getattr(args, name)
    model = PhrasenessModel.load(args.checkpoint)
    # POS embeddings of a model trained without them are untrained noise
    decode["use_pos"] = decode["use_pos"] and model.config.use_pos
    return KeyphraseGenerator.from_artifacts(
        model, bank, embeddings, k_refs=args.k_refs, tau=args.tau,
        use_references=args.use_references, random_state=args.seed, **decode,
    )


def cmd_build_index(args):
    _require(args, "corpus", "vectors")
    _require(args, "bank", exists=args.update)
    embeddings = load_vectors(args.vectors)
    docs = read_corpus(args.corpus)
    if args.update:
        bank = update_phrase_bank(PhraseBank.load(args.bank), docs, embeddings)
    else:
        bank = build_phrase_bank(docs, embeddings, args.min_df)
    bank.save(args.bank)
    logger.info("bank: %d phrases (%d retrievable)", len(bank), len(bank.retrievable_keys()))


def cmd_train(args):
    _require(args, "corpus", "vectors", "bank")
    _require(args, "checkpoint", exists=False)
    torch.manual_seed(args.seed)
    docs = read_corpus(args.corpus)
    est = KeyphraseGenerator(
        embeddings=load_vectors(args.vectors),
        bank=PhraseBank.load(args.bank),
        k_refs=args.k_refs, tau=args.tau,
        enc_layers=args.enc_layers, dec_layers=args.dec_layers, d_model=args.d_model, heads=args.heads,
        pos_emb_dim=args.pos_emb_dim, enc_vocab=args.enc_vocab, dec_vocab=args.dec_vocab,
        dropout=args.dropout, max_src_len=args.max_src_len, mask_prob=args.mask_prob,
        epochs=args.epochs, lr=args.lr, lr_decay=args.lr_decay, decay_every=args.decay_every,
        clip_norm=args.clip_norm, batch_size=args.batch_size, beam_depth=args.beam_depth,
        use_references=args.use_references, use_pos=args.use_pos, random_state=args.seed,
    )
    est.fit(docs)
    est.model_.save(args.checkpoint)
    logger.info("epoch losses: %s", ", ".join(f"{x:.4f}" for x in est.train_result_.epoch_losses))


def cmd_predict(args):
    _require(args, "corpus", "vectors", "bank", "checkpoint")
    est = _generator(args)
    docs = read_corpus(args.corpus)
    lines = [json.dumps(p.to_json()) for p in est.predict(docs)]
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def read_predictions(path) -> dict[str, tuple[list[Phrase], list[Phrase]]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                out[str(row["id"])] = (
                    [Phrase.from_text(k["phrase"]) for k in row.get("present", [])],
                    [Phrase.from_text(k["phrase"]) for k in row.get("absent", [])],
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CommandError(f"{path}:{lineno}: malformed prediction row ({exc})") from exc
    return out


def cmd_evaluate(args):
    _require(args, "corpus", "predictions")
    report = evaluate(read_corpus(args.corpus), read_predictions(args.predictions))
    print(report.to_table())
    if args.output:
        _write_json(report.to_json(args.per_document), args.output)


def cmd_tune_alpha(args):
    _require(args, "corpus", "vectors", "bank", "checkpoint")
    est = _generator(args)
    best, table = est.tune_alpha(read_corpus(args.corpus), args.grid)
    print(f"best alpha: {best:g}")
    for a, metrics in table.items():
        print(f"  alpha={a:+.2f}  " + "  ".join(f"{m * 100:6.2f}" for m in metrics))
    if args.output:
        _write_json({"alpha": best, "grid": {str(a): list(m) for a, m in table.items()}}, args.output)


def cmd_stats(args):
    _require(args, "corpus")
    training = None
    if args.training_corpus:
        _require(args, "training_corpus")
        training = read_corpus(args.training_corpus)
    _write_json(dataset_stats(read_corpus(args.corpus), training), args.output)


COMMANDS = {
    "build-index": cmd_build_index,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "tune-alpha": cmd_tune_alpha,
    "stats": cmd_stats,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except CommandError as exc:
        print(f"kpgen: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        COMMANDS[args.command](args)
    except (CommandError, ValueError, OSError) as exc:
        print(f"kpgen: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
