"""Command-line interface: ``xlign <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
An optional ``--config FILE`` (INI ``key = value`` lines, optionally under a
``[xlign]`` or ``[<subcommand>]`` section) supplies defaults; flags win.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

from .align import LinearMap, RcslsConfig, RefineConfig, load_map, save_map
from .embeddings import load_vec, read_dictionary, save_dictionary, save_vec
from .errors import DataError, NumericalError, XlignError
from .normalize import NormalizationMethod, normalize
from .pipeline import (
    ALIGN_METHODS,
    PipelineConfig,
    PipelineStageError,
    emit_table,
    fit_map,
    load_records,
    run_experiment,
    run_pipeline,
    run_record,
)
from .retrieval import (
    evaluate_p1,
    format_neighborhoods,
    load_similarity_dataset,
    nearest_words,
    parse_criterion,
    spearman_wordsim,
    translate_topk,
)
from .synthetic import SyntheticSpec, generate_synthetic, nonisomorphic_spec

logger = logging.getLogger("xlign")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v)


def _pair(text: str) -> tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("expected LOW,HIGH")
    return vals


def _emit_json(obj, path=None):
    text = json.dumps(obj, indent=2, ensure_ascii=False, default=float)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


# --------------------------------------------------------------------------
# subcommands


def cmd_normalize(args):
    space = load_vec(args.input, args.max_vocab)
    out, report = normalize(
        space, NormalizationMethod(args.method, args.rounds, args.tolerance), args.perturb_zeros, args.seed
    )
    save_vec(out, args.output)
    if args.report:
        _emit_json(report.to_dict(), args.report)
    last = report.final
    if last is not None:
        logger.info(
            "%s: %d rounds, length residual %.3g, mean residual %.3g",
            args.method, report.rounds_run, last.max_length_residual, last.mean_norm_residual,
        )


def _refine_cfg(args) -> RefineConfig:
    return RefineConfig(steps=args.refine_steps, synthetic_pool=args.refine_pool, knn=args.knn)


def _rcsls_cfg(args) -> RcslsConfig:
    return RcslsConfig(
        learning_rates=args.rcsls_lr_grid,
        epoch_candidates=args.rcsls_epoch_grid,
        knn=args.knn,
        neighbor_pool=args.neighbor_pool,
        batch_size=args.batch_size,
        seed=args.seed,
    )


def cmd_align(args):
    src = load_vec(args.src, args.max_vocab)
    tgt = load_vec(args.tgt, args.max_vocab)
    train, _, skipped = read_dictionary(args.train_dict, src, tgt)
    logger.info("train dictionary: %d pairs, %d skipped", len(train), skipped)
    valid = read_dictionary(args.valid_dict, src, tgt)[1] if args.valid_dict else None
    W, details = fit_map(src, tgt, train, args.method, _refine_cfg(args), _rcsls_cfg(args), valid)
    save_map(W, args.out)
    if details:
        logger.info("%s", json.dumps(details, default=float))


def _read_words(args):
    if args.stdin:
        return [w for line in sys.stdin for w in line.split()]
    return list(args.words)


def cmd_translate(args):
    W = load_map(args.map)
    src = load_vec(args.src, args.max_vocab)
    tgt = load_vec(args.tgt, args.max_vocab)
    words = _read_words(args)
    known = [w for w in words if w in src]
    for w in words:
        if w not in src:
            print(f"{w}\t<oov>")
    ranked = translate_topk(
        W, src, tgt, [src.index[w] for w in known], parse_criterion(args.criterion, args.knn), args.topk
    )
    for w, hits in zip(known, ranked):
        print(w + "\t" + " ".join(f"{tgt.vocab[j]}:{s:.4f}" for j, s in hits))


def cmd_evaluate(args):
    W = load_map(args.map)
    src = load_vec(args.src, args.max_vocab)
    tgt = load_vec(args.tgt, args.max_vocab)
    _, test, skipped = read_dictionary(args.test_dict, src, tgt)
    report = evaluate_p1(W, src, tgt, test, parse_criterion(args.criterion, args.knn))
    data = report.to_dict()
    data["skipped_dictionary_lines"] = skipped
    _emit_json(data, args.out)
    if args.out:
        print(f"P@1 = {100 * report.accuracy:.1f} ({report.correct}/{report.total_queries})")


def cmd_simsuite(args):
    space = load_vec(args.space, args.max_vocab)
    after = None
    if args.iternorm:
        after, _ = normalize(space, NormalizationMethod("iternorm", args.iternorm))
    results = {}
    for path in args.dataset:
        with open(path, encoding="utf-8") as fh:
            ds = load_similarity_dataset(fh, Path(path).stem)
        rho, covered = spearman_wordsim(space, ds)
        entry = {"rho": rho, "covered": covered, "total": len(ds.pairs)}
        if after is not None:
            entry["rho_after_iternorm"] = spearman_wordsim(after, ds)[0]
        results[ds.name] = entry
    _emit_json(results)


def cmd_neighbors(args):
    space = load_vec(args.space, args.max_vocab)
    if args.iternorm:
        after, _ = normalize(space, NormalizationMethod("iternorm", args.iternorm))
        left, right = nearest_words(space, args.word, args.k), nearest_words(after, args.word, args.k)
        titles = (f"{args.word} (before)", f"{args.word} (after IterNorm)")
    elif args.other_space:
        other = load_vec(args.other_space, args.max_vocab)
        other_word = args.other_word or args.word
        left, right = nearest_words(space, args.word, args.k), nearest_words(other, other_word, args.k)
        titles = (args.word, other_word)
    else:
        left, right, titles = nearest_words(space, args.word, args.k), [], (args.word, "")
    if args.json:
        _emit_json({titles[0]: left, **({titles[1]: right} if right else {})})
    else:
        print(format_neighborhoods(titles[0], left, titles[1], right).rstrip())


def _synth_spec(args, seed=None) -> SyntheticSpec:
    seed = args.seed if seed is None else seed
    if args.preset == "nonisomorphic":
        return nonisomorphic_spec(seed)
    return SyntheticSpec(
        n=args.n, d=args.d, noise_sigma=args.noise, signal_norm=args.signal_norm,
        mean_offset=args.mean_offset, length_scale=args.length_scale,
        target_stretch=args.target_stretch, n_train=args.n_train, n_test=args.n_test, seed=seed,
    )


def cmd_synth(args):
    world = generate_synthetic(_synth_spec(args))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_vec(world.src, out / "src.vec")
    save_vec(world.tgt, out / "tgt.vec")
    save_dictionary(world.train, world.src, world.tgt, out / "train.txt")
    save_dictionary(world.test.to_seed(), world.src, world.tgt, out / "test.txt")
    save_map(LinearMap(world.rotation, orthogonal=True), out / "rotation.map")
    print(f"wrote synthetic world to {out}")


def cmd_run(args):
    cfg = PipelineConfig(
        src_path=args.src, tgt_path=args.tgt, train_dict_path=args.train_dict,
        test_dict_path=args.test_dict, valid_dict_path=args.valid_dict, out_dir=args.out_dir,
        normalization=NormalizationMethod(args.normalization, args.rounds, args.tolerance),
        alignment=args.method, refine=_refine_cfg(args), rcsls=_rcsls_cfg(args),
        criterion=args.criterion, knn=args.knn, seed=args.seed, max_vocab=args.max_vocab,
        perturb_zeros=args.perturb_zeros, tag=args.tag,
    )
    result = run_pipeline(cfg)
    print(f"P@1 = {100 * result.evaluation.accuracy:.1f} -> {cfg.out_dir}")


def cmd_grid(args):
    records = []
    base = dict(
        refine=_refine_cfg(args), rcsls=_rcsls_cfg(args), criterion=args.criterion, knn=args.knn,
        seed=args.seed, max_vocab=args.max_vocab, perturb_zeros=args.perturb_zeros,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for method in args.methods:
        for norm in args.normalizations:
            nm = NormalizationMethod(norm, args.rounds, args.tolerance)
            if args.synthetic_seeds:
                for seed in args.synthetic_seeds:
                    world = generate_synthetic(_synth_spec(args, seed))
                    cfg = PipelineConfig(
                        normalization=nm, alignment=method, tag=f"seed{seed}",
                        out_dir=str(out), **{**base, "seed": seed},
                    )
                    result = run_experiment(
                        world.src, world.tgt, world.train, world.test, nm, method, cfg.criterion,
                        cfg.knn, cfg.refine, cfg.rcsls, None, cfg.perturb_zeros, seed,
                    )
                    records.append(run_record(cfg, result))
            else:
                cfg = PipelineConfig(
                    src_path=args.src, tgt_path=args.tgt, train_dict_path=args.train_dict,
                    test_dict_path=args.test_dict, valid_dict_path=args.valid_dict,
                    out_dir=str(out / f"{method}-{norm}"), normalization=nm, alignment=method,
                    tag=args.tag, **base,
                )
                result = run_pipeline(cfg)
                records.append(run_record(cfg, result))
            logger.info("%s / %s done", method, norm)
    for rec in records:
        rec.pop("timestamp", None)
    _emit_json(records, out / "records.json")
    text, table_csv = emit_table(records, average=args.synthetic_seeds is not None)
    (out / "table.csv").write_text(table_csv, encoding="utf-8")
    print(text, end="")


def cmd_report(args):
    text, table_csv = emit_table(load_records(args.records), average=args.average)
    if args.csv:
        Path(args.csv).write_text(table_csv, encoding="utf-8")
    print(table_csv if args.format == "csv" else text, end="")


FASTTEXT_URL = "https://dl.fbaipublicfiles.com/fasttext/vectors-wiki/wiki.{lang}.vec"
MUSE_URL = "https://dl.fbaipublicfiles.com/arrival/dictionaries/{src}-{tgt}.{part}.txt"


def cmd_fetch_instructions(args):
    d = args.data_dir
    langs = sorted({args.source, *args.targets})
    print(f"# Download commands (not executed). Files land in {d}/")
    print(f"mkdir -p {d}")
    for lang in langs:
        print(f"curl -L -o {d}/wiki.{lang}.vec {FASTTEXT_URL.format(lang=lang)}")
    for tgt in args.targets:
        for part in ("0-5000", "5000-6500"):
            url = MUSE_URL.format(src=args.source, tgt=tgt, part=part)
            print(f"curl -L -o {d}/{args.source}-{tgt}.{part}.txt {url}")
    print("# Word similarity: place WS-353 as 'word word score' lines in " f"{d}/ws353.txt")
    print("# Vectors are several GB each; truncate at load time with --max-vocab 200000.")


# --------------------------------------------------------------------------
# parser


def _add_common(p, vocab=True):
    if vocab:
        p.add_argument("--max-vocab", type=int, default=None, help="keep only the N most frequent words")


def _add_align_opts(p):
    p.add_argument("--refine-steps", type=int, default=5)
    p.add_argument("--refine-pool", type=int, default=10_000)
    p.add_argument("--rcsls-lr-grid", type=_floats, default=(1.0, 10.0, 25.0, 50.0))
    p.add_argument("--rcsls-epoch-grid", type=_ints, default=(10, 20))
    p.add_argument("--neighbor-pool", type=int, default=50_000)
    p.add_argument("--batch-size", type=int, default=512)
    p.add_argument("--knn", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--valid-dict", default=None)


def _add_norm_opts(p, choice=True):
    if choice:
        p.add_argument("--normalization", choices=("none", "cl", "iternorm"), default="iternorm")
    p.add_argument("--rounds", type=int, default=5)
    p.add_argument("--tolerance", type=float, default=0.0)
    p.add_argument("--perturb-zeros", action="store_true")


def _add_synth_opts(p):
    p.add_argument("--preset", choices=("nonisomorphic",), default=None)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--d", type=int, default=50)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--signal-norm", type=float, default=1.0)
    p.add_argument("--mean-offset", type=float, default=0.0)
    p.add_argument("--length-scale", type=_pair, default=None)
    p.add_argument("--target-stretch", type=_pair, default=None)
    p.add_argument("--n-train", type=int, default=500)
    p.add_argument("--n-test", type=int, default=500)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="xlign", description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=None, help="INI file of default option values")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("normalize", help="normalize a .vec file")
    p.add_argument("--method", choices=("none", "cl", "iternorm"), default="iternorm")
    _add_norm_opts(p, choice=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None, help="write the NormalizationReport JSON here")
    _add_common(p)
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("align", help="fit a cross-lingual map")
    p.add_argument("--method", choices=ALIGN_METHODS, default="procrustes")
    p.add_argument("--train-dict", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--out", required=True)
    _add_align_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("translate", help="translate words with a fitted map")
    p.add_argument("--map", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--criterion", choices=("nn", "csls"), default="csls")
    p.add_argument("--knn", type=int, default=10)
    p.add_argument("--topk", type=int, default=1)
    p.add_argument("--stdin", action="store_true", help="read words from standard input")
    _add_common(p)
    p.add_argument("words", nargs="*")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("evaluate", help="P@1 on a test dictionary (JSON report)")
    p.add_argument("--map", required=True)
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--test-dict", required=True)
    p.add_argument("--criterion", choices=("nn", "csls"), default="csls")
    p.add_argument("--knn", type=int, default=10)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simsuite", help="Spearman correlation on word similarity datasets")
    p.add_argument("--space", required=True)
    p.add_argument("--dataset", required=True, action="append")
    p.add_argument("--iternorm", type=int, default=0, metavar="ROUNDS", help="also score after IterNorm")
    _add_common(p)
    p.set_defaults(func=cmd_simsuite)

    p = sub.add_parser("neighbors", help="nearest neighbors of a word")
    p.add_argument("--space", required=True)
    p.add_argument("--word", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--iternorm", type=int, default=0, metavar="ROUNDS", help="compare before/after IterNorm")
    p.add_argument("--other-space", default=None)
    p.add_argument("--other-word", default=None)
    p.add_argument("--json", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_neighbors)

    p = sub.add_parser("synth", help="write a synthetic bilingual world")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_synth_opts(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="one normalize -> align -> evaluate pipeline run")
    for name in ("--src", "--tgt", "--train-dict", "--test-dict"):
        p.add_argument(name, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--method", choices=ALIGN_METHODS, default="procrustes")
    p.add_argument("--criterion", choices=("nn", "csls"), default="csls")
    p.add_argument("--tag", default="run")
    _add_norm_opts(p)
    _add_align_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grid", help="methods x normalizations grid with a results table")
    p.add_argument("--src")
    p.add_argument("--tgt")
    p.add_argument("--train-dict")
    p.add_argument("--test-dict")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--methods", type=lambda s: s.split(","), default=list(ALIGN_METHODS))
    p.add_argument("--normalizations", type=lambda s: s.split(","), default=["none", "cl", "iternorm"])
    p.add_argument("--criterion", choices=("nn", "csls"), default="csls")
    p.add_argument("--tag", default="run")
    p.add_argument("--synthetic-seeds", type=_ints, default=None, help="run on synthetic worlds instead")
    _add_synth_opts(p)
    _add_norm_opts(p, choice=False)
    _add_align_opts(p)
    _add_common(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("report", help="tabulate run records")
    p.add_argument("records", nargs="+")
    p.add_argument("--csv", default=None)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--average", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fetch-instructions", help="print dataset download commands")
    p.add_argument("--data-dir", default="data")
    p.add_argument("--source", default="en")
    p.add_argument("--targets", type=lambda s: s.split(","), default=["ja", "es"])
    p.set_defaults(func=cmd_fetch_instructions)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> None:
    """Load ``--config`` values as parser defaults so explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return
    text = Path(known.config).read_text(encoding="utf-8")
    cp = configparser.ConfigParser()
    cp.read_string(text if text.lstrip().startswith("[") else "[xlign]\n" + text)
    command = next((a for a in rest if not a.startswith("-")), None)
    values = {}
    for section in ("xlign", command):
        if section and cp.has_section(section):
            values.update({k.replace("-", "_"): v for k, v in cp.items(section)})
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, sp in subparsers.choices.items():
        if name != command:
            continue
        converted = {}
        for action in sp._actions:
            if action.dest in values:
                raw = values[action.dest]
                if isinstance(action, argparse._StoreTrueAction):
                    converted[action.dest] = raw.lower() in ("1", "true", "yes", "on")
                elif action.type is not None:
                    converted[action.dest] = action.type(raw)
                else:
                    converted[action.dest] = raw
                action.required = False
        sp.set_defaults(**converted)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (OSError, configparser.Error, ValueError) as exc:
        print(f"xlign: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except PipelineStageError as exc:
        print(f"xlign: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if isinstance(exc.cause, (NumericalError, ArithmeticError)) else EXIT_DATA
    except NumericalError as exc:
        print(f"xlign: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, XlignError, OSError, KeyError) as exc:
        print(f"xlign: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"xlign: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
