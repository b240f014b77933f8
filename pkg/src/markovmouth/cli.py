"""Command-line entry point: train / sample / rank / eval / oracle-check.

Every run writes its outputs atomically (temp file + rename) and drops a
sidecar ``<out>.run.json`` with the fully-resolved configuration and seed,
so any artifact can be regenerated byte-for-byte.

Exit codes: 0 ok, 2 config error, 3 runtime error, 4 acceptance-check
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import evalkit, fixtures, lexicon, mrf, oracle, samplers, scorers, training
from .lexicon import Corpus, Vocabulary

log = logging.getLogger("markovmouth")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_ACCEPTANCE = 4


class ConfigError(ValueError):
    pass


def atomic_write(path: str, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_sidecar(out_path: str, config: dict) -> None:
    atomic_write(out_path + ".run.json", json.dumps(config, indent=2, sort_keys=True) + "\n")


def load_scorer(spec: str, vocab: Vocabulary, timeout: float = 30.0):
    """Scorer from a spec string.

    zero | tabular:<checkpoint> | loglinear:<checkpoint> |
    external:cmd:<command> | external:tcp:<host>:<port>
    """
    if spec == "zero":
        return scorers.zero_scorer(vocab)
    kind, _, rest = spec.partition(":")
    if kind in ("tabular", "loglinear"):
        scorer = scorers.load_checkpoint(rest, vocab)
        want = {"tabular": scorers.TabularScorer, "loglinear": scorers.LogLinearScorer}[kind]
        if not isinstance(scorer, want):
            raise ConfigError(f"checkpoint {rest} is not a {kind} scorer")
        return scorer
    if kind == "external":
        return scorers.ExternalScorer(rest, vocab, timeout=timeout)
    if kind == "fixture":
        _, scorer, _ = fixtures.load_fixture(rest)
        return scorer
    raise ConfigError(f"unrecognized scorer spec {spec!r}")


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """Resolve flag values: explicit flag > --config file > built-in default."""
    file_values = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as f:
            file_values = json.load(f)
    resolved = {}
    for key, default in defaults.items():
        explicit = getattr(args, key, None)
        if explicit is not None:
            resolved[key] = explicit
        elif key in file_values:
            resolved[key] = file_values[key]
        else:
            resolved[key] = default
    return resolved


def _require_files(problems: list, **paths) -> None:
    for label, path in paths.items():
        if path is not None and not os.path.exists(path):
            problems.append(f"{label} file not found: {path}")


# ---------------------------------------------------------------- train

TRAIN_DEFAULTS = {
    "window": 3, "epochs": 10, "lr": 0.1, "batch_size": 32, "seed": 0,
    "mode": "exact_pll", "K": 1, "mask_rate": 0.15, "l2": 0.0,
    "min_count": 1, "casing": "none",
}


def cmd_train(args) -> int:
    cfg = _merge_config(args, TRAIN_DEFAULTS)
    problems = []
    _require_files(problems, corpus=args.corpus)
    if args.vocab and not args.build_vocab:
        _require_files(problems, vocab=args.vocab)
    if not args.out:
        problems.append("--out is required")
    if problems:
        raise ConfigError("; ".join(problems))

    if args.build_vocab:
        with open(args.corpus, "r", encoding="utf-8") as f:
            lines = [ln for ln in f.read().split("\n") if ln.strip()]
        vocab = lexicon.build_vocabulary(lines, min_count=cfg["min_count"], casing=cfg["casing"])
        if args.vocab:
            atomic_write(args.vocab, vocab.to_json() + "\n")
    else:
        vocab = Vocabulary.load(args.vocab)
    corpus = lexicon.load_corpus(args.corpus, vocab)
    scorer = scorers.LogLinearScorer(vocab, window=cfg["window"])
    train_config = training.TrainConfig(
        learning_rate=cfg["lr"], epochs=cfg["epochs"], batch_size=cfg["batch_size"],
        seed=cfg["seed"], mode=cfg["mode"], K=cfg["K"], mask_rate=cfg["mask_rate"],
        l2=cfg["l2"],
    )
    train_config.validate()
    result = training.train_pll(scorer, corpus, train_config)
    atomic_write(args.out, json.dumps(scorer.to_checkpoint()) + "\n")
    if args.trace:
        atomic_write(args.trace, result.trace_jsonl())
    write_sidecar(args.out, {"command": "train", **cfg,
                             "corpus": args.corpus, "out": args.out})
    log.info("final PLL %.6f", result.trace[-1])
    print(f"trained {cfg['epochs']} epochs; PLL {result.trace[0]:.6f} -> {result.trace[-1]:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------- sample

SAMPLE_DEFAULTS = {
    "scheme": "gibbs", "length": 40, "count": 1000, "top_k": 100,
    "burn_in": 500, "thinning": 10, "chains": 1, "iterations": 10,
    "passes": 1, "init": "all_mask", "seed": 0, "threads": 1,
}


def cmd_sample(args) -> int:
    cfg = _merge_config(args, SAMPLE_DEFAULTS)
    problems = []
    _require_files(problems, vocab=args.vocab, init_corpus=args.init_corpus)
    if not args.out:
        problems.append("--out is required")
    if not args.scorer:
        problems.append("--scorer is required")
    if problems:
        raise ConfigError("; ".join(problems))

    vocab = Vocabulary.load(args.vocab)
    scorer = load_scorer(args.scorer, vocab)
    top_k = None if cfg["top_k"] in (0, "none", None) else int(cfg["top_k"])
    if top_k is not None and top_k > vocab.size:
        log.info("clamping top_k %d to vocabulary size %d", top_k, vocab.size)
        top_k = vocab.size
    init_corpus = (
        lexicon.load_corpus(args.init_corpus, vocab) if args.init_corpus else None
    )
    T = cfg["length"]
    count = cfg["count"]
    records = []

    if cfg["scheme"] == "gibbs":
        chains = cfg["chains"]
        per_chain = [count // chains + (1 if c < count % chains else 0) for c in range(chains)]

        def run_chain(c):
            sub = samplers.SamplerConfig(
                scheme="gibbs",
                iterations=cfg["burn_in"] + cfg["thinning"] * per_chain[c],
                burn_in=cfg["burn_in"], thinning=cfg["thinning"],
                top_k=top_k, chains=1, init=cfg["init"], seed=cfg["seed"],
            )
            rng = samplers.chain_rng(cfg["seed"], c)
            state = samplers.ChainState(
                current=samplers.init_sequence(cfg["init"], T, vocab, rng, init_corpus),
                iteration=0, rng=rng,
            )
            out = []
            for i in range(1, sub.iterations + 1):
                samplers.gibbs_step(scorer, state, sub)
                if i > sub.burn_in and (i - sub.burn_in) % sub.thinning == 0:
                    out.append(samplers.Sample(chain=c, iteration=i, ids=state.current))
            return out

        if cfg["threads"] > 1:
            with ThreadPoolExecutor(max_workers=cfg["threads"]) as pool:
                chunks = list(pool.map(run_chain, range(chains)))
        else:
            chunks = [run_chain(c) for c in range(chains)]
        withheld = 0
        for chunk in chunks:
            for s in chunk:
                if vocab.mask_id in s.ids:
                    withheld += 1
                else:
                    records.append(s)
    elif cfg["scheme"] == "sequential":
        withheld = 0
        for n in range(count):
            sub = samplers.SamplerConfig(
                scheme="sequential", top_k=top_k, passes=cfg["passes"],
                init=cfg["init"], seed=cfg["seed"],
            )
            rng = samplers.chain_rng(cfg["seed"], n)
            ids = samplers.sequential_sample(scorer, sub, T, rng=rng, corpus=init_corpus)
            records.append(samplers.Sample(chain=n, iteration=cfg["passes"] * T, ids=ids))
    elif cfg["scheme"] == "parallel":
        withheld = 0
        for n in range(count):
            sub = samplers.SamplerConfig(
                scheme="parallel", top_k=top_k, iterations=cfg["iterations"],
                init=cfg["init"], seed=cfg["seed"],
            )
            rng = samplers.chain_rng(cfg["seed"], n)
            ids = samplers.run_parallel(scorer, sub, T, rng=rng, corpus=init_corpus)
            if vocab.mask_id in ids:
                withheld += 1
            else:
                records.append(samplers.Sample(chain=n, iteration=cfg["iterations"], ids=ids))
    else:
        raise ConfigError(f"unknown scheme {cfg['scheme']!r}")

    records.sort(key=lambda s: (s.chain, s.iteration))
    lines = []
    for s in records:
        lines.append(json.dumps({
            "chain": s.chain,
            "iter": s.iteration,
            "tokens": [vocab.token_of(i) for i in s.ids],
            "unnorm_logp": mrf.unnormalized_log_joint(scorer, s.ids),
        }))
    atomic_write(args.out, "\n".join(lines) + ("\n" if lines else ""))
    write_sidecar(args.out, {"command": "sample", **cfg, "scorer": args.scorer,
                             "vocab": args.vocab, "out": args.out,
                             "withheld": withheld, "emitted": len(records)})
    print(f"emitted {len(records)} generations ({withheld} withheld) -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- rank

def cmd_rank(args) -> int:
    problems = []
    _require_files(problems, vocab=args.vocab, input=args.input)
    if not args.scorer:
        problems.append("--scorer is required")
    if not args.out:
        problems.append("--out is required")
    if problems:
        raise ConfigError("; ".join(problems))
    vocab = Vocabulary.load(args.vocab)
    scorer = load_scorer(args.scorer, vocab)
    corpus = lexicon.load_corpus(args.input, vocab)
    ranked = mrf.rank_sentences(scorer, list(corpus))
    lines = [
        json.dumps({"rank": i + 1,
                    "tokens": [vocab.token_of(x) for x in seq],
                    "unnorm_logp": score})
        for i, (seq, score) in enumerate(ranked)
    ]
    atomic_write(args.out, "\n".join(lines) + "\n")
    write_sidecar(args.out, {"command": "rank", "scorer": args.scorer,
                             "input": args.input, "out": args.out})
    print(f"ranked {len(ranked)} sentences -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- eval

def _read_token_lists(path: str):
    with open(path, "r", encoding="utf-8") as f:
        raw = [ln for ln in f.read().split("\n") if ln.strip()]
    if not raw:
        raise ConfigError(f"{path} holds no sentences")
    if raw[0].lstrip().startswith("{"):
        return [json.loads(ln)["tokens"] for ln in raw]
    return [ln.split() for ln in raw]


def cmd_eval(args) -> int:
    problems = []
    _require_files(problems, generations=args.generations)
    refs = {}
    for item in args.reference or []:
        name, _, path = item.partition("=")
        if not path:
            problems.append(f"--reference wants name=path, got {item!r}")
            continue
        if not os.path.exists(path):
            problems.append(f"reference file not found: {path}")
        refs[name] = path
    if not args.out:
        problems.append("--out is required")
    if problems:
        raise ConfigError("; ".join(problems))

    generations = _read_token_lists(args.generations)
    references = {name: _read_token_lists(path) for name, path in refs.items()}
    perplexity = None
    if args.ppl_endpoint:
        from .wire import WireClient
        client = WireClient(args.ppl_endpoint)
        client.hello()
        rows = [client.ar_logprob(g) for g in generations]
        client.close()
        perplexity = evalkit.passthrough_perplexity(rows)
    report = evalkit.build_report(generations, references, perplexity=perplexity)
    atomic_write(args.out, report.to_json() + "\n")
    if args.csv:
        header, row = report.to_csv_row()
        atomic_write(args.csv, ",".join(header) + "\n" + ",".join(row) + "\n")
    write_sidecar(args.out, {"command": "eval", "generations": args.generations,
                             "references": refs, "out": args.out})
    print(f"self-BLEU {report.self_bleu:.2f}; report -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- oracle-check

def cmd_oracle_check(args) -> int:
    try:
        kind, scorer, default_T = fixtures.load_fixture(args.fixture)
    except KeyError as exc:
        raise ConfigError(str(exc))
    T = args.length or default_T
    vocab = scorer.vocab
    top_k = None if args.top_k in (None, 0) else args.top_k
    steps = args.steps or 200_000
    burn_in = args.burn_in if args.burn_in is not None else 500
    seed = args.seed if args.seed is not None else 0

    kernel = oracle.gibbs_transition_matrix(
        oracle.scorer_conditional_fn(scorer, top_k=top_k), T, vocab)
    stationary = oracle.stationary_distribution(kernel)
    joint = oracle.enumerate_joint(scorer, T, vocab)

    config = samplers.SamplerConfig(
        scheme="gibbs", iterations=burn_in + steps, burn_in=burn_in,
        thinning=1, top_k=top_k, chains=1, init="random_tokens", seed=seed,
    )
    samples, _ = samplers.run_gibbs(scorer, config, T)
    empirical = oracle.empirical_distribution([s.ids for s in samples], joint.states)

    tv_emp = oracle.total_variation(empirical, stationary)
    tv_joint = oracle.total_variation(stationary, joint)
    print(f"fixture={args.fixture} kind={kind} T={T} steps={steps}")
    print(f"TV(empirical, stationary) = {tv_emp:.6f}")
    print(f"TV(stationary, joint)     = {tv_joint:.6f}")
    return EXIT_OK if tv_emp <= 0.02 else EXIT_ACCEPTANCE


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="markovmouth")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; explicit flags win")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", help="fit a log-linear scorer by pseudo-likelihood SGD")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab")
    p.add_argument("--build-vocab", action="store_true",
                   help="build the vocabulary from the corpus (writes --vocab if given)")
    p.add_argument("--min-count", dest="min_count", type=int, default=None)
    p.add_argument("--casing", choices=["lower", "none"], default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--mode", choices=["exact_pll", "stochastic_pll", "multi_mask"], default=None)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--mask-rate", dest="mask_rate", type=float, default=None)
    p.add_argument("--l2", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("sample", help="generate sequences")
    common(p)
    p.add_argument("--scorer", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--scheme", choices=["gibbs", "sequential", "parallel"], default=None)
    p.add_argument("--length", type=int, default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--top-k", dest="top_k", type=int, default=None,
                   help="0 disables truncation")
    p.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p.add_argument("--thinning", type=int, default=None)
    p.add_argument("--chains", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None,
                   help="parallel-scheme steps per sample")
    p.add_argument("--passes", type=int, default=None)
    p.add_argument("--init", choices=["all_mask", "random_tokens", "from_corpus"], default=None)
    p.add_argument("--init-corpus", dest="init_corpus")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("rank", help="sort sentences by unnormalized log-probability")
    common(p)
    p.add_argument("--scorer", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_rank)

    p = sub.add_parser("eval", help="quality/diversity report for a generations file")
    common(p)
    p.add_argument("--generations", required=True)
    p.add_argument("--reference", action="append", metavar="NAME=PATH")
    p.add_argument("--ppl-endpoint", dest="ppl_endpoint",
                   help="wire endpoint for pass-through perplexity scoring")
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("oracle-check", help="compare a Gibbs run against exact oracles")
    common(p)
    p.add_argument("--fixture", required=True)
    p.add_argument("--length", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p.add_argument("--top-k", dest="top_k", type=int, default=None)
    p.set_defaults(fn=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("MARKOVMOUTH_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except training.TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ConfigError, lexicon.LexiconError, training.TrainingError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
