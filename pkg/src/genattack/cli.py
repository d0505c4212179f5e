"""Command-line entry point.

Exit codes: 0 success, 1 campaign error, 2 resource or parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import nullcontext
from pathlib import Path

from .corpus import load_dataset
from .errors import CampaignError, ContractViolation, ParseError, TrainError, VictimUnavailable
from .genetic import AttackConfig
from .harness import CampaignConfig, adv_train_cycle, run_campaign, write_report
from .language_model import train_ngram
from .victim import TrainConfig, train_builtin

log = logging.getLogger("genattack")


def _train_flags(p):
    defaults = TrainConfig()
    p.add_argument("--epochs", type=int, default=defaults.epochs)
    p.add_argument("--lr", type=float, default=defaults.lr)
    p.add_argument("--l2", type=float, default=defaults.l2)


def _resource_flags(p, victim_required=True):
    p.add_argument("--task", choices=["sentiment", "entailment"], required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--embedding-dim", type=int, default=300)
    lm = p.add_mutually_exclusive_group(required=True)
    lm.add_argument("--lm", help="saved n-gram model")
    lm.add_argument("--lm-corpus", help="train an order-3 model on this text instead")
    p.add_argument("--victim", required=victim_required, help="builtin:PATH or http:URL")
    p.add_argument("--kind", choices=["genetic", "greedy"], default="genetic")
    p.add_argument("--samples", type=int)
    p.add_argument("--pop-size", type=int, default=60)
    p.add_argument("--generations", type=int, default=20)
    p.add_argument("--neighbors", type=int, default=8)
    p.add_argument("--top-k", type=int, default=4)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--max-change", type=float, help="default 0.2 sentiment, 0.25 entailment")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stopwords", help="one token per line; defaults to the bundled list")
    p.add_argument("--timeout", type=float, default=30.0, help="remote victim timeout (s)")
    p.add_argument("--retries", type=int, default=2, help="remote victim retries")
    p.add_argument("--workers", type=int, default=1, help="examples attacked in parallel")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genattack", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-victim", help="train the built-in bag-of-words victim")
    p.add_argument("--task", choices=["sentiment", "entailment"], required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--validation", help="held-out TSV to report accuracy on")
    _train_flags(p)

    p = sub.add_parser("train-lm", help="train an n-gram language model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--smoothing", type=float, default=0.1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("attack", help="run an attack campaign and write a JSON report")
    _resource_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("adv-train", help="adversarial training cycle on the built-in victim")
    _resource_flags(p, victim_required=False)
    p.add_argument("--test-dataset", help="held-out split; default is a 20%% split of --dataset")
    p.add_argument("--eval-samples", type=int, default=100)
    _train_flags(p)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("make-toy", help="write a synthetic desk-scale world")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--entailment", type=int, default=0, help="also write this many entailment examples")
    return parser


def campaign_config(args) -> CampaignConfig:
    attack = AttackConfig.for_task(
        args.task,
        pop_size=args.pop_size,
        max_generations=args.generations,
        neighbors=args.neighbors,
        top_k=args.top_k,
        delta=args.delta,
        seed=args.seed,
        **({"max_change_fraction": args.max_change} if args.max_change is not None else {}),
    )
    return CampaignConfig(
        task=args.task,
        kind=args.kind,
        sample_size=args.samples,
        attack=attack,
        seed=args.seed,
        dataset=args.dataset,
        embeddings=args.embeddings,
        embedding_dim=args.embedding_dim,
        lm=args.lm,
        lm_corpus=args.lm_corpus,
        victim=args.victim,
        stopwords=args.stopwords,
        timeout=args.timeout,
        retries=args.retries,
    )


def _executor(workers):
    return ThreadPoolExecutor(workers) if workers > 1 else nullcontext()


def cmd_train_victim(args):
    examples = load_dataset(args.dataset, args.task)
    config = TrainConfig(epochs=args.epochs, lr=args.lr, l2=args.l2, seed=args.seed)
    victim = train_builtin(examples, config)
    print(f"training accuracy {victim.accuracy(examples):.4f}")
    if args.validation:
        print(f"held-out accuracy {victim.accuracy(load_dataset(args.validation, args.task)):.4f}")
    victim.save(args.out)


def cmd_train_lm(args):
    model = train_ngram(args.corpus, args.order, args.smoothing)
    model.save(args.out)
    print(f"order {model.order}, {model.vocab_size} word types, {len(model.counts)} grams")


def cmd_attack(args):
    config = campaign_config(args)
    with _executor(args.workers) as pool:
        report = run_campaign(config, executor=pool)
    write_report(report, args.out)
    print(json.dumps(report.aggregates, indent=2))


def cmd_adv_train(args):
    config = campaign_config(args)
    train_config = TrainConfig(epochs=args.epochs, lr=args.lr, l2=args.l2, seed=args.seed)
    test = load_dataset(args.test_dataset, args.task) if args.test_dataset else None
    with _executor(args.workers) as pool:
        cycle = adv_train_cycle(config, train_config, test_examples=test,
                                eval_samples=args.eval_samples, executor=pool)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report(cycle.generation, out / "generation.json")
    write_report(cycle.before, out / "before.json")
    write_report(cycle.after, out / "after.json")
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(cycle.summary(), fh, indent=2)
    print(json.dumps(cycle.summary(), indent=2))


def cmd_make_toy(args):
    from .synthetic import WorldConfig, write_world

    paths = write_world(args.out_dir, WorldConfig(seed=args.seed), n_entailment=args.entailment)
    for name, path in paths.items():
        print(f"{name}\t{path}")


COMMANDS = {
    "train-victim": cmd_train_victim,
    "train-lm": cmd_train_lm,
    "attack": cmd_attack,
    "adv-train": cmd_adv_train,
    "make-toy": cmd_make_toy,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (CampaignError, VictimUnavailable) as exc:
        print(f"campaign error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, TrainError, ContractViolation, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
