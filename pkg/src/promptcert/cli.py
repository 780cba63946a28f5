"""Command-line surface.

Subcommands: gen-synth, search, bound, probe, grid, flip, subsample,
prune, srm, validate, export-report. Experiment commands write a
report.csv, a manifest.json, and rendered figures into the output
directory. Exit codes: 0 success, 2 configuration error, 3 data or format
error, 4 oracle bridge error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .baseline import ProbeBoundConfig, probe_pac_bayes_bound, probe_risk, save_probe, train_probe
from .bounds import evaluate_prompts
from .core import DataFormatError, LabelRangeError, load_prompt_set, save_prompt_set
from .encoder import EmptyPromptError, MissingEmbeddingError
from .figures import render_figures
from .harness import (
    ExperimentConfig,
    PriorConfig,
    ReportRow,
    World,
    build_prior,
    derived_seed,
    emit_report,
    load_world,
    parse_report,
    run_experiment,
    save_world,
)
from .prior import BridgeError, KlPolicy
from .search import SearchConfig, sequential_search, write_trace_csv
from .synth import SyntheticSpec, generate_synthetic


class ConfigError(ValueError):
    pass


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _experiment_config(args, kind: str) -> ExperimentConfig:
    doc = _load_config_file(args.config)
    doc["kind"] = kind
    if args.seed is not None:
        doc["master_seed"] = args.seed
    if args.delta is not None:
        doc["delta"] = args.delta
    if getattr(args, "trials", None) is not None:
        doc["trials"] = args.trials
    try:
        return ExperimentConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad experiment config: {exc}") from exc


def _run_and_report(cfg: ExperimentConfig, out_dir: str, figures: bool) -> list[ReportRow]:
    rows = run_experiment(cfg, out_dir)
    if figures:
        render_figures(rows, cfg.kind, out_dir)
    print(f"{cfg.kind}: {len(rows)} rows -> {Path(out_dir) / 'report.csv'}")
    return rows


def _add_experiment_parser(add_parser, name: str, kind: str, help_text: str):
    p = add_parser(name, help=help_text)
    p.set_defaults(kind=kind)
    return p


def _synth_spec_from_args(args) -> SyntheticSpec:
    doc = _load_config_file(args.config)
    spec_doc = doc.get("synthetic", doc) if doc else {}
    fields = dict(spec_doc)
    for key in (
        "num_classes",
        "dim",
        "vocab_size",
        "true_length",
        "train_per_class",
        "test_per_class",
    ):
        value = getattr(args, key, None)
        if value is not None:
            fields[key] = value
    if getattr(args, "noise", None) is not None:
        fields["noise_scale"] = args.noise
    if args.seed is not None:
        fields["seed"] = args.seed
    try:
        return SyntheticSpec(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad synthetic spec: {exc}") from exc


def _add_common_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # The same flags are accepted before and after the subcommand; the
    # subparser copies use SUPPRESS so they only override when given.
    d = dict(default=argparse.SUPPRESS) if suppress else {}
    parser.add_argument("--seed", type=int, **(d or {"default": None}), help="master seed")
    parser.add_argument(
        "--delta", type=float, **(d or {"default": None}), help="bound confidence (default 0.01)"
    )
    parser.add_argument("--out", **(d or {"default": "out"}), help="output directory")
    parser.add_argument("--config", **(d or {"default": None}), help="JSON config file")
    if suppress:
        parser.add_argument(
            "--no-figures", action="store_true", default=argparse.SUPPRESS,
            help="skip figure rendering",
        )
    else:
        parser.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptcert",
        description="Prompt search and certified generalization bounds.",
    )
    _add_common_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _add_common_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=argparse.ArgumentParser)

    def add_parser(name, **kwargs):
        return sub.add_parser(name, parents=[common], **kwargs)

    p = add_parser("gen-synth", help="generate a synthetic planted world")
    p.add_argument("--num-classes", dest="num_classes", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--vocab-size", dest="vocab_size", type=int)
    p.add_argument("--true-length", dest="true_length", type=int)
    p.add_argument("--train-per-class", dest="train_per_class", type=int)
    p.add_argument("--test-per-class", dest="test_per_class", type=int)
    p.add_argument("--noise", type=float)

    p = add_parser("search", help="run sequential prompt search on a world")
    p.add_argument("world", help="world directory from gen-synth (or exporter)")
    p.add_argument("--length", type=int, default=4)
    p.add_argument("--criterion", choices=["greedy", "regularized"], default="greedy")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument(
        "--candidates", choices=["full", "lm_delta", "fixed_set"], default="full"
    )
    p.add_argument("--lm-delta", dest="lm_delta", type=float, default=0.0)
    p.add_argument("--initial-prompt", default="", help="whitespace-separated tokens")
    p.add_argument("--prior", choices=["uniform", "ngram"], default="ngram")

    p = add_parser("bound", help="evaluate a prompt set: risks and bounds")
    p.add_argument("world")
    p.add_argument("prompts", help="prompt-set JSON file")
    p.add_argument("--prior", choices=["uniform", "ngram"], default="ngram")
    p.add_argument(
        "--free-initial",
        action="store_true",
        help="condition on the initial prompt without charging it in the KL",
    )

    p = add_parser("probe", help="train the linear probe and compute its bound")
    p.add_argument("world")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=64)

    for name, kind, text in (
        ("grid", "grid", "length x split-fraction grid of search realizations"),
        ("flip", "label_flip", "random label flip sweep"),
        ("srm", "srm_compare", "greedy vs regularized search, paired seeds"),
        ("prune", "prune_compare", "k-sigma pruned vocabulary comparison"),
        ("validate", "bound_validity", "empirical bound validity trials"),
    ):
        p = _add_experiment_parser(add_parser, name, kind, text)
        if name in ("flip", "srm"):
            p.add_argument("--trials", type=int, default=None)
        if name == "validate":
            p.add_argument("--trials", type=int, default=None, dest="validity_trials")

    p = add_parser("subsample", help="data or vocabulary subsample sweep")
    p.add_argument("--what", choices=["data", "vocab"], default="data")

    p = add_parser("export-report", help="merge row CSVs and re-render figures")
    p.add_argument("reports", nargs="+", help="report.csv files to merge")
    p.add_argument("--kind", default="grid", help="experiment kind for figure layout")
    return parser


def _prior_for_world(world: World, name: str, seed: int):
    cfg = PriorConfig(kind=name)
    return build_prior(cfg, world.vocab.size, world.planted, seed)


def _cmd_gen_synth(args) -> int:
    spec = _synth_spec_from_args(args)
    world = generate_synthetic(spec)
    manifest = save_world(world, args.out)
    print(f"world written to {manifest.parent}")
    return 0


def _cmd_search(args) -> int:
    world = load_world(args.world)
    seed = args.seed if args.seed is not None else 0
    initial = tuple(
        world.vocab.id_of(tok) for tok in args.initial_prompt.split()
    )
    try:
        cfg = SearchConfig(
            length=args.length,
            criterion=args.criterion,
            beta=args.beta,
            candidate_policy=args.candidates,
            lm_delta=args.lm_delta,
            initial_prompt=initial,
            seed=seed,
            delta=args.delta if args.delta is not None else 0.01,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    prior = _prior_for_world(world, args.prior, derived_seed(seed, 1))
    prompts, trace = sequential_search(cfg, world.train, world.encoder, prior)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_prompt_set(prompts, out / "prompts.json", world.vocab)
    write_trace_csv(trace, world.vocab, out / "trace.csv")
    final = trace.steps[-1]
    print(
        f"search done: train risk {final.train_risk:.4f}, "
        f"prompts -> {out / 'prompts.json'}"
    )
    return 0


def _cmd_bound(args) -> int:
    world = load_world(args.world)
    prompts = load_prompt_set(args.prompts, world.vocab)
    seed = args.seed if args.seed is not None else 0
    prior = _prior_for_world(world, args.prior, derived_seed(seed, 1))
    ev = evaluate_prompts(
        prompts,
        world.train,
        world.encoder,
        prior,
        world.vocab.size,
        test=world.test,
        policy=KlPolicy(initial_prompt_in_kl=not args.free_initial),
        delta=args.delta if args.delta is not None else 0.01,
    )
    print(f"train error : {ev.train_risk:.4f}")
    if ev.test_risk is not None:
        print(f"test error  : {ev.test_risk:.4f}")
    print(f"kl          : {ev.kl:.4f}")
    print(f"uc bound    : {ev.uc.bound_value:.4f}{' (vacuous)' if ev.uc.vacuous else ''}")
    print(
        f"pac-bayes   : {ev.pac_bayes.bound_value:.4f}"
        f"{' (vacuous)' if ev.pac_bayes.vacuous else ''}"
    )
    return 0


def _cmd_probe(args) -> int:
    world = load_world(args.world)
    seed = args.seed if args.seed is not None else 0
    pw = train_probe(
        world.train, epochs=args.epochs, lr=args.lr, batch_size=args.batch_size, seed=seed
    )
    delta = args.delta if args.delta is not None else 0.01
    sigma, bound = probe_pac_bayes_bound(pw, world.train, ProbeBoundConfig(delta=delta))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_probe(pw, out / "probe_weights.pbem", out / "probe_meta.json")
    train_err = probe_risk(pw, world.train)
    print(f"probe train error : {train_err:.4f}")
    if world.test is not None:
        print(f"probe test error  : {probe_risk(pw, world.test):.4f}")
    print(f"best sigma        : {sigma:.4f}")
    print(f"pac-bayes bound   : {bound:.4f}{' (vacuous)' if bound >= 1 else ''}")
    return 0


def _cmd_export_report(args) -> int:
    rows = []
    for path in args.reports:
        rows.extend(parse_report(path))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_report(rows, out / "report.csv")
    if not args.no_figures:
        render_figures(rows, args.kind, out)
    print(f"merged {len(rows)} rows -> {out / 'report.csv'}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen-synth":
            return _cmd_gen_synth(args)
        if args.command == "search":
            return _cmd_search(args)
        if args.command == "bound":
            return _cmd_bound(args)
        if args.command == "probe":
            return _cmd_probe(args)
        if args.command == "export-report":
            return _cmd_export_report(args)
        if args.command == "subsample":
            kind = "data_subsample" if args.what == "data" else "vocab_subsample"
            cfg = _experiment_config(args, kind)
        else:
            cfg = _experiment_config(args, args.kind)
            if args.command == "validate" and getattr(args, "validity_trials", None):
                cfg.validity_trials = args.validity_trials
        _run_and_report(cfg, args.out, not args.no_figures)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BridgeError as exc:
        print(f"bridge error: {exc}", file=sys.stderr)
        return 4
    except (
        DataFormatError,
        LabelRangeError,
        EmptyPromptError,
        MissingEmbeddingError,
        FileNotFoundError,
        json.JSONDecodeError,
        KeyError,
        ValueError,
    ) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
