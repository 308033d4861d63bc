"""Command-line surface: reward, train, passk, bankgen, correlate.

Exit codes: 0 success, 1 partial failures while streaming (bad records or
judge errors on individual groups), 2 configuration or usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import config as cfgmod
from .banks import BankFormatError, generate_bank, load_bank, save_bank
from .clustering import ExternalJudge, JudgeError, RolloutGroup, RuleBasedJudge
from .config import CONFIG_ENV_VAR, ConfigError, RunConfig, parse_bool, parse_config_file, resolve_config
from .metrics import entropy_accuracy_correlation, pass_at_k_curve
from .records import (
    RecordFormatError,
    parse_batch_record,
    parse_reward_record,
    reward_records_for_group,
    serialize_reward_record,
)
from .rewards import OracleLabel, reward_group
from .simulator import MetricsTrace, PolicyTable, train

__all__ = ["main"]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help=f"config file path (default: ${CONFIG_ENV_VAR})")
    for f in dataclasses.fields(RunConfig):
        kind = {"int": int, "float": float, "bool": parse_bool, "str": str}[f.type]
        parser.add_argument(f"--{f.name}", type=kind, default=None, help=f"override {f.name}")


def _resolve(args: argparse.Namespace) -> RunConfig:
    path = args.config or os.environ.get(CONFIG_ENV_VAR)
    file_values = parse_config_file(path) if path else {}
    flag_values = {
        f.name: getattr(args, f.name)
        for f in dataclasses.fields(RunConfig)
        if getattr(args, f.name, None) is not None
    }
    return resolve_config(file_values, flag_values)


def _make_judge(cfg: RunConfig):
    if cfg.judge_mode == cfgmod.JUDGE_EXTERNAL:
        return ExternalJudge(cfg.judge_command)
    return RuleBasedJudge()


def _reward_one(line_no: int, line: str, cfg: RunConfig, judge):
    """Process one input line; returns (output_block, error_message)."""
    try:
        rec = parse_batch_record(line)
    except RecordFormatError as exc:
        return None, f"line {line_no}: skipped record: {exc}"
    group = RolloutGroup(question_id=rec.question_id, prompt=rec.prompt, outputs=rec.samples)
    group_judge = judge.for_question(rec.question_id) if isinstance(judge, ExternalJudge) else judge
    label = (
        OracleLabel(rec.question_id, rec.golden_answer) if rec.golden_answer is not None else None
    )
    try:
        rewarded = reward_group(
            group,
            group_judge,
            gate_cfg=cfg.gate_config(),
            adv_cfg=cfg.advantage_config(),
            label=label,
        )
    except JudgeError as exc:
        return None, f"line {line_no}: skipped group {rec.question_id}: {exc}"
    block = "".join(
        serialize_reward_record(r) + "\n" for r in reward_records_for_group(rewarded)
    )
    return block, None


def cmd_reward(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    judge = _make_judge(cfg)
    instream = open(args.input, encoding="utf-8") if args.input else sys.stdin
    outstream = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    failed = False
    try:
        lines = (
            (i, line)
            for i, line in enumerate(instream, start=1)
            if line.strip()
        )
        worker = lambda item: _reward_one(item[0], item[1], cfg, judge)
        if cfg.workers == 1:
            results = map(worker, lines)
        else:
            executor = ThreadPoolExecutor(max_workers=cfg.workers)
            results = executor.map(worker, lines)
        for block, err in results:
            if err is not None:
                failed = True
                print(err, file=sys.stderr)
            else:
                outstream.write(block)
        if cfg.workers > 1:
            executor.shutdown()
    finally:
        if args.input:
            instream.close()
        if args.output:
            outstream.close()
        if isinstance(judge, ExternalJudge):
            judge.close()
    return 1 if failed else 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    bank = load_bank(args.bank)
    policy, trace = train(bank, cfg.train_config())
    trace.to_csv(args.metrics_out)
    policy.save(args.policy_out)
    final = trace.rows[-1]
    acc = "n/a" if final.accuracy is None else f"{final.accuracy:.4f}"
    print(f"final_accuracy={acc} final_mean_entropy={final.mean_entropy:.4f}")
    return 0


def cmd_passk(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    policy = PolicyTable.load(args.policy)
    bank = load_bank(args.bank)
    ks = [int(part) for part in args.ks.split(",") if part.strip()]
    curve = pass_at_k_curve(policy, bank, n=args.n, ks=ks, rng=np.random.default_rng(cfg.rng_seed))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("k,mean_pass_at_k\n")
        for k, value in curve:
            fh.write(f"{k},{value!r}\n")
    print(f"wrote {len(curve)} rows to {args.out}")
    return 0


def cmd_bankgen(args: argparse.Namespace) -> int:
    cfg = _resolve(args)
    bank = generate_bank(args.profile, seed=cfg.rng_seed)
    save_bank(bank, args.out)
    print(f"wrote {len(bank)} questions to {args.out}")
    return 0


def _correlation_pairs(path: str, mode: str) -> list[tuple[float, float]]:
    with open(path, encoding="utf-8") as fh:
        first = ""
        for line in fh:
            if line.strip():
                first = line.strip()
                break
    if mode == "auto":
        mode = "steps" if first.startswith("step,") else "questions"
    if mode == "steps":
        trace = MetricsTrace.from_csv(path)
        pairs = [(r.mean_entropy, r.accuracy) for r in trace.rows if r.accuracy is not None]
        if not pairs:
            raise ConfigError("metrics file carries no accuracy column to correlate against")
        return pairs
    groups: dict[str, list] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = parse_reward_record(line)
            groups.setdefault(rec.question_id, []).append(rec)
    pairs = []
    for qid, recs in groups.items():
        if any(r.reward_oracle is None for r in recs):
            raise ConfigError(f"group {qid} lacks reward_oracle; per-question mode needs labels")
        accuracy = sum(1.0 for r in recs if r.reward_oracle == 1.0) / len(recs)
        pairs.append((recs[0].entropy_nats, accuracy))
    return pairs


def cmd_correlate(args: argparse.Namespace) -> int:
    pairs = _correlation_pairs(args.file, args.mode)
    try:
        report = entropy_accuracy_correlation(pairs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if report.degenerate:
        print(f"degenerate: constant input, coefficient undefined (n={report.n_pairs})")
    else:
        print(f"spearman={report.coefficient:.6f} n={report.n_pairs}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="empo",
        description="Meaning-cluster rewards and the desk-scale policy trainer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_reward = sub.add_parser("reward", help="stream reward records for sampled groups")
    p_reward.add_argument("--input", help="batch record file (default: stdin)")
    p_reward.add_argument("--output", help="reward record file (default: stdout)")
    _add_config_flags(p_reward)
    p_reward.set_defaults(func=cmd_reward)

    p_train = sub.add_parser("train", help="train a tabular policy on a question bank")
    p_train.add_argument("bank", help="bank file (JSON lines)")
    p_train.add_argument("--metrics-out", required=True, help="metrics CSV destination")
    p_train.add_argument("--policy-out", required=True, help="final policy destination")
    _add_config_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_passk = sub.add_parser("passk", help="pass@k curve of a policy over a bank")
    p_passk.add_argument("policy", help="policy file")
    p_passk.add_argument("bank", help="bank file")
    p_passk.add_argument("--n", type=int, required=True, help="samples per question")
    p_passk.add_argument("--ks", required=True, help="comma-separated k values")
    p_passk.add_argument("--out", required=True, help="curve CSV destination")
    _add_config_flags(p_passk)
    p_passk.set_defaults(func=cmd_passk)

    p_bank = sub.add_parser("bankgen", help="generate a standard question bank")
    p_bank.add_argument("--profile", required=True, help="bank profile name")
    p_bank.add_argument("--out", required=True, help="bank file destination")
    _add_config_flags(p_bank)
    p_bank.set_defaults(func=cmd_bankgen)

    p_corr = sub.add_parser("correlate", help="entropy-accuracy rank correlation")
    p_corr.add_argument("file", help="metrics CSV or reward record file")
    p_corr.add_argument(
        "--mode", choices=["auto", "steps", "questions"], default="auto",
        help="correlate per training step or per question (default: detect)",
    )
    _add_config_flags(p_corr)
    p_corr.set_defaults(func=cmd_correlate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, BankFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
