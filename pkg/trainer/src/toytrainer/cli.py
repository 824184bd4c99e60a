"""toytrainer CLI: train / predict / eval-attack / defend."""
from __future__ import annotations

import argparse
import json
from dataclasses import asdict
from pathlib import Path

from .data import load_dataset
from .defend import DEFENSES, apply_defense, compress_test_inputs
from .evaluate import ALL_CONDITIONS, evaluate_attack, format_report, save_report
from .train import TrainConfig, load_checkpoint, predict_dataset, save_checkpoint, train, write_log


def _cmd_train(args) -> int:
    config = TrainConfig(
        data=args.data,
        epochs=args.epochs,
        lr=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
        max_depth=args.max_depth,
        supervise_zero=not args.ignore_zero,
        base_channels=args.base_channels,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "train_config.json").write_text(
        json.dumps(asdict(config), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    model, history = train(config)
    save_checkpoint(out / "checkpoint.pt", model, config)
    write_log(out / "training_log.jsonl", history)
    print(f"final loss {history[-1]['loss']:.5f} after {config.epochs} epochs")
    print(out / "checkpoint.pt")
    return 0


def _cmd_predict(args) -> int:
    model, config = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    out = predict_dataset(model, dataset, args.out, config.max_depth)
    print(f"wrote {len(dataset)} predictions to {out}")
    return 0


def _cmd_eval_attack(args) -> int:
    model, config = load_checkpoint(args.checkpoint)
    conditions = tuple(args.conditions.split(",")) if args.conditions else ALL_CONDITIONS
    report = evaluate_attack(
        model,
        args.clean_test,
        args.workdir,
        patch_size=args.patch_size,
        seed=args.seed,
        trigger_png=args.trigger,
        conditions=conditions,
        max_depth=config.max_depth,
    )
    save_report(Path(args.workdir) / "attack_report.json", report)
    print(format_report(report))
    return 0


def _cmd_defend(args) -> int:
    model, config = load_checkpoint(args.checkpoint)
    if args.defense == "compress-60":
        if not (args.data and args.out):
            raise SystemExit("compress-60 needs --data (test index) and --out (compressed set)")
        compress_test_inputs(args.data, args.out, quality=60)
        print(f"compressed test inputs -> {args.out}")
        return 0
    clean = load_dataset(args.data) if args.data else None
    model = apply_defense(model, args.defense, config, clean)
    out = Path(args.out)
    save_checkpoint(out, model, config)
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toytrainer", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("train", help="train a depth regressor on a dataset")
    p.add_argument("--data", required=True, help="dataset index or root (depthpoison layout)")
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-depth", type=float, default=80.0)
    p.add_argument("--base-channels", type=int, default=32)
    p.add_argument("--ignore-zero", action="store_true",
                   help="treat 0-depth pixels as invalid instead of supervised targets")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="export 16-bit PNG depth predictions")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval-attack", help="score clean and triggered behavior")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--clean-test", required=True)
    p.add_argument("--workdir", required=True)
    p.add_argument("--patch-size", type=int, default=12)
    p.add_argument("--seed", type=int, default=100)
    p.add_argument("--trigger", help="trigger PNG (defaults to a white patch)")
    p.add_argument("--conditions", help="comma list, default all")
    p.set_defaults(func=_cmd_eval_attack)

    p = sub.add_parser("defend", help="apply a defense to a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--defense", choices=DEFENSES, required=True)
    p.add_argument("--data", help="clean dataset (fine-tune/prune) or test index (compress-60)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_defend)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
