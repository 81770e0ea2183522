#!/usr/bin/env python3
"""Baum-Katz Lab CLI - 批量实验入口

    python -m baumkatz_lab series --q 0.5 --p 1 --r 1 --noise normal:1 --n-grid 2^4..2^17
    python -m baumkatz_lab presets                # 列出预置
    python -m baumkatz_lab presets heavy-tail-witness   # 按预置的 command 运行

退出码：0 正常，2 配置错误，3 精确曲线上判定不一致，4 不等式被违反。
"""

import argparse
import sys
from typing import List, Optional

from .callbacks import LoggingEventHandler
from .config import create_config, setup_logging
from .errors import ConfigError, LabError
from .events import EventEmitter
from .experiment import (ALIASES, COMMANDS, EXIT_CONFIG, EXIT_OK, ConfigSources, build_experiment, run,
                         write_result)
from .presets import get_presets_loader

EXPERIMENT_FLAGS = ("q", "q_seq", "q_bound", "p", "r", "eps", "noise", "n_grid", "reps", "seed",
                    "confidence", "out", "mode", "workers")


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("experiment")
    group.add_argument("--q", type=float, help="constant coefficient, |q| <= 1")
    group.add_argument("--q-seq", help="comma separated coefficients q_1,...,q_max")
    group.add_argument("--q-bound", type=float, help="contraction bound for --q-seq")
    group.add_argument("--p", type=float)
    group.add_argument("--r", type=float)
    group.add_argument("--eps", type=float)
    group.add_argument("--noise", help="normal:SIGMA | rademacher | uniform:W | pareto:ALPHA[,SCALE] | "
                                       "student:NU | twopoint:A,B,PROB_A")
    group.add_argument("--n-grid", help="e.g. 2^4..2^17 or 100,10000,1000000")
    group.add_argument("--reps", type=int)
    group.add_argument("--seed", type=int)
    group.add_argument("--confidence", type=float)
    group.add_argument("--out", help="output CSV path, '-' for stdout")
    group.add_argument("--mode", choices=["recursive", "weighted"], help="path mode for simulate")
    group.add_argument("--workers", type=int, help="Monte Carlo threads (env BKLAB_THREADS)")

    setup = common.add_argument_group("setup")
    setup.add_argument("--config", help="experiment file (flat YAML)")
    setup.add_argument("--preset", help="named preset from the presets directory")
    setup.add_argument("--lab-config", help="lab settings file, default ./config.yaml")
    setup.add_argument("--log-level", help="DEBUG / INFO / WARNING / ERROR")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="baumkatz_lab",
                                     description="Baum-Katz series laboratory for linear autoregression")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "one sample path: theta, xi, partial sums",
        "tail": "tail probabilities over the n grid",
        "series": "series table, diagnostic and predicted verdicts",
        "predict": "predicted verdict only",
        "unit-root-gaussian": "exact tails for q=1 with Gaussian noise",
        "check-inequalities": "enumerated sweep of the probability inequalities",
    }
    reverse_alias = {v: k for k, v in ALIASES.items()}
    for name in COMMANDS:
        aliases = [reverse_alias[name]] if name in reverse_alias else []
        sub.add_parser(name, parents=[common], help=helps[name], aliases=aliases)
    presets = sub.add_parser("presets", parents=[common], help="list presets, or run one by name")
    presets.add_argument("name", nargs="?")
    return parser


def _collect_flags(args: argparse.Namespace) -> dict:
    return {key: getattr(args, key, None) for key in EXPERIMENT_FLAGS}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    lab = create_config(args.lab_config)
    setup_logging(args.log_level)
    loader = get_presets_loader()
    loader.scan()

    command = ALIASES.get(args.command, args.command)
    preset_name = args.preset
    if command == "presets":
        if not args.name:
            sys.stdout.write(loader.get_descriptions() + "\n")
            return EXIT_OK
        preset_name = args.name

    events = EventEmitter(experiment=preset_name or command)
    events.on(LoggingEventHandler())
    try:
        sources = ConfigSources()
        if preset_name:
            preset = loader.load(preset_name)
            if preset is None:
                raise ConfigError(f"unknown preset {preset_name!r} in {lab.presets_dir}", "--preset")
            if command == "presets":
                if not preset.command:
                    raise ConfigError(f"preset {preset_name!r} names no command", str(preset.path))
                command = ALIASES.get(preset.command, preset.command)
                if command not in COMMANDS:
                    raise ConfigError(f"unknown command {preset.command!r}", str(preset.path))
            sources.add_preset(preset)
        if args.config:
            sources.add_file(args.config)
        sources.add_flags(_collect_flags(args))

        config = None if command == "check-inequalities" else build_experiment(sources)
        result = run(command, config, events)
        write_result(result, config.output_path if config else args.out)
        return result.exit_code
    except LabError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
