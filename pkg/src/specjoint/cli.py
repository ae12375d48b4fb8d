"""Command-line front end: prepare, train, enhance, evaluate, profile.

Every command takes an optional key=value config file; flags override the
file; the effective configuration is echoed next to the primary outputs so
a run can be reproduced from its artifacts alone. With a fixed seed all
primary outputs (manifests, checkpoints, WAVs, CSVs) are byte-identical
across reruns.
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import corpus as corpus_mod
from . import metrics as metrics_mod
from .config import RunConfig
from .corpus import Variant, load_training_data, read_corpus_stats, read_manifest
from .dsp import stft
from .enhance import enhance_waveform, write_diagnostics
from .errors import SpecJointError, TrainingDivergedError
from .features import FeatureKind, lps
from .network import EpochStats, init_model, load_model, save_model, train
from .wavio import read_wav, write_wav

log = logging.getLogger("specjoint")

CONFIG_ECHO_NAME = "effective-config.txt"

_LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    level_name = os.environ.get("SPECJOINT_LOG", "info").lower()
    if level_name not in _LOG_LEVELS:
        print(
            f"warning: SPECJOINT_LOG={level_name!r} not one of {sorted(_LOG_LEVELS)}; using info",
            file=sys.stderr,
        )
        level_name = "info"
    logging.basicConfig(stream=sys.stderr, format="%(message)s", level=_LOG_LEVELS[level_name])


def _load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        config = config.replace(seed=args.seed)
    if getattr(args, "variant", None) is not None:
        config = config.replace(variant=args.variant)
    if getattr(args, "post_process", None) is not None:
        config = config.replace(post_enabled=args.post_process == "on")
    return config


def _echo_config(config: RunConfig, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / CONFIG_ECHO_NAME).write_text(config.dump(), encoding="utf-8")


def _wav_list(directory: Path) -> list[Path]:
    return sorted(directory.glob("*.wav"))


def cmd_prepare(args) -> int:
    config = _load_config(args)
    clean_dir, noise_dir, out_dir = Path(args.clean_dir), Path(args.noise_dir), Path(args.out_dir)
    clean_paths, noise_paths = _wav_list(clean_dir), _wav_list(noise_dir)
    if not clean_paths:
        log.error("no WAV files in %s", clean_dir)
        return 1
    if not noise_paths:
        log.error("no WAV files in %s", noise_dir)
        return 1
    bad = []
    for path in clean_paths + noise_paths:
        try:
            read_wav(path, expected_rate=config.sample_rate)
        except SpecJointError as exc:
            bad.append(f"{path}: {exc}")
    if bad:
        for line in bad:
            log.error("%s", line)
        return 1
    entries = corpus_mod.build_corpus(
        clean_paths,
        noise_paths,
        out_dir,
        config.stft_config(),
        config.bank(),
        config.ibm_config(),
        snr_grid=config.snr_grid,
        val_fraction=config.val_fraction,
        test_fraction=config.test_fraction,
        seed=config.seed,
        sample_rate=config.sample_rate,
    )
    _echo_config(config, out_dir)
    log.info("prepared %d mixtures in %s", len(entries), out_dir)
    return 0


def _history_csv(history: list[EpochStats]) -> str:
    def cell(value) -> str:
        return "" if value is None else f"{value:.10g}"

    lines = [
        "epoch,learning_rate,train_total,train_lps,train_mfcc,train_ibm,"
        "val_total,val_lps,val_mfcc,val_ibm"
    ]
    for item in history:
        val = item.val
        lines.append(
            ",".join(
                [
                    str(item.epoch),
                    f"{item.learning_rate:.10g}",
                    cell(item.train.total),
                    cell(item.train.lps),
                    cell(item.train.mfcc),
                    cell(item.train.ibm),
                    cell(val.total if val else None),
                    cell(val.lps if val else None),
                    cell(val.mfcc if val else None),
                    cell(val.ibm if val else None),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def cmd_train(args) -> int:
    config = _load_config(args)
    corpus_dir = Path(args.corpus_dir)
    checkpoint_path = Path(args.checkpoint)
    variant = Variant.parse(config.variant)
    entries = read_manifest(corpus_dir / corpus_mod.MANIFEST_NAME)
    stats = read_corpus_stats(corpus_dir)
    train_entries = [e for e in entries if e.split == "train"]
    val_entries = [e for e in entries if e.split == "val"]
    if not train_entries:
        log.error("manifest has no train-split entries")
        return 1
    log.info(
        "training %s on %d train / %d val utterances",
        variant.value,
        len(train_entries),
        len(val_entries),
    )
    train_data = load_training_data(
        corpus_dir, train_entries, variant, stats, config.context_tau, config.noise_aware_frames
    )
    val_data = None
    if val_entries:
        val_data = load_training_data(
            corpus_dir, val_entries, variant, stats, config.context_tau, config.noise_aware_frames
        )
    model = init_model(
        variant,
        corpus_mod.input_dim(variant, config.lps_dims, config.mfcc_dims, config.context_tau),
        stats,
        config.context_tau,
        config.noise_aware_frames,
        config.lps_dims,
        config.mfcc_dims,
        hidden_units=config.hidden_units,
        hidden_layers=config.hidden_layers,
        seed=config.seed,
    )
    exit_code = 0
    try:
        history = train(
            model, train_data, config.train_config(), val_data, restore_best=True, log=log.info
        )
    except TrainingDivergedError as exc:
        history = exc.history  # type: ignore[attr-defined]
        log.error("%s; keeping last finite parameters", exc)
        exit_code = 1
    save_model(checkpoint_path, model)
    checkpoint_path.with_suffix(".history.csv").write_text(_history_csv(history), encoding="utf-8")
    _echo_config(config, checkpoint_path.parent)
    log.info("wrote %s", checkpoint_path)
    return exit_code


def cmd_enhance(args) -> int:
    config = _load_config(args)
    model = load_model(args.checkpoint)
    in_path, out_dir = Path(args.input), Path(args.out_dir)
    wav_paths = _wav_list(in_path) if in_path.is_dir() else [in_path]
    if not wav_paths:
        log.error("no WAV files in %s", in_path)
        return 1
    post = config.post_config()
    bank = config.bank() if model.variant.mfcc_in_input else None
    # Fail the configuration check before touching any files.
    if post.enabled and not any(h.kind == FeatureKind.IBM for h in model.heads):
        log.error(
            "checkpoint variant %r has no mask head; rerun with --post-process off",
            model.variant.value,
        )
        return 1
    out_dir.mkdir(parents=True, exist_ok=True)

    def process(path: Path) -> str:
        noisy = read_wav(path, expected_rate=config.sample_rate)
        result = enhance_waveform(model, noisy, config.stft_config(), bank, post)
        write_wav(out_dir / path.name, result.enhanced)
        write_diagnostics(out_dir / f"{path.stem}.diag.txt", result)
        return path.name

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            for name in pool.map(process, wav_paths):
                log.info("enhanced %s", name)
    else:
        for path in wav_paths:
            log.info("enhanced %s", process(path))
    _echo_config(config, out_dir)
    return 0


def _split_entries(args, corpus_dir: Path):
    entries = read_manifest(corpus_dir / corpus_mod.MANIFEST_NAME)
    selected = [e for e in entries if e.split == args.split]
    if not selected:
        raise SpecJointError(f"manifest has no {args.split!r}-split entries")
    return selected


def cmd_evaluate(args) -> int:
    entries = _split_entries(args, Path(args.corpus_dir))
    report = metrics_mod.evaluate_condition(entries, args.enhanced_dir)
    Path(args.out_csv).write_text(metrics_mod.report_csv(report), encoding="utf-8")
    log.info(
        "ssnr %.3f dB, stoi %.4f over %d utterances", report.ssnr_db, report.stoi, report.n_utterances
    )
    if not report.complete:
        for utterance_id in report.missing:
            log.error("missing enhanced file for %s", utterance_id)
        return 1
    return 0


def cmd_distortion(args) -> int:
    config = _load_config(args)
    entries = _split_entries(args, Path(args.corpus_dir))
    enhanced_dir = Path(args.enhanced_dir)
    profile = None
    missing = []
    for entry in sorted(entries, key=lambda e: e.utterance_id):
        enhanced_path = enhanced_dir / f"{entry.utterance_id}.wav"
        if not enhanced_path.exists():
            missing.append(entry.utterance_id)
            continue
        clean = read_wav(entry.clean_path, expected_rate=config.sample_rate)
        enhanced = read_wav(enhanced_path, expected_rate=config.sample_rate)
        clean_lps = lps(stft(clean, config.stft_config()))
        estimated_lps = lps(stft(enhanced, config.stft_config()))
        profile = metrics_mod.distortion_profile(clean_lps, estimated_lps, profile)
    if profile is None:
        log.error("no enhanced files found for split %r", args.split)
        return 1
    Path(args.out_csv).write_text(
        metrics_mod.profile_csv(profile, config.sample_rate, config.stft_fft_size),
        encoding="utf-8",
    )
    if missing:
        for utterance_id in missing:
            log.error("missing enhanced file for %s", utterance_id)
        return 1
    return 0


def cmd_dump_defaults(args) -> int:
    sys.stdout.write(RunConfig().dump())
    return 0


def _add_common(parser: argparse.ArgumentParser, seed: bool = True) -> None:
    parser.add_argument("--config", metavar="PATH", help="key=value config file")
    if seed:
        parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument(
        "--jobs", type=int, default=1, metavar="N", help="parallel workers for per-utterance work"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specjoint",
        description="Train and run a multi-objective spectral-mapping speech enhancer.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="mix a noisy corpus and extract features")
    _add_common(p)
    p.add_argument("clean_dir")
    p.add_argument("noise_dir")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a network on a prepared corpus")
    _add_common(p)
    p.add_argument("--variant", choices=[v.value for v in Variant], help="override train.variant")
    p.add_argument("corpus_dir")
    p.add_argument("checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="enhance a WAV file or directory")
    _add_common(p)
    p.add_argument("--post-process", choices=["on", "off"], dest="post_process")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("evaluate", help="score enhanced utterances against their cleans")
    _add_common(p, seed=False)
    p.add_argument("--split", default="test", choices=corpus_mod.SPLITS)
    p.add_argument("corpus_dir")
    p.add_argument("enhanced_dir")
    p.add_argument("out_csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("distortion-profile", help="per-frequency log-spectral error profile")
    _add_common(p, seed=False)
    p.add_argument("--split", default="test", choices=corpus_mod.SPLITS)
    p.add_argument("corpus_dir")
    p.add_argument("enhanced_dir")
    p.add_argument("out_csv")
    p.set_defaults(func=cmd_distortion)

    p = sub.add_parser("dump-defaults", help="print the default configuration")
    p.set_defaults(func=cmd_dump_defaults)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SpecJointError, FileNotFoundError) as exc:
        log.error("error: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
