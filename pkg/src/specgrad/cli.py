"""Command-line entry point.

Exit codes: 0 success, 1 runtime error, 2 usage error, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from . import gradcheck, inversion, losses, preproc, signal_io
from .errors import ConfigError, DivergenceError, SpecgradError
from .stft import StftConfig, Window, make_operator, stft_fast

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0 or not np.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be a positive finite number, got {value}")
    return value


def fraction(text: str) -> float:
    value = positive_float(text)
    if value >= 1:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {value}")
    return value


def _add_stft_flags(p: argparse.ArgumentParser, shift: int = 16) -> None:
    g = p.add_argument_group("STFT")
    g.add_argument("--frame-length", type=positive_int, default=400, help="frame length L in samples (default: 400)")
    g.add_argument("--frame-shift", type=positive_int, default=shift,
                   help=f"frame shift S in samples (default: {shift}; use 1 for the training configuration)")
    g.add_argument("--fft-size", type=positive_int, default=512, help="FFT size N, a power of two (default: 512)")
    g.add_argument("--window", choices=[w.value for w in Window], default="rectangular",
                   help="analysis window (default: rectangular)")
    g.add_argument("--two-sided", action="store_true", help="keep all N bins instead of N/2+1")


def _stft_config(args) -> StftConfig:
    return StftConfig(args.frame_length, args.frame_shift, args.fft_size, args.window, not args.two_sided)


def _add_alpha_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", choices=["0", "1", "vuv"], default="1",
                   help="phase weight: 0 amplitude only, 1 uniform, vuv voiced frames only (default: 1)")
    p.add_argument("--flags", help="voiced/unvoiced flags file, required with --alpha vuv")


def _weights(args) -> losses.LossWeights:
    if args.alpha == "vuv":
        if not args.flags:
            raise UsageError("--alpha vuv requires --flags")
        return losses.LossWeights.voiced_only(signal_io.read_flags(args.flags))
    return losses.LossWeights(args.alpha)


def cmd_analyze(args) -> int:
    w = signal_io.read_wav(args.input)
    if args.normalize:
        w = signal_io.normalize(w)[0]
    op = make_operator(_stft_config(args), len(w))
    spec = stft_fast(op, w)
    signal_io.write_spectra(spec, args.out)
    print(f"T={op.num_frames} K={op.num_bins}")
    return EXIT_OK


def _load_pair(args):
    ref = signal_io.read_wav(args.ref)
    est = signal_io.read_wav(args.est)
    if len(ref) != len(est):
        raise UsageError(f"--ref has {len(ref)} samples but --est has {len(est)}")
    if args.normalize:
        ref = signal_io.normalize(ref)[0]
        est = signal_io.normalize(est)[0]
    return ref, est


def cmd_loss(args) -> int:
    ref, est = _load_pair(args)
    weights = _weights(args)
    op = make_operator(_stft_config(args), len(ref))
    b = losses.combined_loss(ref, est, op, weights)
    nll = losses.negative_log_likelihood(ref, est, op, weights)
    print(f"e_amp {b.e_amp!r}")
    print(f"e_phase {b.e_phase!r}")
    print(f"e_total {b.e_total!r}")
    print(f"nll {nll!r}")
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["e_amp", "e_phase", "e_total", "nll"])
            writer.writerow([repr(b.e_amp), repr(b.e_phase), repr(b.e_total), repr(nll)])
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg = _stft_config(args)
    if args.ref:
        ref, est = _load_pair(args)
        y_hat, y = ref.samples, est.samples
    else:
        rng = np.random.default_rng(args.seed)
        y_hat = rng.standard_normal(args.signal_length)
        y = rng.standard_normal(args.signal_length)
    op = make_operator(cfg, y.shape[0])
    weights = _weights(args)
    checks = {
        "amplitude": (
            lambda z: losses.combined_loss(y_hat, z, op, losses.LossWeights.amplitude_only()).e_total,
            losses.amplitude_grad(y_hat, y, op),
        ),
        "phase": (
            lambda z: losses.combined_loss(y_hat, z, op, weights).e_phase,
            losses.phase_grad(y_hat, y, op, weights),
        ),
        "combined": (
            lambda z: losses.combined_loss(y_hat, z, op, weights).e_total,
            losses.combined_grad(y_hat, y, op, weights),
        ),
    }
    ok = True
    for name, (fn, grad) in checks.items():
        report = gradcheck.check_gradient(fn, grad, y, op, args.step, reference=y_hat)
        passed = report.passed(args.tol)
        ok &= passed
        print(f"{name:9s} {'PASS' if passed else 'FAIL'} {report.summary()}")
    return EXIT_OK if ok else EXIT_ERROR


def cmd_invert(args) -> int:
    cfg = _stft_config(args)
    mean, std = 0.0, 1.0
    reference = None
    sample_rate = args.sample_rate
    if args.synthetic:
        reference = inversion.synthetic_target(sample_rate)
        op = make_operator(cfg, len(reference))
        target = stft_fast(op, reference)
    elif args.target is None:
        raise UsageError("give --target or --synthetic")
    elif _is_spc1(args.target):
        target = signal_io.read_spectra(args.target, cfg)
        length = args.signal_length or target.shape[0] * cfg.frame_shift
        op = make_operator(cfg, length)
        if op.num_frames != target.shape[0]:
            raise UsageError(f"--signal-length {length} gives {op.num_frames} frames, target has {target.shape[0]}")
    else:
        w = signal_io.read_wav(args.target)
        sample_rate = w.sample_rate
        reference, mean, std = signal_io.normalize(w)
        op = make_operator(cfg, len(reference))
        target = stft_fast(op, reference)

    if args.optimizer == "adam":
        opt = inversion.Adam(args.lr, args.beta1, args.beta2, args.eps)
    else:
        opt = inversion.Sgd(args.lr)
    init = inversion.Zeros() if args.init == "zeros" else inversion.GaussianNoise(args.seed, args.init_scale)
    settings = inversion.InversionSettings(opt, args.iters, init, args.stop_tol, args.log_every, args.patience or None)
    try:
        trace = inversion.invert(target, op, _weights(args), settings)
    except DivergenceError as exc:
        if args.trace and exc.trace is not None:
            inversion.write_trace_csv(exc.trace, args.trace)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED

    if args.trace:
        inversion.write_trace_csv(trace, args.trace)
    if args.out:
        out = signal_io.Waveform(trace.waveform * std + mean, sample_rate)
        clipped = signal_io.write_wav(out, args.out)
        if clipped:
            print(f"warning: clipped {clipped} samples", file=sys.stderr)
    b = trace.best_loss
    line = (f"iterations={trace.iterations} stop={trace.stop_reason} best_iter={trace.best_iter} "
            f"e_amp={b.e_amp:.6g} e_phase={b.e_phase:.6g} e_total={b.e_total:.6g}")
    if reference is not None and np.any(reference.samples):
        line += f" snr_db={inversion.snr(reference, trace.waveform):.3f}"
    print(line)
    return EXIT_OK


def _is_spc1(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(4) == signal_io.SPC1_MAGIC


def cmd_vuv(args) -> int:
    w = signal_io.read_wav(args.input)
    cfg = StftConfig(args.frame_length, args.frame_shift, args.fft_size, args.window, not args.two_sided)
    det = preproc.VuvDetectorConfig.for_stft(
        cfg,
        energy_threshold=args.energy_threshold,
        periodicity_threshold=args.periodicity_threshold,
        min_lag=args.min_lag,
        max_lag=args.max_lag,
    )
    flags = preproc.detect_vuv(w, det, cfg)
    signal_io.write_flags(flags, args.out)
    print(f"frames={flags.frame_count} voiced={int(np.sum(flags.flags))}")
    return EXIT_OK


def cmd_feedback(args) -> int:
    w = signal_io.read_wav(args.input)
    n = args.fft_size or 1 << (len(w) - 1).bit_length()
    out, info = preproc.feedback_transform(w, n, full_output=True)
    signal_io.write_wav(out, args.out)
    print(f"samples={len(out)} floored_bins={info['floored']}")
    return EXIT_OK if not info["degenerate"] else EXIT_ERROR


def cmd_export_spec(args) -> int:
    spec = signal_io.read_spectra(args.input)
    floor = 10.0 ** (args.db_floor / 20.0)
    db = 20.0 * np.log10(np.maximum(np.abs(spec.entries), floor))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in db:
            writer.writerow([repr(float(v)) for v in row])
    print(f"T={spec.shape[0]} K={spec.shape[1]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specgrad", description="STFT amplitude/phase losses and waveform inversion")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="compute a complex spectrogram and write it as SPC1")
    p.add_argument("--in", dest="input", required=True, help="input WAV (16-bit PCM mono)")
    p.add_argument("--out", required=True, help="output SPC1 file")
    p.add_argument("--normalize", action="store_true", help="normalize to zero mean, unit variance first")
    _add_stft_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("loss", help="score an estimate against a reference")
    p.add_argument("--ref", required=True, help="reference WAV")
    p.add_argument("--est", required=True, help="estimate WAV of the same length")
    p.add_argument("--normalize", action="store_true", help="normalize both waveforms independently")
    p.add_argument("--csv", help="also write the values to this CSV file")
    _add_alpha_flags(p)
    _add_stft_flags(p)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("gradcheck", help="compare analytic gradients with finite differences")
    p.add_argument("--ref", help="reference WAV (default: random signals)")
    p.add_argument("--est", help="estimate WAV, required with --ref")
    p.add_argument("--normalize", action="store_true", help="normalize WAV inputs")
    p.add_argument("--signal-length", type=positive_int, default=32, help="random signal length (default: 32)")
    p.add_argument("--seed", type=int, default=0, help="seed for random signals (default: 0)")
    p.add_argument("--step", type=positive_float, default=gradcheck.DEFAULT_STEP, help="finite-difference step (default: 1e-6)")
    p.add_argument("--tol", type=positive_float, default=1e-5, help="max relative error to pass (default: 1e-5)")
    _add_alpha_flags(p)
    _add_stft_flags(p, shift=4)
    p.set_defaults(func=cmd_gradcheck, frame_length=8, fft_size=8)

    p = sub.add_parser("invert", help="reconstruct a waveform by gradient descent on the spectral loss")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--target", help="target WAV or SPC1 file")
    src.add_argument("--synthetic", action="store_true", help="use the built-in two-sinusoid + noise-burst target")
    p.add_argument("--signal-length", type=positive_int, help="samples to reconstruct for an SPC1 target (default: T*S)")
    p.add_argument("--sample-rate", type=positive_int, default=16000, help="output rate for SPC1/synthetic targets (default: 16000)")
    p.add_argument("--optimizer", choices=["adam", "sgd"], default="adam", help="optimizer (default: adam)")
    p.add_argument("--lr", type=positive_float, default=1e-3, help="learning rate (default: 1e-3)")
    p.add_argument("--beta1", type=float, default=0.9, help="Adam beta1 (default: 0.9)")
    p.add_argument("--beta2", type=float, default=0.999, help="Adam beta2 (default: 0.999)")
    p.add_argument("--eps", type=positive_float, default=1e-8, help="Adam epsilon (default: 1e-8)")
    p.add_argument("--iters", type=non_negative_int, default=20000, help="maximum iterations (default: 20000)")
    p.add_argument("--init", choices=["noise", "zeros"], default="noise", help="initial waveform (default: noise)")
    p.add_argument("--init-scale", type=positive_float, default=1e-4, help="noise init standard deviation (default: 1e-4)")
    p.add_argument("--seed", type=int, default=1, help="noise init seed (default: 1)")
    p.add_argument("--stop-tol", type=float, default=0.0, help="minimum best-loss decrease that resets patience (default: 0)")
    p.add_argument("--patience", type=non_negative_int, default=inversion.PATIENCE,
                   help="stop after this many iterations without improvement; 0 disables (default: 200)")
    p.add_argument("--log-every", type=positive_int, default=100, help="trace record interval (default: 100)")
    p.add_argument("--out", help="output WAV (de-normalized for WAV targets)")
    p.add_argument("--trace", help="write the iteration trace CSV here")
    _add_alpha_flags(p)
    _add_stft_flags(p)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("vuv", help="detect voiced/unvoiced frames and write a flags file")
    p.add_argument("--in", dest="input", required=True, help="input WAV")
    p.add_argument("--out", required=True, help="output flags file")
    p.add_argument("--energy-threshold", type=fraction, default=0.05, help="frame RMS relative to utterance RMS (default: 0.05)")
    p.add_argument("--periodicity-threshold", type=fraction, default=0.35, help="normalized autocorrelation peak (default: 0.35)")
    p.add_argument("--min-lag", type=positive_int, default=32, help="shortest pitch lag in samples (default: 32)")
    p.add_argument("--max-lag", type=positive_int, default=320, help="longest pitch lag in samples (default: 320)")
    _add_stft_flags(p)
    p.set_defaults(func=cmd_vuv)

    p = sub.add_parser("feedback", help="replace FFT magnitudes of a WAV with 1, keeping phase")
    p.add_argument("--in", dest="input", required=True, help="input WAV, transformed as one segment")
    p.add_argument("--out", required=True, help="output WAV with fft-size samples")
    p.add_argument("--fft-size", type=positive_int, help="FFT size (default: next power of two >= input length)")
    p.set_defaults(func=cmd_feedback)

    p = sub.add_parser("export-spec", help="write an SPC1 magnitude spectrogram as dB CSV")
    p.add_argument("--in", dest="input", required=True, help="input SPC1 file")
    p.add_argument("--out", required=True, help="output CSV, T rows by K columns")
    p.add_argument("--db-floor", type=float, default=-120.0, help="floor in dB (default: -120)")
    p.set_defaults(func=cmd_export_spec)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (SpecgradError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
