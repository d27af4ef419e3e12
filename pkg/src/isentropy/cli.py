"""Command-line driver: ``isentropy <subcommand> [flags]``.

Exit status is 0 on success, 2 on usage errors and 1 on data or runtime
errors. Outputs are written atomically, and only after every flag has been
validated.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .ensemble import (EnsembleError, NoiseSpec, inject_noise, load_ensemble, relative_magnitude,
                       slice_z, subsample, write_ensemble)
from .entropy import THREADS_ENV, entropy_field, load_entropy_field, write_entropy_field
from .harness import (DEFAULT_BINS, bin_sweep, compare_models, emit_report, noise_experiment)
from .models import ModelError, ModelKind, fit_model
from .render import render_entropy_map

log = logging.getLogger("isentropy")

# options whose values may start with '-' (negative isovalues)
_VALUE_OPTIONS = {"--isovalue", "--isovalues"}

DEFAULT_MODELS = "uniform,gaussian,histogram:5,quantile:5"


# ---------------------------------------------------------------------------
# argument types
# ---------------------------------------------------------------------------

def _float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v != v or v in (float("inf"), float("-inf")):
        raise argparse.ArgumentTypeError(f"isovalue must be finite: {text!r}")
    return v


def _float_list(text):
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("empty list")
    return [_float(t) for t in items]


def _positive_float(text):
    v = _float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _model(text):
    try:
        return ModelKind.parse(text)
    except ModelError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _model_list(text):
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("empty model list")
    return [_model(t) for t in items]


def _int_list(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None
    if not vals or vals[0] < 1 or any(b <= a for a, b in zip(vals, vals[1:])):
        raise argparse.ArgumentTypeError("bin counts must be strictly increasing and >= 1")
    return vals


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text!r}")
    return v


def _positive_int(text):
    v = _nonneg_int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


def _seed(text):
    v = _nonneg_int(text)
    if v >= 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return v


def _slice(text):
    axis, _, idx = text.partition("=")
    if axis.strip().lower() != "z" or not idx:
        raise argparse.ArgumentTypeError(f"expected z=<index>, got {text!r}")
    return _nonneg_int(idx)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_threads(p):
    p.add_argument("--threads", type=_nonneg_int, default=None,
                   help=f"worker threads, 0 = auto (fallback: ${THREADS_ENV})")


def _add_report(p):
    p.add_argument("--format", choices=("csv", "text"), default="csv")
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")


def _add_magnitude(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--magnitude", type=_positive_float,
                   help="noise magnitude in data units (std dev or uniform half-width)")
    g.add_argument("--magnitude-relative", type=_positive_float,
                   help="noise magnitude as a fraction of the base member's value range")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isentropy",
        description="Level-set entropy of ensemble scalar fields under per-vertex "
                    "distribution models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="<command>")

    p = sub.add_parser("info", help="summarize an ensemble manifest")
    p.add_argument("--manifest", type=Path, required=True)

    p = sub.add_parser("slice", help="extract one z plane as a 2D ensemble")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--slice", type=_slice, required=True, metavar="z=<i>")
    p.add_argument("--out", type=Path, required=True, help="output manifest path")

    p = sub.add_parser("subsample", help="decimate every axis by a stride")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--stride", type=_positive_int, required=True)
    p.add_argument("--out", type=Path, required=True, help="output manifest path")

    p = sub.add_parser("noisify", help="build a noise ensemble from one member")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--base-member", type=_nonneg_int, default=0)
    p.add_argument("--noise", choices=("gaussian", "uniform"), required=True)
    _add_magnitude(p)
    p.add_argument("--members", type=_positive_int, default=50)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", type=Path, required=True, help="output manifest path")

    p = sub.add_parser("entropy", help="entropy field for one model and isovalue")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--model", type=_model, required=True)
    p.add_argument("--isovalue", type=_float, required=True)
    p.add_argument("--out", type=Path, help="raw float32 cell file (+ .json sidecar)")
    _add_threads(p)

    p = sub.add_parser("compare", help="compare models against the full distribution")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--models", type=_model_list, default=_model_list(DEFAULT_MODELS))
    p.add_argument("--isovalues", type=_float_list, required=True)
    p.add_argument("--repeat", type=_positive_int, default=1,
                   help="keep the minimum time over N runs")
    p.add_argument("--timing", action="store_true", help="fill the timing columns")
    p.add_argument("--timing-strict", action="store_true",
                   help="run serially and fill the timing columns")
    _add_report(p)
    _add_threads(p)

    p = sub.add_parser("binsweep", help="histogram/quantile total entropy over bin counts")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--model", choices=("histogram", "quantile"), required=True)
    p.add_argument("--isovalue", type=_float, required=True)
    p.add_argument("--bins", type=_int_list, default=list(DEFAULT_BINS))
    _add_report(p)
    _add_threads(p)

    p = sub.add_parser("noisetest", help="Gaussian vs uniform noise-injection experiment")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--base-member", type=_nonneg_int, default=0)
    _add_magnitude(p)
    p.add_argument("--magnitude-uniform", type=_positive_float,
                   help="uniform-noise half-width if it should differ from --magnitude")
    p.add_argument("--members", type=_positive_int, default=50)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--isovalue", type=_float, required=True)
    p.add_argument("--models", type=_model_list, default=_model_list(DEFAULT_MODELS))
    p.add_argument("--timing", action="store_true")
    p.add_argument("--timing-strict", action="store_true")
    _add_report(p)
    _add_threads(p)

    p = sub.add_parser("render", help="grayscale PGM entropy map")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--entropy", type=Path, help="entropy field written by `entropy --out`")
    src.add_argument("--manifest", type=Path)
    p.add_argument("--model", type=_model)
    p.add_argument("--isovalue", type=_float)
    p.add_argument("--slice", type=_slice, metavar="z=<i>")
    p.add_argument("--max-bits", type=_positive_float)
    p.add_argument("--out", type=Path, required=True)
    _add_threads(p)
    return parser


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _write_text(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(out.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, out)


def _cmd_info(args):
    ens = load_ensemble(args.manifest)
    d = ens.dims
    print(f"name: {ens.name}")
    print(f"dims: {d.nx} x {d.ny} x {d.nz} ({'2D' if d.is_2d else '3D'})")
    print(f"members: {ens.n_members}")
    print(f"cells: {d.n_cells}")
    print(f"range: [{ens.data.min():.6g}, {ens.data.max():.6g}]")


def _cmd_slice(args):
    write_ensemble(slice_z(load_ensemble(args.manifest), args.slice), args.out)


def _cmd_subsample(args):
    write_ensemble(subsample(load_ensemble(args.manifest), args.stride), args.out)


def _base_and_magnitude(args, ens):
    if args.base_member >= ens.n_members:
        raise EnsembleError(f"base member {args.base_member} out of range [0, {ens.n_members})")
    base = ens.member(args.base_member)
    if args.magnitude is not None:
        return base, args.magnitude
    mag = relative_magnitude(base, args.magnitude_relative)
    if mag <= 0:
        raise EnsembleError("base member is constant; relative magnitude is zero")
    return base, mag


def _cmd_noisify(args):
    ens = load_ensemble(args.manifest)
    base, mag = _base_and_magnitude(args, ens)
    out = inject_noise(base, ens.dims, NoiseSpec(args.noise, mag, args.members, args.seed))
    write_ensemble(out, args.out)


def _cmd_entropy(args):
    ens = load_ensemble(args.manifest)
    ef = entropy_field(fit_model(ens, args.model), args.isovalue, args.threads)
    if args.out is not None:
        write_entropy_field(ef, args.out)
    print(f"total_entropy_bits={ef.total_entropy!r}")


def _timing_flags(args):
    threads = 1 if args.timing_strict else args.threads
    return threads, args.timing or args.timing_strict


def _cmd_compare(args):
    ens = load_ensemble(args.manifest)
    threads, timings = _timing_flags(args)
    rep = compare_models(ens, args.models, args.isovalues, threads, repeat=args.repeat)
    _write_text(emit_report(rep, args.format, timings=timings), args.out)


def _cmd_binsweep(args):
    ens = load_ensemble(args.manifest)
    res = bin_sweep(ens, args.model, args.isovalue, args.bins, args.threads)
    _write_text(emit_report(res, args.format), args.out)


def _cmd_noisetest(args):
    ens = load_ensemble(args.manifest)
    base, mag = _base_and_magnitude(args, ens)
    mag_u = args.magnitude_uniform or mag
    threads, timings = _timing_flags(args)
    rep_g, rep_u = noise_experiment(base, ens.dims, mag, mag_u, args.members, args.seed,
                                    args.isovalue, args.models, threads)
    parts = []
    for name, m, rep in (("gaussian", mag, rep_g), ("uniform", mag_u, rep_u)):
        body = emit_report(rep, args.format, timings=timings)
        if args.format == "csv":
            body = f"# noise={name} magnitude={m:.6g} members={args.members} seed={args.seed}\n" + body
        parts.append(body)
    _write_text(("\n" if args.format == "text" else "").join(parts), args.out)


def _cmd_render(args):
    if args.entropy is not None:
        ef = load_entropy_field(args.entropy)
    else:
        ens = load_ensemble(args.manifest)
        ef = entropy_field(fit_model(ens, args.model), args.isovalue, args.threads)
    if not ef.dims.is_2d and args.slice is None:
        raise EnsembleError("rendering a 3D entropy field requires --slice z=<i>")
    render_entropy_map(ef, args.out, args.max_bits, args.slice)


_COMMANDS = {
    "info": _cmd_info, "slice": _cmd_slice, "subsample": _cmd_subsample,
    "noisify": _cmd_noisify, "entropy": _cmd_entropy, "compare": _cmd_compare,
    "binsweep": _cmd_binsweep, "noisetest": _cmd_noisetest, "render": _cmd_render,
}


def _join_negative_values(argv):
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _VALUE_OPTIONS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def run_cli(argv=None) -> int:
    parser = build_parser()
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "render" and args.manifest is not None:
        if args.model is None or args.isovalue is None:
            parser.print_usage(sys.stderr)
            print("isentropy: error: render --manifest needs --model and --isovalue",
                  file=sys.stderr)
            return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _COMMANDS[args.command](args)
    except (EnsembleError, ModelError, ValueError, OSError) as exc:
        print(f"isentropy: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
