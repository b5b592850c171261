"""Command line entry point: ``freepca <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import analyze_video, classify_directory, write_batch_csv
from .decompose import AttentionParams, decompose_window, global_local_features, make_plan
from .errors import FreePCAError, ShapeError
from .fusion import FusionSchedule, accumulate_windows, fuse_components, run_pseudo_denoiser, schedule_k
from .harness import (
    Mover,
    RunConfig,
    SynthSpec,
    demo_pipeline,
    load_config,
    sha256_file,
    synth_video,
)
from .noise import MEAN_STRATEGIES, init_noise
from .pca import NORMALIZATIONS, PCABasis, component_cosine, fit_basis, project, reconstruct
from .tensors import read_tensor, video_to_features, write_tensor


def _features(arr: np.ndarray) -> np.ndarray:
    if arr.ndim == 4:
        return video_to_features(arr)
    if arr.ndim == 3:
        return arr
    raise ShapeError(f"expected a (F,H,W,C) video or (F,S,C) features, got shape {arr.shape}")


def _write_manifest(path, payload: dict, artifacts) -> None:
    payload = {"freepca_version": __version__, **payload}
    payload["artifacts"] = {str(Path(a).name): sha256_file(a) for a in artifacts}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _parse_mover(text: str) -> Mover:
    parts = text.split(":")
    if len(parts) not in (5, 7):
        raise argparse.ArgumentTypeError("mover is shape:size:vx:vy:intensity[:x0:y0]")
    shape, size, vx, vy, inten = parts[:5]
    start = (int(parts[5]), int(parts[6])) if len(parts) == 7 else (0, 0)
    return Mover(shape, int(size), (float(vx), float(vy)), float(inten), start)


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    p, s = cfg.plan, cfg.schedule
    cfg.plan = replace(
        p,
        frames=args.frames if args.frames is not None else p.frames,
        window=args.window if args.window is not None else p.window,
        stride=args.stride if args.stride is not None else p.stride,
    )
    cfg.schedule = FusionSchedule(
        k_max=args.kmax if args.kmax is not None else s.k_max,
        mode_switch_step=args.switch_step if args.switch_step is not None else s.mode_switch_step,
        total_steps=args.steps if args.steps is not None else s.total_steps,
    )
    if cfg.target.F != cfg.plan.frames:
        cfg.target = replace(cfg.target, F=cfg.plan.frames)
    if args.seed is not None:
        cfg.noise = replace(cfg.noise, seed=args.seed)
        cfg.attention = replace(cfg.attention, seed=args.seed)
    if args.mode is not None:
        cfg.denoiser = replace(cfg.denoiser, mode=args.mode)
    if args.workers is not None:
        cfg.denoiser = replace(cfg.denoiser, workers=args.workers)
    return cfg.validate()


def cmd_synth(args):
    spec = SynthSpec(args.frames, args.height, args.width, args.channels, args.background,
                     args.mover or [], args.noise_sigma, args.seed)
    write_tensor(synth_video(spec), args.out)
    print(args.out)


def cmd_noise_init(args):
    noise = init_noise(args.frames, args.height, args.width, args.channels, args.block,
                       args.seed, args.strategy, not args.no_shuffle)
    write_tensor(noise.frames, args.out)
    _write_manifest(
        str(args.out) + ".manifest.json",
        {
            "command": "noise-init",
            "seed": args.seed,
            "dims": [args.frames, args.height, args.width, args.channels],
            "block": args.block,
            "strategy": args.strategy,
            "shuffle_perms": [list(p) for p in noise.shuffle_perms],
        },
        [args.out],
    )
    print(args.out)


def cmd_decompose(args):
    out = Path(args.out_dir)
    os.makedirs(out, exist_ok=True)
    if args.input:
        x = _features(read_tensor(args.input)).astype(np.float64)
    else:
        x = video_to_features(init_noise(args.frames, 16, 16, args.channels, args.window, args.seed).frames)
    F, _, C = x.shape
    plan = make_plan(F, args.window, args.stride)
    params = AttentionParams(seed=args.seed, channels=C)
    fused = []
    for w, (xg, xl) in zip(plan.windows, global_local_features(x, plan, params)):
        k = args.k if args.k is not None else schedule_k(w.index, args.kmax)
        d = decompose_window(xg, xl, k, args.normalization)
        fused.append((w, reconstruct(d.basis, fuse_components(d.split))))
        with open(out / f"window_{w.index:03d}.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["component_index", "similarity", "rank"])
            for t, sim, rank in d.ranking.rows():
                wr.writerow([t, f"{sim:.9f}", rank])
    write_tensor(accumulate_windows(fused, plan), out / "fused.ften")
    arts = sorted(out.glob("*.csv")) + [out / "fused.ften"]
    _write_manifest(
        out / "manifest.json",
        {
            "command": "decompose",
            "input": args.input,
            "seed": args.seed,
            "plan": [[w.index, w.start, w.end] for w in plan.windows],
            "k": args.k,
            "kmax": args.kmax,
            "normalization": args.normalization,
        },
        arts,
    )
    print(out / "fused.ften")


def cmd_fuse(args):
    cfg = _run_config(args)
    out = Path(args.out_dir)
    os.makedirs(out, exist_ok=True)
    p, t = cfg.plan, cfg.target
    plan = make_plan(p.frames, p.window, p.stride)
    if args.input:
        noise = read_tensor(args.input).astype(np.float64)
    else:
        noise = init_noise(p.frames, t.H, t.W, t.C, p.window, cfg.noise.seed,
                           cfg.noise.strategy, cfg.noise.shuffle).frames
    dn = cfg.denoiser
    video = run_pseudo_denoiser(
        noise, plan, cfg.schedule, cfg.attention, target=synth_video(t), mode=dn.mode,
        step_size=dn.step_size, attention_weight=dn.attention_weight,
        normalization=dn.normalization, workers=dn.workers,
    )
    write_tensor(video, out / "output.ften")
    _write_manifest(
        out / "manifest.json",
        {"command": "fuse", "input": args.input, "config": cfg.to_dict(),
         "plan": [[w.index, w.start, w.end] for w in plan.windows]},
        [out / "output.ften"],
    )
    print(out / "output.ften")


def cmd_demo(args):
    cfg = _run_config(args)
    demo_pipeline(cfg, args.out_dir)
    print(Path(args.out_dir) / "manifest.json")


def cmd_analyze(args):
    out = Path(args.out_dir)
    os.makedirs(out, exist_ok=True)
    if args.input_dir:
        rows = classify_directory(args.input_dir, args.threshold, args.peak, args.normalization)
        write_batch_csv(out / "batch.csv", rows)
        print(out / "batch.csv")
        return
    if not args.input:
        raise SystemExit("analyze needs --input or --input-dir")
    rep = analyze_video(read_tensor(args.input), out, args.threshold, args.peak, args.normalization)
    print(f"{rep.video_class.value} n_consistent={rep.n_consistent}")


def _save_basis(basis: PCABasis, path):
    # rows 0..f-1: P, row f: eigenvalues, row f+1: center
    write_tensor(np.vstack([basis.P, basis.eigenvalues, basis.center]), path)


def _load_basis(path) -> PCABasis:
    a = read_tensor(path).astype(np.float64)
    f = a.shape[1]
    if a.shape != (f + 2, f):
        raise ShapeError(f"basis file must be (f+2, f), got {a.shape}")
    return PCABasis(a[:f], a[f], a[f + 1])


def cmd_pca(args):
    if args.action == "fit":
        basis = fit_basis(_features(read_tensor(args.input)), args.normalization)
        _save_basis(basis, args.out)
    elif args.action == "project":
        basis = _load_basis(args.basis)
        write_tensor(project(basis, _features(read_tensor(args.input))).z, args.out)
    else:
        basis = _load_basis(args.basis)
        za = project(basis, _features(read_tensor(args.input)))
        zb = project(basis, _features(read_tensor(args.other)))
        r = component_cosine(za, zb)
        with open(args.out, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["component_index", "similarity", "rank"])
            for t, sim, rank in r.rows():
                wr.writerow([t, f"{sim:.9f}", rank])
    print(args.out)


def _run_flags(p):
    p.add_argument("--config", help="JSON config file or run manifest")
    p.add_argument("--frames", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--kmax", type=int)
    p.add_argument("--switch-step", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int, help="noise and attention seed")
    p.add_argument("--mode", choices=["freepca", "local", "global"])
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", default="out")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="freepca", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic video")
    p.add_argument("--frames", type=int, default=32)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--background", default="gradient", choices=["constant", "gradient", "seeded-texture"])
    p.add_argument("--mover", type=_parse_mover, action="append",
                   help="shape:size:vx:vy:intensity[:x0:y0], repeatable")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("noise-init", help="sample long initial noise with mean reuse")
    p.add_argument("--frames", type=int, default=64)
    p.add_argument("--block", type=int, default=16)
    p.add_argument("--height", type=int, default=16)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--channels", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strategy", default="map", choices=MEAN_STRATEGIES)
    p.add_argument("--no-shuffle", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_noise_init)

    p = sub.add_parser("decompose", help="per-window component split and fusion of one feature tensor")
    p.add_argument("--input")
    p.add_argument("--frames", type=int, default=64, help="frames of generated noise when --input is absent")
    p.add_argument("--channels", type=int, default=4)
    p.add_argument("--window", type=int, default=16)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--k", type=int, help="fixed k for every window (default: min(i, kmax))")
    p.add_argument("--kmax", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normalization", default="center", choices=NORMALIZATIONS)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(fn=cmd_decompose)

    p = sub.add_parser("fuse", help="run the pseudo-denoiser with progressive fusion")
    _run_flags(p)
    p.add_argument("--input", help="initial noise .ften (default: generated)")
    p.set_defaults(fn=cmd_fuse)

    p = sub.add_parser("demo", help="end-to-end run with analysis artifacts and manifest")
    _run_flags(p)
    p.set_defaults(fn=cmd_demo)

    p = sub.add_parser("analyze", help="per-component consistency analysis")
    p.add_argument("--input")
    p.add_argument("--input-dir")
    p.add_argument("--threshold", type=float, default=35.0)
    p.add_argument("--peak", type=float, help="fixed PSNR peak (default: video max - min)")
    p.add_argument("--normalization", default="none", choices=NORMALIZATIONS)
    p.add_argument("--out-dir", default="out")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("pca", help="fit/project/cosine on .ften tensors")
    p.add_argument("action", choices=["fit", "project", "cosine"])
    p.add_argument("--input", required=True)
    p.add_argument("--other", help="second tensor for cosine")
    p.add_argument("--basis")
    p.add_argument("--normalization", default="center", choices=NORMALIZATIONS)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_pca)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "pca" and args.action != "fit" and not args.basis:
        print("error[usage]: pca project/cosine need --basis", file=sys.stderr)
        return 2
    if args.command == "pca" and args.action == "cosine" and not args.other:
        print("error[usage]: pca cosine needs --other", file=sys.stderr)
        return 2
    try:
        args.fn(args)
    except FreePCAError as e:
        print(f"error[{type(e).__name__}]: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error[io]: {e}", file=sys.stderr)
        return 9
    except ValueError as e:
        print(f"error[value]: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
