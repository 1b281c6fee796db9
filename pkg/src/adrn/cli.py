"""Command-line interface for the denoising pipeline.

Subcommands cover the full workflow: ``synth`` (make a synthetic scene),
``simulate`` (add noise per an experiment manifest), ``train``, ``denoise``,
``evaluate``, and ``render``. Exit codes: 0 on success, 2 for invalid inputs
or configuration, 3 for runtime failures such as diverged training.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .cube import (
    CubeFormatError,
    HsiCube,
    Region,
    SplitSpec,
    default_split,
    load_cube,
    normalize_per_band,
    save_cube,
)
from .inference import denoise_cube
from .metrics import evaluate, report_csv, report_table
from .model import (
    AdrnModel,
    CheckpointError,
    ModelConfig,
    init_params,
    load_checkpoint,
)
from .noise import NoiseSpec, apply_noise, save_noise_spec
from .synthetic import make_synthetic_cube
from .training import TrainConfig, TrainingDivergedError, build_dataset, train

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3


@dataclass
class Manifest:
    """One experiment: scene, split, noise levels, model, training, outputs."""

    cube: Path
    output_dir: Path
    noise: list[NoiseSpec]
    model: ModelConfig
    train: TrainConfig
    split: SplitSpec | None = None
    render_bands: tuple[int, int, int] = (57, 27, 17)
    init_seed: int = 0


def _region_from_json(data: dict, name: str) -> Region:
    try:
        rows = tuple(int(v) for v in data["rows"])
        cols = tuple(int(v) for v in data["cols"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"manifest {name} region must have integer 'rows' and 'cols' pairs ({exc})")
    if len(rows) != 2 or len(cols) != 2:
        raise ValueError(f"manifest {name} region ranges must be [start, stop] pairs")
    return Region(rows=rows, cols=cols)


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise ValueError(f"manifest not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})")
    if not isinstance(data, dict):
        raise ValueError(f"{path}: manifest must be a JSON object")
    known = {"cube", "output_dir", "noise", "model", "train", "split", "render_bands", "seed"}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"{path}: unknown manifest fields {sorted(unknown)}")
    if "cube" not in data:
        raise ValueError(f"{path}: manifest is missing 'cube'")

    base = path.parent
    cube = Path(data["cube"])
    if not cube.is_absolute():
        cube = base / cube
    output_dir = Path(data.get("output_dir", "out"))
    if not output_dir.is_absolute():
        output_dir = base / output_dir

    noise_entries = data.get("noise", [])
    if not isinstance(noise_entries, list):
        raise ValueError(f"{path}: 'noise' must be a list of noise specs")
    noise = [NoiseSpec.from_dict(entry) for entry in noise_entries]

    model_cfg = ModelConfig(**data.get("model", {}))
    train_data = dict(data.get("train", {}))
    if "k_adjacent" in train_data and train_data["k_adjacent"] != model_cfg.k_adjacent:
        raise ValueError(
            f"{path}: train.k_adjacent={train_data['k_adjacent']} conflicts with "
            f"model.k_adjacent={model_cfg.k_adjacent}"
        )
    train_data["k_adjacent"] = model_cfg.k_adjacent
    train_cfg = TrainConfig(**train_data)

    split = None
    if "split" in data:
        split = SplitSpec(
            train=_region_from_json(data["split"]["train"], "train"),
            test=_region_from_json(data["split"]["test"], "test"),
        )

    render_bands = tuple(data.get("render_bands", (57, 27, 17)))
    if len(render_bands) != 3:
        raise ValueError(f"{path}: render_bands must list exactly 3 band indices")

    return Manifest(
        cube=cube,
        output_dir=output_dir,
        noise=noise,
        model=model_cfg,
        train=train_cfg,
        split=split,
        render_bands=render_bands,
        init_seed=int(data.get("seed", 0)),
    )


def _resolve_split(manifest: Manifest, cube: HsiCube) -> SplitSpec:
    split = manifest.split or default_split(cube.rows, cube.cols)
    split.validate(cube.rows, cube.cols)
    return split


def cmd_synth(args) -> int:
    cube = make_synthetic_cube(
        rows=args.rows, cols=args.cols, bands=args.bands, blobs=args.blobs, seed=args.seed
    )
    save_cube(cube, args.output)
    print(f"wrote {args.rows}x{args.cols}x{args.bands} synthetic cube to {args.output}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    manifest = load_manifest(args.manifest)
    if not manifest.noise:
        raise ValueError("manifest has no noise specs to simulate")
    cube = normalize_per_band(load_cube(manifest.cube))
    manifest.output_dir.mkdir(parents=True, exist_ok=True)
    for spec in manifest.noise:
        noisy = apply_noise(cube, spec)
        out = manifest.output_dir / f"noisy_{spec.tag}.raw"
        save_cube(noisy, out)
        save_noise_spec(spec, out.with_suffix(".noise.json"))
        print(f"wrote {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    manifest = load_manifest(args.manifest)
    if not manifest.noise:
        raise ValueError("manifest has no noise specs to train against")
    cube = normalize_per_band(load_cube(manifest.cube))
    split = _resolve_split(manifest, cube)
    dataset = build_dataset(cube, manifest.noise, manifest.train, region=split.train)

    start_step = 0
    optimizer_state = None
    if args.resume:
        model, payload = load_checkpoint(args.resume, expect_config=manifest.model)
        start_step = int(payload.get("step", 0))
        optimizer_state = payload.get("optimizer_state")
        print(f"resuming from {args.resume} at step {start_step}")
    else:
        model = init_params(AdrnModel(manifest.model), seed=manifest.init_seed)

    manifest.output_dir.mkdir(parents=True, exist_ok=True)
    checkpoint = manifest.output_dir / "checkpoint.pt"
    loss_csv = manifest.output_dir / "loss.csv"
    resolved = {
        "cube": str(manifest.cube),
        "model": asdict(manifest.model),
        "train": asdict(manifest.train),
        "noise": [spec.to_dict() for spec in manifest.noise],
        "split": {
            "train": {"rows": list(split.train.rows), "cols": list(split.train.cols)},
            "test": {"rows": list(split.test.rows), "cols": list(split.test.cols)},
        },
        "seed": manifest.init_seed,
        "samples": len(dataset),
    }
    (manifest.output_dir / "resolved_config.json").write_text(json.dumps(resolved, indent=2) + "\n")

    print(f"training on {len(dataset)} samples for {manifest.train.total_steps} steps")
    train(
        model,
        dataset,
        manifest.train,
        loss_csv=loss_csv,
        checkpoint_path=checkpoint,
        start_step=start_step,
        optimizer_state=optimizer_state,
        quiet=args.quiet,
    )
    print(f"wrote {checkpoint}")
    return EXIT_OK


def cmd_denoise(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    cube = load_cube(args.input)
    denoised = denoise_cube(
        model, cube, tile=args.tile, overlap=args.overlap, progress=not args.quiet
    )
    save_cube(denoised, args.output)
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    clean = load_cube(args.clean)
    runs = [load_cube(p) for p in args.denoised]
    report = evaluate(clean, runs[0], extra_runs=runs[1:])
    table = report_table(report)
    print(table)
    if args.output:
        prefix = Path(args.output)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        report_csv(report, prefix.with_suffix(".csv"))
        prefix.with_suffix(".txt").write_text(table + "\n")
        print(f"wrote {prefix.with_suffix('.csv')} and {prefix.with_suffix('.txt')}")
    return EXIT_OK


def cmd_render(args) -> int:
    from PIL import Image

    cube = load_cube(args.input)
    bands = tuple(args.bands)
    for b in bands:
        if not 0 <= b < cube.bands:
            raise ValueError(f"render band {b} out of range for {cube.bands}-band cube")
    stack = np.stack([cube.band(b) for b in bands], axis=-1)
    rgb = np.clip(stack, 0.0, 1.0)
    img = np.round(rgb * 255.0).astype(np.uint8)
    Image.fromarray(img, mode="RGB").save(args.output)
    print(f"wrote {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adrn", description="Hyperspectral image denoising toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic hyperspectral cube")
    p.add_argument("--output", required=True, help="output cube path (.raw)")
    p.add_argument("--rows", type=int, default=64)
    p.add_argument("--cols", type=int, default=64)
    p.add_argument("--bands", type=int, default=16)
    p.add_argument("--blobs", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="write noisy cubes for every manifest noise spec")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train a model per an experiment manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--quiet", action="store_true", help="suppress per-step progress")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("denoise", help="denoise a cube with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--tile", type=int, default=64)
    p.add_argument("--overlap", type=int, default=10)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("evaluate", help="score denoised cubes against the clean reference")
    p.add_argument("--clean", required=True)
    p.add_argument("--denoised", required=True, nargs="+", help="one or more denoised cubes")
    p.add_argument("--output", help="prefix for report files (.csv and .txt)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("render", help="render three bands of a cube to an RGB PNG")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--bands", type=int, nargs=3, default=[57, 27, 17])
    p.set_defaults(func=cmd_render)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, CubeFormatError, CheckpointError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
