"""Command-line entry point for the pipeline and the review server.

Exit codes: 0 success, 1 usage error, 2 pipeline error, 3 provider error.
The project root comes from --config, the RESTORY_CONFIG environment
variable, or the current directory, in that order.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import shutil
import socket
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

from restory import __version__
from restory.errors import (
    ConfigError,
    PortInUse,
    ProviderError,
    RestoryError,
)
from restory.fixtures import create_fixture_project
from restory.project import PROVIDER_ROLES, Project, load_project_config
from restory.similarity import matrix_to_tsv


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1, not argparse's default 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="restory", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--config",
        metavar="PATH",
        help="project root (defaults to $RESTORY_CONFIG, then the current directory)",
    )
    parser.add_argument(
        "--mock-providers",
        action="store_true",
        help="override every provider with its deterministic mock",
    )
    parser.add_argument("--workers", type=int, metavar="N", help="worker threads")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("fixture", help="write the bundled demo project")
    p.add_argument("dest", metavar="DIR")

    p = sub.add_parser("ingest", help="sample and crop one source's frames")
    p.add_argument("source_id", metavar="ID")
    p.add_argument("--rate", metavar="HZ", help="sampling rate override")
    p.add_argument("--force", action="store_true", help="re-ingest even if stored")

    p = sub.add_parser("caption", help="caption one source's frames")
    p.add_argument("source_id", metavar="ID")

    p = sub.add_parser("align", help="align a reference storyboard with footage")
    p.add_argument("reference_id", metavar="REFERENCE")
    p.add_argument("video_id", metavar="VIDEO")
    p.add_argument("--alpha", type=float)
    p.add_argument("--strategy", choices=("greedy", "monotone"))
    p.add_argument("--tsv", metavar="PATH", help="also export the matrix as TSV")

    p = sub.add_parser("generate", help="run the full pipeline to a storyboard")
    p.add_argument("reference_id", metavar="REFERENCE")
    p.add_argument("video_id", metavar="VIDEO")
    p.add_argument("--alpha", type=float)
    p.add_argument("--strategy", choices=("greedy", "monotone"))
    p.add_argument("--rate", metavar="HZ", help="sampling rate override")

    p = sub.add_parser("render", help="re-render a stored storyboard")
    p.add_argument("storyboard_id", metavar="ID")
    p.add_argument(
        "--format", default="html", choices=("manifest", "html", "markdown")
    )

    p = sub.add_parser("import-video", help="decode a container file to a frame dir")
    p.add_argument("video_file", metavar="FILE")
    p.add_argument("--id", required=True, metavar="ID")
    p.add_argument("--fps", type=float, default=2.0, help="extraction rate")

    p = sub.add_parser("serve", help="serve the review API and UI")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", metavar="DIR", help="static UI directory to serve at /")

    return parser


def _project_root(args: argparse.Namespace) -> Path:
    if args.config:
        return Path(args.config)
    env = os.environ.get("RESTORY_CONFIG")
    if env:
        return Path(env)
    return Path.cwd()


def _open(args: argparse.Namespace) -> Project:
    config = load_project_config(_project_root(args))
    if args.mock_providers:
        config = dataclasses.replace(
            config, providers=dict.fromkeys(PROVIDER_ROLES, "mock")
        )
    if args.workers:
        config = dataclasses.replace(config, workers=args.workers)
    return Project(config=config)


def _check_alpha_flag(alpha: float | None) -> None:
    if alpha is not None and not 0.0 <= alpha <= 1.0:
        raise UsageError(f"--alpha must be in [0, 1], got {alpha}")


def _parse_rate(value: str | None) -> Fraction | None:
    if value is None:
        return None
    try:
        rate = Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"invalid --rate: {value}") from exc
    if rate <= 0:
        raise UsageError("--rate must be positive")
    return rate


def _cmd_fixture(args: argparse.Namespace) -> int:
    root = create_fixture_project(Path(args.dest))
    print(f"fixture project written to {root}")
    return 0


def _cmd_ingest(args: argparse.Namespace) -> int:
    project = _open(args)
    records = project.ingest(
        args.source_id, rate_hz=_parse_rate(args.rate), force=args.force
    )
    print(f"{len(records)} frames ingested")
    return 0


def _cmd_caption(args: argparse.Namespace) -> int:
    project = _open(args)
    captions = project.caption(args.source_id)
    print(f"{len(captions)} frames captioned")
    return 0


def _print_slots(outcome) -> None:
    for slot in outcome.alignment.slots:
        print(
            f"slot {slot.slot_index}: frame {slot.frame_index} "
            f"(weighted {slot.breakdown.weighted_sim:.4f})"
        )
    print(f"total score {outcome.alignment.total_score:.4f}")


def _cmd_align(args: argparse.Namespace) -> int:
    _check_alpha_flag(args.alpha)
    project = _open(args)
    cfg = project.alignment_config(alpha=args.alpha, strategy=args.strategy)
    alignment_id, result, matrix = project.align(
        args.reference_id, args.video_id, cfg
    )
    for slot in result.slots:
        print(
            f"slot {slot.slot_index}: frame {slot.frame_index} "
            f"(weighted {slot.breakdown.weighted_sim:.4f})"
        )
    print(f"total score {result.total_score:.4f}")
    print(f"alignment id {alignment_id}")
    if args.tsv:
        Path(args.tsv).write_text(matrix_to_tsv(matrix), encoding="utf-8")
        print(f"matrix TSV written to {args.tsv}")
    return 0


def _cmd_generate(args: argparse.Namespace) -> int:
    _check_alpha_flag(args.alpha)
    project = _open(args)
    outcome = project.generate(
        args.reference_id,
        args.video_id,
        alpha=args.alpha,
        strategy=args.strategy,
        rate_hz=_parse_rate(args.rate),
    )
    _print_slots(outcome)
    print(f"manifest: {outcome.manifest_path}")
    print(f"html: {outcome.html_path}")
    return 0


def _cmd_render(args: argparse.Namespace) -> int:
    from restory import storyboard as storyboard_mod

    project = _open(args)
    board = project.load_storyboard(args.storyboard_id)
    paths = storyboard_mod.render(
        board,
        args.format,
        project.storyboard_dir(board.id),
        image_root=project.root,
    )
    for path in paths:
        print(path)
    return 0


def _cmd_import_video(args: argparse.Namespace) -> int:
    """Decode a container file into videos/<id>/ with ffmpeg."""
    project_root = _project_root(args)
    source = Path(args.video_file)
    if not source.is_file():
        raise RestoryError(f"video file not found: {source}")
    if shutil.which("ffmpeg") is None:
        raise RestoryError(
            "ffmpeg is required to decode container formats; "
            "provide a frame directory with frames.json instead"
        )
    dest = project_root / "videos" / args.id
    dest.mkdir(parents=True, exist_ok=True)
    pattern = dest / "frame_%05d.png"
    subprocess.run(
        [
            "ffmpeg",
            "-loglevel",
            "error",
            "-i",
            str(source),
            "-vf",
            f"fps={args.fps}",
            str(pattern),
        ],
        check=True,
    )
    step_ms = round(1000 / args.fps)
    frames = [
        {"file": path.name, "t_ms": index * step_ms}
        for index, path in enumerate(sorted(dest.glob("frame_*.png")))
    ]
    if not frames:
        raise RestoryError(f"ffmpeg produced no frames from {source}")
    manifest = {"id": args.id, "frames": frames, "ego_motion": []}
    (dest / "frames.json").write_text(
        json.dumps(manifest, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    print(f"{len(frames)} frames extracted to {dest}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from restory.server import create_app

    project = _open(args)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, args.port))
    except OSError as exc:
        raise PortInUse(f"{args.host}:{args.port} is already bound") from exc
    finally:
        probe.close()

    ui_dir = Path(args.ui) if args.ui else None
    app = create_app(project, ui_dir=ui_dir)
    print(f"serving on http://{args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "fixture": _cmd_fixture,
    "ingest": _cmd_ingest,
    "caption": _cmd_caption,
    "align": _cmd_align,
    "generate": _cmd_generate,
    "render": _cmd_render,
    "import-video": _cmd_import_video,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a command is required (see --help)")
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RestoryError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return 2
    except subprocess.CalledProcessError as exc:
        print(f"pipeline error: external tool failed ({exc})", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
