"""Command-line interface: ``segment``, ``prune``, ``flops`` and ``visualize``.

Exit codes: 0 success, 1 input or usage error, 2 internal error. Results go
to files; diagnostics go to stderr. ``ALTP_SEED`` is accepted but ignored,
because every stage is deterministic.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .ddc import build_token_grid
from .flops import FlopsConfig, remaining_ratio
from .io import (
    ImageLoadError,
    ImportanceError,
    RunManifest,
    dumps,
    emit_result,
    file_sha256,
    load_image,
    load_importance,
    read_result,
    resize_bilinear,
    write_label_pgm,
)
from .model import PruneConfig, SuperpixelParams
from .render import OVERLAY_KINDS, render_overlay, render_report
from .selector import prune_traced
from .superpixel import slic_segment

log = logging.getLogger("altp")

MODE_NAMES = {"altp": "altp", "ddc": "ddc_uniform", "global": "global_topk"}
BUDGET_NAMES = {"exact": "exact_budget", "ceiling": "paper_ceiling"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _grid_spec(text):
    try:
        rows, cols = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 24x24, got {text!r}") from None
    if rows < 1 or cols < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be >= 1")
    return rows, cols


def _ratio(text):
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {text}")
    return value


def _unit(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in [0, 1], got {text}")
    return value


def _alpha(text):
    value = float(text)
    if not value > 1.0:
        raise argparse.ArgumentTypeError(f"must be > 1, got {text}")
    return value


def _add_superpixel_args(p):
    p.add_argument("--superpixels", "-N", type=int, default=10, help="target superpixel count N")
    p.add_argument("--compactness", "-C", type=float, default=5.0, help="SLIC compactness C")
    p.add_argument("--sigma", type=float, default=1.0, help="Gaussian pre-smoothing (pixels)")
    p.add_argument("--max-iterations", type=int, default=10)


def build_parser():
    parser = _Parser(prog="altp", description="Superpixel-aware visual token pruning.")
    parser.add_argument("--version", action="version", version=f"altp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("segment", help="run SLIC and write a label map plus overlay")
    p.add_argument("--image", required=True)
    _add_superpixel_args(p)
    p.add_argument("--out", default="altp_out")

    p = sub.add_parser("prune", help="select visual tokens for one image")
    p.add_argument("--image", required=True)
    p.add_argument("--grid", type=_grid_spec, default=(24, 24), help="token grid ROWSxCOLS")
    p.add_argument("--patch-size", type=int, help="force square patches of this many pixels")
    p.add_argument("--keep-ratio", "-r", type=_ratio, required=True)
    p.add_argument("--alpha", type=_alpha, default=1.5)
    p.add_argument("--mode", choices=sorted(MODE_NAMES), default="altp")
    p.add_argument("--budget", choices=sorted(BUDGET_NAMES), default="exact")
    p.add_argument("--importance", help="JSON importance document")
    p.add_argument("--variance-space", choices=("rgb", "lab"), default="rgb")
    _add_superpixel_args(p)
    p.add_argument("--prune-layer", type=int, default=2, help="layer K for the FLOPs estimate")
    p.add_argument("--figures", action="store_true", help="also write report.png")
    p.add_argument("--out", default="altp_out")

    p = sub.add_parser("flops", help="analytic FLOPs remaining after pruning")
    p.add_argument("--d", type=int, default=4096, help="hidden size")
    p.add_argument("--m", type=int, default=11008, help="FFN intermediate size")
    p.add_argument("--layers", type=int, default=32)
    p.add_argument("--prune-layer", type=int, default=2)
    p.add_argument("--tokens", type=int, default=576)
    p.add_argument("--drop-ratio", type=_unit, default=0.0)
    p.add_argument("--out", help="write the JSON report here instead of stdout")

    p = sub.add_parser("visualize", help="re-render overlays from a saved result")
    p.add_argument("--result", required=True)
    p.add_argument("--image", help="override the image path stored in the manifest")
    p.add_argument("--figures", action="store_true")
    p.add_argument("--out", default=None, help="defaults to the result's directory")
    return parser


def _encoder_view(image, rows, cols, patch_size=None):
    """Resize the image so the token grid tiles it exactly."""
    if patch_size is not None:
        if patch_size < 1:
            raise UsageError("--patch-size must be >= 1")
        ph = pw = patch_size
    else:
        native = build_token_grid(image.width, image.height, rows, cols)
        ph, pw = native.patch_height, native.patch_width
    view = resize_bilinear(image, cols * pw, rows * ph)
    return view, build_token_grid(view.width, view.height, rows, cols)


def _superpixel_params(args):
    return SuperpixelParams(args.superpixels, args.compactness, args.sigma, args.max_iterations)


def cmd_segment(args):
    image = load_image(args.image)
    params = _superpixel_params(args)
    spmap = slic_segment(image, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_label_pgm(out / "labels.pgm", spmap)
    render_overlay(image, spmap, None, None, "segments", out / "segments.ppm")
    doc = {
        "tool": "altp",
        "tool_version": __version__,
        "input_image": str(args.image),
        "input_sha256": file_sha256(args.image),
        "superpixel": params.to_dict(),
        "segmentation": spmap.to_dict(),
    }
    (out / "segmentation.json").write_text(dumps(doc) + "\n", encoding="utf-8")
    log.info("%d regions written to %s", spmap.region_count, out)
    return 0


def _render_all(out, view, spmap, result, grid, figures, title):
    for kind in OVERLAY_KINDS:
        render_overlay(view, spmap, result, grid, kind, out / f"{kind}.ppm")
    if figures:
        render_report(view, spmap, result, grid, out / "report.png", title=title)


def cmd_prune(args):
    rows, cols = args.grid
    image = load_image(args.image)
    view, grid = _encoder_view(image, rows, cols, args.patch_size)
    config = PruneConfig(
        keep_ratio=args.keep_ratio,
        alpha=args.alpha,
        mode=MODE_NAMES[args.mode],
        budget_policy=BUDGET_NAMES[args.budget],
        superpixel=_superpixel_params(args),
    )
    importance = None
    if args.importance:
        importance = load_importance(args.importance, grid.total_tokens)
    trace = prune_traced(view, grid, importance, config, variance_space=args.variance_space)

    v_total = grid.total_tokens
    flops_cfg = FlopsConfig(
        prune_layer=args.prune_layer,
        tokens_before=v_total,
        drop_ratio=1.0 - len(trace.result.kept_indices) / v_total,
    )
    result = trace.result.with_flops(remaining_ratio(flops_cfg).remaining)
    manifest = RunManifest(
        input_image=str(args.image),
        input_sha256=file_sha256(args.image),
        config=config,
        grid=grid,
        tool_version=__version__,
        importance_path=str(args.importance) if args.importance else None,
        importance_sha256=file_sha256(args.importance) if args.importance else None,
        extra={
            "importance_source": trace.importance.source,
            "variance_space": args.variance_space,
            "source_size": [image.width, image.height],
            "flops": flops_cfg.to_dict(),
        },
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_result(result, manifest, out / "result.json", trace.segmentation)
    _render_all(out, view, trace.segmentation, result, grid, args.figures, f"{config.mode}, r={config.keep_ratio}")
    log.info("kept %d of %d tokens across %d regions", len(result.kept_indices), v_total, result.region_count)
    return 0


def cmd_flops(args):
    cfg = FlopsConfig(
        hidden_size=args.d,
        ffn_intermediate=args.m,
        num_layers=args.layers,
        prune_layer=args.prune_layer,
        tokens_before=args.tokens,
        drop_ratio=args.drop_ratio,
    )
    ratio = remaining_ratio(cfg)
    doc = dict(cfg.to_dict(), tokens_after=cfg.tokens_after, remaining=ratio.remaining, reduction=ratio.reduction)
    text = dumps(doc) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_visualize(args):
    result, manifest, spmap = read_result(args.result)
    if spmap is None:
        raise UsageError("result document has no segmentation to render")
    image_path = args.image or manifest.input_image
    if file_sha256(image_path) != manifest.input_sha256:
        log.warning("%s differs from the image recorded in the manifest", image_path)
    grid = manifest.grid
    view = resize_bilinear(load_image(image_path), grid.image_width, grid.image_height)
    out = Path(args.out) if args.out else Path(args.result).parent
    out.mkdir(parents=True, exist_ok=True)
    _render_all(out, view, spmap, result, grid, args.figures, f"{manifest.config.mode}, r={manifest.config.keep_ratio}")
    return 0


COMMANDS = {"segment": cmd_segment, "prune": cmd_prune, "flops": cmd_flops, "visualize": cmd_visualize}


def main(argv=None) -> int:
    logging.basicConfig(format="altp: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        log.setLevel(logging.INFO if args.verbose else logging.WARNING)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ImageLoadError, ImportanceError, ValueError, OSError) as exc:
        print(f"altp: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"altp: internal error: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
