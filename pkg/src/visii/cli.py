"""Command-line surface.

Exit codes: 0 success, 1 usage error, 2 backend error, 3 data error. Every
failure prints a single `error: ...` line on stderr so scripts can parse it.
"""

from __future__ import annotations

import argparse
import json
import sys

from .backend import load_backend
from .editor import GuidanceConfig, apply_instruction
from .errors import BackendError, DataError, UsageError, VisiiError
from .images import load_image, save_png
from .instruction import InstructionEmbedding
from .inversion import ImagePair, InversionConfig, checkpoint, invert
from .metrics import evaluate_dataset


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; the CLI contract wants 1."""

    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="visii", description="Learn and apply visual editing instructions.")
    p.add_argument("--backend-config", default=None,
                   help="backend config JSON (default: $VISII_BACKEND_CONFIG or built-in)")
    sub = p.add_subparsers(dest="command", required=True)

    inv = sub.add_parser("invert", help="learn an instruction from before/after pairs",
                         description="Optimize an instruction embedding from image pairs.")
    inv.add_argument("--before", action="append", default=[], metavar="PNG",
                     help="example image before the edit (repeatable)")
    inv.add_argument("--after", action="append", default=[], metavar="PNG",
                     help="the same image after the edit (repeatable, same order)")
    inv.add_argument("--out", required=True, help="output .visii path")
    inv.add_argument("--init-text", default="edit the image",
                     help='text initializing the trainable rows (default "edit the image")')
    inv.add_argument("--k", type=int, default=None, help="trainable row count (default: from text)")
    inv.add_argument("--steps", type=int, default=1000, help="optimization steps (default 1000)")
    inv.add_argument("--lmse", type=float, default=4.0, help="reconstruction weight (default 4)")
    inv.add_argument("--lclip", type=float, default=0.1, help="alignment weight (default 0.1)")
    inv.add_argument("--lr", type=float, default=1e-3, help="learning rate (default 0.001)")
    inv.add_argument("--seed", type=int, default=0, help="base seed for noise and init (default 0)")
    inv.add_argument("--no-clip-loss", action="store_true",
                     help="drop the alignment term (reconstruction only)")

    app = sub.add_parser("apply", help="apply a learned instruction to an image",
                         description="Edit an image with a stored instruction.")
    app.add_argument("--instruction", required=True, help=".visii file")
    app.add_argument("--image", required=True, help="input image (PNG)")
    app.add_argument("--out", required=True, help="output PNG path (sidecar JSON written next to it)")
    app.add_argument("--extra-text", default="", help="text appended after the learned rows")
    app.add_argument("--noise", choices=("fixed", "random"), default="fixed",
                     help="fixed replays the training noise; random keys on --run-seed (default fixed)")
    app.add_argument("--text-scale", type=float, default=7.5, help="text guidance scale (default 7.5)")
    app.add_argument("--image-scale", type=float, default=1.5, help="image guidance scale (default 1.5)")
    app.add_argument("--sampler-steps", type=int, default=100, help="sampler steps (default 100)")
    app.add_argument("--sampler", choices=("deterministic", "ancestral"), default="deterministic",
                     help="deterministic replays exactly; ancestral injects noise (default deterministic)")
    app.add_argument("--run-seed", type=int, default=0, help="noise seed for --noise random (default 0)")

    ev = sub.add_parser("eval", help="score a manifest of editing directions",
                        description="Write results.csv and report.json for a manifest.")
    ev.add_argument("--manifest", required=True, help="manifest JSON")
    ev.add_argument("--out-dir", required=True, help="output directory")
    ev.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")

    srv = sub.add_parser("serve", help="run the HTTP service",
                         description="Serve the inversion/apply job API.")
    srv.add_argument("--host", default="127.0.0.1", help="bind address (default 127.0.0.1)")
    srv.add_argument("--port", type=int, default=8000, help="port (default 8000)")
    srv.add_argument("--store", default="./visii-store", help="instruction/result store (default ./visii-store)")
    return p


def _fmt(x: float) -> str:
    return f"{x:g}"


def cmd_invert(args) -> int:
    if not args.before or not args.after:
        raise UsageError("need at least one --before/--after pair")
    if len(args.before) != len(args.after):
        raise UsageError(
            f"{len(args.before)} --before images but {len(args.after)} --after images"
        )
    backend = load_backend(config_path=args.backend_config)
    pairs = [
        ImagePair(load_image(b), load_image(a), ident=b)
        for b, a in zip(args.before, args.after)
    ]
    config = InversionConfig(
        n_steps=args.steps,
        n_timesteps=backend.timesteps,
        lambda_mse=args.lmse,
        lambda_clip=args.lclip,
        learning_rate=args.lr,
        seed=args.seed,
        use_clip_loss=not args.no_clip_loss,
        init_text=args.init_text,
        k=args.k,
    )
    print(
        f"N={config.n_steps} lmse={_fmt(config.lambda_mse)} "
        f"lclip={_fmt(config.lambda_clip)} lr={_fmt(config.learning_rate)}"
    )
    instr, history = invert(pairs, config, backend)
    csv_path = checkpoint(instr, history, args.out)
    if history:
        last = history[-1]
        print(f"final total={last.total:.6f} mse={last.mse:.6f} clip={last.clip:.6f}")
    print(f"wrote {args.out} and {csv_path}")
    return 0


def cmd_apply(args) -> int:
    backend = load_backend(config_path=args.backend_config)
    instr = InstructionEmbedding.load(args.instruction)
    image = load_image(args.image)
    guidance = GuidanceConfig(
        text_scale=args.text_scale,
        image_scale=args.image_scale,
        sampler_steps=args.sampler_steps,
        noise_mode=args.noise,
        sampler=args.sampler,
        run_seed=args.run_seed,
    )
    result = apply_instruction(
        backend, instr, image, guidance,
        extra_text=args.extra_text, instruction_ref=args.instruction,
    )
    save_png(result.image, args.out)
    sidecar_path = args.out.rsplit(".", 1)[0] + ".json"
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(result.sidecar, fh, indent=2)
    print(f"wrote {args.out} and {sidecar_path}")
    return 0


def cmd_eval(args) -> int:
    backend = load_backend(config_path=args.backend_config)
    report = evaluate_dataset(
        args.manifest, args.out_dir,
        backend=backend if args.workers <= 1 else None,
        config=backend.config,
        workers=args.workers,
    )
    print(
        f"scored {report['n_records']} records "
        f"({report['n_ok']} ok, {report['n_flagged']} flagged) -> {args.out_dir}"
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(store_dir=args.store, config_path=args.backend_config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


_COMMANDS = {
    "invert": cmd_invert,
    "apply": cmd_apply,
    "eval": cmd_eval,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except VisiiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
