"""Command-line front end.

One executable, subcommand per workflow. Exit codes are part of the
contract: 0 success, 2 validation problem, 3 backend unavailable,
4 partial failure (some cells of a batch failed but the run completed).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backends import get_backend
from .errors import BackendUnavailable, LatentDiffError, ValidationError
from .field_map import (
    DEFAULT_THRESHOLDS,
    build_field_map,
    export_field_map,
)
from .harness import (
    load_motion_spec,
    load_pedia_schedule,
    load_sweep_spec,
    replay_manifest,
    run_infinitepedia,
    run_latent_motion,
    run_sweep,
)
from .jobs import load_job_file
from .runner import run_generation
from .tensors import latent_digest

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BACKEND = 3
EXIT_PARTIAL = 4


def _counters_line(counters: dict[str, int]) -> str:
    return " ".join(f"{k}={v}" for k, v in sorted(counters.items()))


def _cmd_generate(args) -> int:
    job, file_out = load_job_file(args.job)
    out_dir = args.out or file_out
    if out_dir is None:
        raise ValidationError(
            "no output directory: pass --out or set output_dir in the job file",
            field="output_dir",
        )
    backend = get_backend(job.backend_id)
    result = run_generation(backend, job, out_dir)
    print(f"digest  {result.job_digest}")
    print(f"latent  {latent_digest(result.final_latent)}")
    print(f"hooks   {_counters_line(result.hook_counters)}")
    print(f"wrote   {Path(out_dir).resolve()}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    spec = load_sweep_spec(args.spec)
    report = run_sweep(spec, args.out)
    print(f"metric            {report.metric}")
    print(f"alphas            {', '.join(format(a, 'g') for a in report.alphas)}")
    print(
        f"endpoint max diff {report.endpoint_max_diff:.3e} "
        f"(agreement: {'yes' if report.endpoint_agreement else 'NO'})"
    )
    if report.mid_divergence is not None:
        print(f"mode divergence   {report.mid_divergence:.3e} at alpha {report.mid_alpha:g}")
    cells_ok = len(report.cells) - report.failures
    print(f"cells             {cells_ok} ok, {report.failures} failed")
    print(f"wrote             {Path(args.out).resolve()}")
    return EXIT_PARTIAL if report.failures else EXIT_OK


def _cmd_pedia(args) -> int:
    schedule = load_pedia_schedule(args.schedule)
    pages = run_infinitepedia(schedule, args.out)
    failed = len(schedule.pairs) - len(pages)
    for page in pages:
        print(f"page {'+'.join(page['concepts'])}: digest {page['digest']}")
    print(f"pages   {len(pages)} ok, {failed} failed")
    print(f"wrote   {Path(args.out).resolve()}")
    return EXIT_PARTIAL if failed else EXIT_OK


def _cmd_motion(args) -> int:
    spec = load_motion_spec(args.spec)
    points = run_latent_motion(spec, args.out)
    failed = sum(1 for p in points if p.get("failed"))
    for p in points:
        where = "inside" if p["inside"] else "OUTSIDE"
        status = "failed: " + p["error"] if p.get("failed") else p["digest"]
        print(f"{p['name']} [{where} hull] {status}")
    print(f"points  {len(points) - failed} ok, {failed} failed")
    print(f"wrote   {Path(args.out).resolve()}")
    return EXIT_PARTIAL if failed else EXIT_OK


def _cmd_fieldmap(args) -> int:
    job, _ = load_job_file(args.template)
    field_map = build_field_map(
        job,
        axis=args.axis,
        resolution=args.resolution,
        scorer=args.scorer,
        thresholds=(args.t_low, args.t_high),
        workers=args.workers,
    )
    export_field_map(field_map, args.out)
    counts = field_map.region_counts()
    print(f"samples {len(field_map.samples)} " + _counters_line(counts))
    failed = sum(1 for s in field_map.samples if s.failed)
    print(f"wrote   {Path(args.out).resolve()}")
    return EXIT_PARTIAL if failed else EXIT_OK


def _cmd_replay(args) -> int:
    checks = replay_manifest(args.dir)
    bad = 0
    for check in checks:
        mark = "ok " if check["ok"] else "DIFF"
        print(f"{mark} {check['name']} {check['actual']}")
        if not check["ok"]:
            bad += 1
    print(f"replayed {len(checks)} jobs, {bad} mismatched")
    return EXIT_PARTIAL if bad else EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app, default_ui_dir

    ui_dir = args.ui_dir if args.ui_dir else default_ui_dir()
    app = create_app(
        state_file=args.state_file,
        cors_origin=args.cors_origin,
        workers=args.workers,
        fieldmap_cap=args.fieldmap_cap,
        ui_dir=ui_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentdiff",
        description="latent-space operator toolkit: generation, sweeps, "
        "field maps and an exploration service",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run one job file")
    p.add_argument("--job", required=True, help="path to a .job.json file")
    p.add_argument("--out", help="output directory (overrides the job file)")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("sweep", help="alpha sweep comparing merge modes")
    p.add_argument("--spec", required=True, help="sweep spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("pedia", help="hybrid-concept encyclopedia pages")
    p.add_argument("--schedule", required=True, help="schedule JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_pedia)

    p = sub.add_parser("motion", help="traverse a hull over motion-frame controls")
    p.add_argument("--spec", required=True, help="motion spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_motion)

    p = sub.add_parser("fieldmap", help="map an operator's weight space")
    p.add_argument("--template", required=True, help="job file used as the template")
    p.add_argument("--axis", default="concept", choices=["concept", "shape"])
    p.add_argument("--resolution", type=int, default=9)
    p.add_argument("--scorer", default="latent-mean-distance")
    p.add_argument("--t-low", type=float, default=DEFAULT_THRESHOLDS[0])
    p.add_argument("--t-high", type=float, default=DEFAULT_THRESHOLDS[1])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output .fieldmap.json path")
    p.set_defaults(func=_cmd_fieldmap)

    p = sub.add_parser("replay", help="re-run a manifest and verify latents")
    p.add_argument("--dir", required=True, help="directory holding manifest.json")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("serve", help="run the exploration HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--state-file", help="append-only JSONL persistence file")
    p.add_argument("--cors-origin", help="origin allowed to call the API")
    p.add_argument("--workers", type=int, default=None, help="generation worker threads")
    p.add_argument("--fieldmap-cap", type=int, default=33)
    p.add_argument("--ui-dir", help="directory with the built UI bundle")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BackendUnavailable as exc:
        print(f"backend unavailable: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except LatentDiffError as exc:
        field = getattr(exc, "field", None)
        where = f" (field: {field})" if field else ""
        print(f"{type(exc).__name__}: {exc}{where}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
