"""Command-line driver: locate, certify, replay, verify.

Subcommands wire the pipeline end to end: ``find-torus`` locates the
closed profile and writes the certificate (JSON) plus the profile curve
(CSV/SVG); ``gronwall-ledger`` replays the reference constant chains;
``jacobi`` and ``sphere-kernel`` render kernel verdicts for the torus and
sphere pieces; ``verify-all`` runs everything and succeeds only when all
six kernels are certified trivial; ``report`` renders a consolidated
JSON report as text.

Exit codes: 0 success, 1 failed verdicts, 2 usage or runtime errors.
Reports are deterministic for fixed config and inputs; volatile data
(timestamps) is isolated in the ``meta`` field.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import gronwall, jacobi, shooting, sphere
from .config import RunConfig, load_config

REPORT_SCHEMA_VERSION = 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    return str(obj)


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _meta(config: RunConfig):
    return {
        "generated_at": datetime.datetime.now(
            datetime.timezone.utc).isoformat(),
        "tool": "shrinktorus",
        "config": config.to_dict(),
    }


def _emit_formats(config: RunConfig):
    return {fmt.strip() for fmt in config.emit.split(",") if fmt.strip()}


def _locate(config: RunConfig):
    cert = shooting.find_torus(
        bracket_lo=config.bracket_lo, bracket_hi=config.bracket_hi,
        bisect_tol=config.certificate_tol, locate_tol=config.locate_tol,
        rtol=config.integration_rtol, atol=config.integration_atol,
        invert_tol=config.invert_tol)
    return cert


def _load_or_locate(args, config):
    cert_path = getattr(args, "certificate", None)
    if cert_path:
        return shooting.TorusCertificate.read_json(cert_path)
    return _locate(config)


def cmd_find_torus(args, config: RunConfig) -> int:
    try:
        cert = _locate(config)
    except shooting.BracketError as exc:
        print(f"bracket error: {exc}", file=sys.stderr)
        return 2
    os.makedirs(config.out_dir, exist_ok=True)
    formats = _emit_formats(config)
    cert.meta = _meta(config)
    cert_path = os.path.join(config.out_dir, "torus_certificate.json")
    cert.write_json(cert_path)
    written = [cert_path]
    profile = shooting.build_half_profile(cert.a0, cert.b0)
    if "csv" in formats:
        path = os.path.join(config.out_dir, "profile.csv")
        shooting.write_profile_csv(path, profile)
        written.append(path)
    if "svg" in formats:
        path = os.path.join(config.out_dir, "profile.svg")
        shooting.write_profile_svg(path, profile)
        written.append(path)
    for path in written:
        print(f"wrote {path}")
    for name, ok in cert.verdicts.items():
        print(f"  {name}: {'pass' if ok else 'FAIL'}")
    return 0 if cert.all_pass else 1


def _prepare_curve(cert, with_mode=True):
    profile = shooting.build_half_profile(cert.a0, cert.b0)
    curve = gronwall.CurveData.from_profile(profile)
    if with_mode:
        jacobi.attach_mode_data(curve, profile)
    return profile, curve


def cmd_gronwall_ledger(args, config: RunConfig) -> int:
    cert = _load_or_locate(args, config)
    _, curve = _prepare_curve(cert)
    regions = None
    if config.stage:
        region = config.stage.split("/", 1)[0]
        if region not in gronwall.STAGE_REGIONS:
            print(f"unknown stage {config.stage!r}; expected one of "
                  f"{gronwall.STAGE_REGIONS}", file=sys.stderr)
            return 2
        regions = {region}
    items = gronwall.replay_ledger(curve, slack=config.slack, regions=regions)
    print(gronwall.render_replay_table(items))
    os.makedirs(config.out_dir, exist_ok=True)
    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "slack": config.slack,
        "items": [vars(it) for it in items],
        "meta": _meta(config),
    }
    path = os.path.join(config.out_dir, "gronwall_ledger.json")
    _write_json(path, payload)
    print(f"wrote {path}")
    return 0


def _kernel_reports(cert, config: RunConfig):
    profile, curve = _prepare_curve(cert)
    top = jacobi.integrate_mode(jacobi.ModeProblem(0, profile, "top"))
    bot = jacobi.integrate_mode(jacobi.ModeProblem(0, profile, "bottom"))
    budgets = jacobi.error_budgets(profile, curve, cert, top, bot,
                                   rtol=config.integration_rtol)
    reports = {}
    for piece in jacobi.PIECES:
        reports[piece] = jacobi.kernel_verdict(profile, piece, budgets)
    sphere_budget = 1e-12 + 50.0 * config.integration_rtol
    for piece in sphere.SPHERE_PIECES:
        reports[piece] = sphere.sphere_kernel_check(piece, budget=sphere_budget)
    extras = {
        "budgets": budgets,
        "endpoints": {
            "top": [top.endpoint_value, top.endpoint_derivative],
            "bottom": [bot.endpoint_value, bot.endpoint_derivative],
            "det": jacobi.endpoint_matrix(top, bot).det,
        },
        "mode_cutoff": jacobi.mode_cutoff(profile),
        "h_zero_count": jacobi.h_zero_count(profile),
        "eigen_residual": jacobi.eigen_residual(profile),
    }
    return profile, curve, reports, extras


def cmd_jacobi(args, config: RunConfig) -> int:
    cert = _load_or_locate(args, config)
    profile, curve, reports, extras = _kernel_reports(cert, config)
    del profile, curve
    torus_reports = {p: reports[p] for p in jacobi.PIECES}
    for piece, rep in torus_reports.items():
        print(f"{piece}: {rep['verdict']}  "
              f"(modes {rep['modes_integrated']}, cutoff "
              f"{rep['mode_cutoff']:.4f})")
    ep = extras["endpoints"]
    print(f"order-zero endpoints: top ({ep['top'][0]:+.6f}, "
          f"{ep['top'][1]:+.6f})  bottom ({ep['bottom'][0]:+.6f}, "
          f"{ep['bottom'][1]:+.6f})  det {ep['det']:.6f}")
    os.makedirs(config.out_dir, exist_ok=True)
    payload = {"schema_version": REPORT_SCHEMA_VERSION,
               "pieces": torus_reports, **extras, "meta": _meta(config)}
    path = os.path.join(config.out_dir, "jacobi_verdicts.json")
    _write_json(path, payload)
    print(f"wrote {path}")
    ok = all(rep["verdict"] == "trivial" for rep in torus_reports.values())
    return 0 if ok else 1


def cmd_sphere_kernel(args, config: RunConfig) -> int:
    budget = 1e-12 + 50.0 * config.integration_rtol
    reports = {piece: sphere.sphere_kernel_check(piece, budget=budget)
               for piece in sphere.SPHERE_PIECES}
    for piece, rep in reports.items():
        print(f"{piece}: {rep['verdict']} (margin {rep['margin']:.4g})")
    os.makedirs(config.out_dir, exist_ok=True)
    payload = {"schema_version": REPORT_SCHEMA_VERSION,
               "pieces": reports, "meta": _meta(config)}
    path = os.path.join(config.out_dir, "sphere_verdicts.json")
    _write_json(path, payload)
    print(f"wrote {path}")
    ok = all(rep["verdict"] == "trivial" for rep in reports.values())
    return 0 if ok else 1


def _envelope_reports(curve):
    """Verify the assumed geodesic envelopes against the located curve."""
    an = curve.anchors
    out = []
    grids = {
        "TopX1": (np.linspace(0.0, 0.6, 400), curve.u_top, curve.du_top),
        "TopX2ToSphere": (np.linspace(an.y_sphere, an.u_top_switch, 400),
                          curve.f_top, curve.df_top),
        "TopX2SphereToCyl": (np.linspace(shooting.SQRT2, an.y_sphere, 400),
                             curve.f_top, curve.df_top),
        "BotX1": (np.linspace(0.0, 0.5, 400), curve.u_bot, curve.du_bot),
        "BotX2ToCyl": (np.linspace(an.a0_bottom, shooting.SQRT2, 400),
                       curve.f_bot, curve.df_bot),
    }
    from .geometry import Chart, ProfileSegment
    for region, (grid, vfun, dfun) in grids.items():
        chart = Chart.GRAPH_X1 if region.endswith("X1") else Chart.GRAPH_X2
        seg = ProfileSegment.from_samples(chart, grid, vfun(grid), dfun(grid))
        for verdict in gronwall.verify_envelopes(
                seg, gronwall.stage_envelopes(region, an)):
            verdict["region"] = region
            out.append(verdict)
    return out


def cmd_verify_all(args, config: RunConfig) -> int:
    try:
        cert = _load_or_locate(args, config)
    except FileNotFoundError as exc:
        print(f"certificate not found: {exc}", file=sys.stderr)
        return 2
    except shooting.BracketError as exc:
        print(f"bracket error: {exc}", file=sys.stderr)
        return 2
    profile, curve, reports, extras = _kernel_reports(cert, config)
    del profile
    envelope_results = _envelope_reports(curve)
    regions = {config.stage.split("/", 1)[0]} if config.stage else None
    replay_items = gronwall.replay_ledger(curve, slack=config.slack,
                                          regions=regions)
    n_fail = sum(1 for it in replay_items if it.verdict == "FAIL")
    kernels = {piece: reports[piece]["verdict"]
               for piece in ("S1", "S2", "S3", "S4", "S5", "S6")}
    trivial = sum(1 for v in kernels.values() if v == "trivial")
    payload = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "certificate": cert.to_dict(),
        "kernels": kernels,
        "kernel_reports": reports,
        "kernel_extras": extras,
        "envelopes": envelope_results,
        "replay": {
            "slack": config.slack,
            "n_items": len(replay_items),
            "n_fail": n_fail,
            "items": [vars(it) for it in replay_items],
        },
        "meta": _meta(config),
    }
    os.makedirs(config.out_dir, exist_ok=True)
    path = os.path.join(config.out_dir, "verify_all.json")
    _write_json(path, payload)
    for piece in ("S1", "S2", "S3", "S4", "S5", "S6"):
        print(f"{piece}: {kernels[piece]}")
    print(f"kernel summary: {trivial}/6 trivial")
    print(f"replay: {len(replay_items)} constants, {n_fail} flagged")
    print(f"wrote {path}")
    return 0 if trivial == 6 else 1


def cmd_report(args, config: RunConfig) -> int:
    with open(args.input) as fh:
        payload = json.load(fh)
    print("verification report")
    print("===================")
    cert = payload.get("certificate", {})
    if cert:
        loc = cert["located"]
        print(f"located heights: a0 = {loc['a0']:.9f}, b0 = {loc['b0']:.9f}")
        sc = cert["sphere_crossing"]
        print(f"sphere crossing: ({sc['x']:.6f}, {sc['y']:.6f}), "
              f"angle {sc['angle']:.6f}")
        for name, ok in sorted(cert["verdicts"].items()):
            print(f"  interval {name}: {'pass' if ok else 'FAIL'}")
    kernels = payload.get("kernels", {})
    for piece in sorted(kernels):
        print(f"kernel {piece}: {kernels[piece]}")
    replay = payload.get("replay", {})
    if replay:
        print(f"replay: {replay['n_items']} constants audited, "
              f"{replay['n_fail']} flagged at slack {replay['slack']}")
        for item in replay.get("items", []):
            if item["verdict"] == "FAIL":
                print(f"  flagged: {item['stage']}/{item['kind']} "
                      f"{item['name']}: reference {item['ref']:.6g}, "
                      f"recomputed {item['ours']:.6g}")
    envs = payload.get("envelopes", [])
    if envs:
        bad = [e for e in envs if not e["passed"]]
        print(f"envelopes: {len(envs) - len(bad)}/{len(envs)} verified")
        for e in bad:
            print(f"  violated: {e['region']}/{e['name']} by "
                  f"{e['max_violation']:.3g}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="shrinktorus",
        description="Validated numerics for the self-shrinking torus and "
                    "the stability-operator kernels of its union with the "
                    "round sphere.")
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--tol", type=float, dest="tol",
                        help="integration relative tolerance")
    parser.add_argument("--bracket", help="shooting bracket LO:HI")
    parser.add_argument("--slack", type=float,
                        help="replay slack factor (>= 1)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--emit", help="comma list of json,csv,svg")
    parser.add_argument("--stage", help="restrict ledger replay to one stage")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("find-torus", help="locate the torus, write certificate")
    for name in ("gronwall-ledger", "jacobi", "verify-all"):
        p = sub.add_parser(name)
        p.add_argument("--certificate", help="reuse an existing certificate")
    sub.add_parser("sphere-kernel", help="closed-form sphere-piece verdicts")
    p = sub.add_parser("report", help="render a consolidated report as text")
    p.add_argument("input", help="path to verify_all.json")
    return parser


_COMMANDS = {
    "find-torus": cmd_find_torus,
    "gronwall-ledger": cmd_gronwall_ledger,
    "jacobi": cmd_jacobi,
    "sphere-kernel": cmd_sphere_kernel,
    "verify-all": cmd_verify_all,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "integration_rtol": args.tol,
        "slack": args.slack,
        "out_dir": args.out,
        "emit": args.emit,
        "stage": args.stage,
    }
    if args.bracket:
        try:
            lo, _, hi = args.bracket.partition(":")
            overrides["bracket_lo"] = float(lo)
            overrides["bracket_hi"] = float(hi)
        except ValueError:
            print(f"bad --bracket value {args.bracket!r}; expected LO:HI",
                  file=sys.stderr)
            return 2
    try:
        config = load_config(args.config, **overrides)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return _COMMANDS[args.command](args, config)


if __name__ == "__main__":
    sys.exit(main())
