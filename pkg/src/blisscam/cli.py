"""Command-line client for the simulator service.

The CLI is a thin client: it builds a request model, posts it to the
service (in-process over an ASGI transport by default, or to a remote
server with --server), and writes the returned CSVs to the output
directory.

Run config files use `key = value` lines; scene parameters take a `scene.`
prefix (e.g. `scene.iris_radius = 60`). CLI flags override file values.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from .errors import BlissError, ConfigError
from .scene import parse_key_values

_RUN_KEYS = {
    "mode": str,
    "fps": float,
    "rate": float,
    "sigma": int,
    "seed": int,
    "n_frames": int,
    "roi_margin": int,
    "calibration_cycles": int,
    "input_dir": str,
    "coefficients": str,  # path to a coefficients key-value file
    "roi_weights": str,
    "vit_weights": str,
    "sensor_node_nm": int,
    "host_node_nm": int,
    "out": str,
}

_SCENE_PREFIX = "scene."


def _post(path: str, payload: dict, server: str | None) -> httpx.Response:
    if server:
        return httpx.post(server.rstrip("/") + path, json=payload, timeout=None)

    async def go() -> httpx.Response:
        from .service.app import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, base_url="http://sim") as client:
            return await client.post(path, json=payload, timeout=None)

    return asyncio.run(go())


def _request_from_config(path: str | None) -> tuple[dict, str | None]:
    """(RunRequest payload, out dir) from a config file."""
    payload: dict = {}
    scene: dict = {}
    out = None
    if path is None:
        return payload, out
    try:
        kv = parse_key_values(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    for key, value in kv.items():
        if key.startswith(_SCENE_PREFIX):
            scene[key[len(_SCENE_PREFIX):]] = float(value)
            continue
        if key not in _RUN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        parsed = _RUN_KEYS[key](value)
        if key == "out":
            out = parsed
        elif key == "coefficients":
            payload["coefficients_text"] = Path(parsed).read_text()
        elif key == "roi_weights":
            payload["roi_weights_path"] = parsed
        elif key == "vit_weights":
            payload["vit_weights_path"] = parsed
        else:
            payload[key] = parsed
    if scene:
        scene = {k: (int(v) if k in ("width", "height") else v) for k, v in scene.items()}
        payload["scene"] = scene
    return payload, out


def _apply_flags(payload: dict, args: argparse.Namespace) -> None:
    for flag, key in (
        ("mode", "mode"),
        ("fps", "fps"),
        ("rate", "rate"),
        ("sigma", "sigma"),
        ("seed", "seed"),
        ("frames", "n_frames"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            payload[key] = value


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def cmd_run(args: argparse.Namespace) -> int:
    try:
        payload, out = _request_from_config(args.config)
    except BlissError as exc:
        return _fail(str(exc))
    _apply_flags(payload, args)
    out = args.out or out or "."
    resp = _post("/run", payload, args.server)
    if resp.status_code != 200:
        return _fail(resp.json().get("detail", resp.text))
    body = resp.json()
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in ("traces", "energy", "gaze", "summary"):
        (out_dir / f"{name}.csv").write_text(body[f"{name}_csv"])
    print(f"wrote {out_dir}/[traces|energy|gaze|summary].csv")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        payload, out = _request_from_config(args.config)
    except BlissError as exc:
        return _fail(str(exc))
    _apply_flags(payload, args)
    out = args.out or out or "."
    values = [float(v) for v in args.values.split(",") if v.strip()] if args.values else []
    resp = _post("/sweep", {"base": payload, "axis": args.axis, "values": values}, args.server)
    if resp.status_code != 200:
        return _fail(resp.json().get("detail", resp.text))
    body = resp.json()
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "sweep.csv").write_text(body["summary_csv"])
    print(f"wrote {out_dir}/sweep.csv ({len(body['rows'])} rows)")
    return 0 if body["ok"] else 1


def cmd_forward(args: argparse.Namespace) -> int:
    import base64

    bundle_b64 = base64.b64encode(Path(args.bundle).read_bytes()).decode("ascii")
    payload = json.loads(Path(args.input).read_text())
    payload["bundle_b64"] = bundle_b64
    resp = _post(f"/forward/{args.kind}", payload, args.server)
    if resp.status_code != 200:
        return _fail(resp.json().get("detail", resp.text))
    text = json.dumps(resp.json(), indent=None, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_fixtures(args: argparse.Namespace) -> int:
    from .fixtures import write_default_fixtures

    for path in write_default_fixtures(args.out):
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blisscam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key-value run config file")
        p.add_argument("--mode", choices=["NPU_FULL", "NPU_ROI", "S_NPU", "BLISSCAM"])
        p.add_argument("--fps", type=float)
        p.add_argument("--rate", type=float, help="in-ROI target sampling rate (0,1]")
        p.add_argument("--sigma", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--frames", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--server", help="remote service URL (default: in-process)")

    p_run = sub.add_parser("run", help="single simulation run")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep one axis over values")
    common(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=["fps", "rate", "node"])
    p_sweep.add_argument("--values", required=True, help="comma-separated values (may be empty)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_fwd = sub.add_parser("forward", help="raw network forward pass via the service")
    p_fwd.add_argument("--kind", required=True, choices=["roi", "vit"])
    p_fwd.add_argument("--bundle", required=True, help="weight bundle path")
    p_fwd.add_argument("--input", required=True, help="JSON request body (without bundle)")
    p_fwd.add_argument("--out", help="write response JSON here instead of stdout")
    p_fwd.add_argument("--server")
    p_fwd.set_defaults(func=cmd_forward)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)

    p_fix = sub.add_parser("fixtures", help="write fixture weight bundles")
    p_fix.add_argument("--out", default="fixtures")
    p_fix.set_defaults(func=cmd_fixtures)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BlissError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
