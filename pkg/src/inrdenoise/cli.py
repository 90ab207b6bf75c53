"""Command-line front end; a thin client of the HTTP service.

By default every command drives the FastAPI app in-process through its HTTP
layer, so no server needs to be running; ``--server URL`` points the same
client at a remote instance instead (artifacts are then written on the
server's filesystem). Exit codes: 0 success, 1 runtime failure or a failed
verification, 2 usage/config errors.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

_CONFIG_KEYS = {
    "input", "phantom", "sigma", "model", "width", "depth", "omega0",
    "wire-omega", "wire-s", "ff-count", "ff-scale", "iters", "lr", "lambda",
    "reg", "its-n", "log-every", "seed", "runs", "out", "workers", "size",
}


class UsageError(Exception):
    pass


def parse_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` config lines; '#' starts a comment."""
    values: dict[str, str] = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for ln, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{ln}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in _CONFIG_KEYS:
            raise UsageError(f"{path}:{ln}: unknown config key {key!r}")
        values[key] = value
    return values


def _merged(args: argparse.Namespace, key: str, cast, default):
    """CLI flag > config file > default."""
    flag_val = getattr(args, key.replace("-", "_"), None)
    if flag_val is not None:
        return flag_val
    cfg = getattr(args, "_config_values", {})
    if key in cfg:
        try:
            return cast(cfg[key])
        except ValueError as exc:
            raise UsageError(f"config key {key}: {exc}") from exc
    return default


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError as exc:
        raise UsageError(f"--size expects HxW, got {text!r}") from exc


class Client:
    """HTTP access to the service, in-process unless a server URL is given."""

    def __init__(self, server: str | None):
        if server:
            self._client = httpx.Client(base_url=server.rstrip("/"), timeout=None)
        else:
            import warnings
            with warnings.catch_warnings():
                # this starlette wants the not-yet-published httpx2 backend
                warnings.filterwarnings("ignore", message=".*httpx2.*")
                from starlette.testclient import TestClient

            from .service.app import app
            self._client = TestClient(app, raise_server_exceptions=False)

    def post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise RuntimeError(f"request to {path} failed: {exc}") from exc
        if resp.status_code in (400, 422):
            raise UsageError(_detail(resp))
        if resp.status_code != 200:
            raise RuntimeError(f"{path} returned {resp.status_code}: {_detail(resp)}")
        return resp.json()


def _detail(resp) -> str:
    try:
        body = resp.json()
    except (json.JSONDecodeError, ValueError):
        return resp.text
    detail = body.get("detail", body)
    if isinstance(detail, list):  # pydantic validation errors
        return "; ".join(f"{'.'.join(str(p) for p in e.get('loc', []))}: "
                         f"{e.get('msg', '')}" for e in detail)
    return str(detail)


def _experiment_payload(args: argparse.Namespace) -> dict:
    input_flag = _merged(args, "input", str, None)
    phantom = _merged(args, "phantom", str, None)
    if input_flag and phantom:
        raise UsageError("give either --input or --phantom, not both")
    spec = input_flag if input_flag else f"phantom:{phantom or 'composite'}"
    size = _merged(args, "size", str, "96x96")
    model: dict = {"kind": _merged(args, "model", str, "siren")}
    for key in ("width", "depth"):
        val = _merged(args, key, int, None)
        if val is not None:
            model[key] = val
    for key, field in (("omega0", "omega0"), ("wire-omega", "wire_omega"),
                       ("wire-s", "wire_s"), ("ff-scale", "ff_scale")):
        val = _merged(args, key, float, None)
        if val is not None:
            model[field] = val
    ff_count = _merged(args, "ff-count", int, None)
    if ff_count is not None:
        model["ff_count"] = ff_count
    train: dict = {
        "iterations": _merged(args, "iters", int, 2000),
        "reg_lambda": _merged(args, "lambda", float, 0.0),
        "reg": _merged(args, "reg", str, "none"),
        "its_n": _merged(args, "its-n", int, 200),
        "log_every": _merged(args, "log-every", int, 50),
    }
    lr = _merged(args, "lr", float, None)
    if lr is not None:
        train["lr"] = lr
    return {
        "input": spec,
        "sigma": _merged(args, "sigma", float, 25.0),
        "model": model,
        "train": train,
        "out": _merged(args, "out", str, "out"),
        "runs": _merged(args, "runs", int, 1),
        "seed": _merged(args, "seed", int, 0),
        "phantom_size": list(_parse_size(size)),
    }


def _print_summaries(summaries: list[dict]) -> None:
    for s in summaries:
        print(f"  model={s['model']} N={s['its_period']} sigma={s['sigma255']:g} "
              f"seed={s['seed']}  last PSNR/SSIM: {_fmt(s['last_psnr'])} / "
              f"{_fmt(s['last_ssim'])}  best: {_fmt(s['best_psnr'])} / "
              f"{_fmt(s['best_ssim'])}  ({s['wall_seconds']:.1f}s)")


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, str):
        return v
    return f"{v:.4f}"


def cmd_denoise(args: argparse.Namespace) -> int:
    client = Client(args.server)
    body = client.post("/v1/denoise", _experiment_payload(args))
    print("denoise complete")
    _print_summaries(body["summaries"])
    print("artifacts:")
    for path in body["artifacts"]:
        print(f"  {path}")
    return 0


def cmd_ablate_n(args: argparse.Namespace) -> int:
    client = Client(args.server)
    payload = {
        "base": _experiment_payload(args),
        "n_values": args.n_values,
        "workers": _merged(args, "workers", int, 1),
    }
    body = client.post("/v1/ablate-n", payload)
    print("ablation complete")
    _print_summaries(body["summaries"])
    print(f"csv: {body['csv_path']}")
    print(f"svg: {body['svg_path']}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    client = Client(args.server)
    base = _experiment_payload(args)
    train_a = dict(base["train"])
    train_b = dict(base["train"])
    train_a["its_n"] = args.its_n_a
    train_b["its_n"] = args.its_n_b if args.its_n_b is not None else base["train"]["its_n"]
    payload = {
        "base": base,
        "train_a": train_a,
        "train_b": train_b,
        "workers": _merged(args, "workers", int, 1),
    }
    if args.sigmas:
        payload["sigmas"] = [float(s) for s in args.sigmas.split(",")]
    body = client.post("/v1/compare", payload)
    print(f"paired comparison over {len(body['cells'])} cells "
          f"(A: N={train_a['its_n']}, B: N={train_b['its_n']})")
    for c in body["cells"]:
        print(f"  {c['input']} sigma={c['sigma255']:g} seed={c['seed']}: "
              f"A {_fmt(c['a_psnr'])}/{_fmt(c['a_ssim'])}  "
              f"B {_fmt(c['b_psnr'])}/{_fmt(c['b_ssim'])}  "
              f"dPSNR {_fmt(c['psnr_delta'])}")
    print(f"mean PSNR delta (B-A): {body['mean_psnr_delta']:+.4f} dB")
    if body["mean_ssim_delta"] is not None:
        print(f"mean SSIM delta (B-A): {body['mean_ssim_delta']:+.4f}")
    sig = body["significance"]
    print(f"paired t-test PSNR: t={_fmt(body['psnr_t'])}, p={body['psnr_p']:.3e} "
          f"{sig or '(n.s.)'}")
    if body["ssim_p"] is not None:
        print(f"paired t-test SSIM: t={_fmt(body['ssim_t'])}, p={body['ssim_p']:.3e}")
    print("significance: ** p<=0.001, * p<=0.05")
    print(f"csv: {body['csv_path']}")
    return 0


def cmd_theorem(args: argparse.Namespace) -> int:
    client = Client(args.server)
    payload = {"delta": args.delta, "dim": args.dim, "trials": args.trials,
               "seed": _merged(args, "seed", int, 0)}
    body = client.post("/v1/theorem", payload)
    print(f"substitution SNR check: delta={body['delta']:g} dim={body['dim']} "
          f"trials={body['trials']} seed={body['seed']}")
    print(f"  all_hold: {body['all_hold']}")
    print(f"  min SNR ratio (new/old): {body['min_ratio']:.6f}")
    print(f"  min margin over 2/(1+delta) bound: {body['min_bound_margin']:.6f}")
    print(f"  violations: improvement={body['improvement_violations']} "
          f"bound={body['bound_violations']}")
    print(f"  elapsed: {body['elapsed_seconds']:.2f}s")
    return 0 if body["all_hold"] else 1


def cmd_metrics(args: argparse.Namespace) -> int:
    client = Client(args.server)
    body = client.post("/v1/metrics", {"path_a": args.file_a, "path_b": args.file_b})
    print(f"psnr: {_fmt(body['psnr'])} dB")
    print(f"ssim: {_fmt(body['ssim'])}")
    print(f"sigma_hat (difference field, 0-255): {body['sigma_hat']:.4f}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("inrdenoise.service.app:app", host=args.host, port=args.port)
    return 0


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--input", help="path to a PGM/PPM image (treated as clean)")
    p.add_argument("--phantom", help="synthetic input: gradient|disk|stripes|composite")
    p.add_argument("--size", help="phantom size HxW (default 96x96)")
    p.add_argument("--sigma", type=float, help="noise std on the 0-255 scale")
    p.add_argument("--model", help="siren|wire|ffn (default siren)")
    p.add_argument("--width", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--omega0", type=float)
    p.add_argument("--wire-omega", type=float)
    p.add_argument("--wire-s", type=float)
    p.add_argument("--ff-count", type=int)
    p.add_argument("--ff-scale", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lambda", type=float, dest="lambda_flag")
    p.add_argument("--reg", choices=["none", "tv"])
    p.add_argument("--its-n", type=int, help="substitution period (0 disables)")
    p.add_argument("--log-every", type=int)
    p.add_argument("--seed", type=int, help="base seed (runs use seed..seed+runs-1)")
    p.add_argument("--runs", type=int, help="runs per cell")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inrdenoise",
        description="Coordinate-network image denoising with supervision substitution")
    parser.add_argument("--server", help="remote service URL (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="train on one image and write artifacts")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("ablate-n", help="sweep the substitution period N")
    _add_experiment_flags(p)
    p.add_argument("--n-values", type=lambda s: [int(v) for v in s.split(",")],
                   default=[0, 100, 200, 300, 400],
                   help="comma-separated N values (0 = substitution off)")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_ablate_n)

    p = sub.add_parser("compare", help="paired A/B evaluation with a t-test")
    _add_experiment_flags(p)
    p.add_argument("--its-n-a", type=int, default=0, help="variant A period")
    p.add_argument("--its-n-b", type=int, default=None,
                   help="variant B period (default: --its-n)")
    p.add_argument("--sigmas", help="comma-separated noise levels for the cells")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("theorem", help="verify the substitution SNR guarantee")
    p.add_argument("--delta", type=float, required=True,
                   help="error-to-noise norm ratio, in (0,1)")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_theorem)

    p = sub.add_parser("metrics", help="PSNR/SSIM/sigma-hat of two image files")
    p.add_argument("file_a")
    p.add_argument("file_b")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    # --lambda collides with the python keyword; normalize the dest.
    if hasattr(args, "lambda_flag"):
        setattr(args, "lambda", args.lambda_flag)
    try:
        if getattr(args, "config", None):
            args._config_values = parse_config_file(args.config)
        else:
            args._config_values = {}
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # runtime failures map to exit 1
        print(f"failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
