"""Serve the bridge: tvlm-bridge --port 8808 --mode echo|real [--backbone ID]."""

import argparse

import uvicorn

from .app import DEFAULT_BACKBONE, BridgeConfig, create_app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tvlm-bridge")
    parser.add_argument("--port", type=int, default=8808)
    parser.add_argument("--mode", choices=["echo", "real"], default="echo")
    parser.add_argument("--backbone", default=DEFAULT_BACKBONE)
    parser.add_argument("--l-f", type=int, default=156, dest="l_f")
    parser.add_argument("--d-h", type=int, default=768, dest="d_h")
    parser.add_argument("--host", default="127.0.0.1")
    args = parser.parse_args(argv)

    config = BridgeConfig(backbone=args.backbone, port=args.port,
                          mode=args.mode, l_f=args.l_f, d_h=args.d_h)
    uvicorn.run(create_app(config), host=args.host, port=args.port,
                log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
