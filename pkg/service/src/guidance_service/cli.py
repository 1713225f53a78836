"""Launch the guidance service:  guidance-service [--port 8711]"""

import argparse

import uvicorn

from guidance_service.app import create_app
from guidance_service.config import ServiceConfig


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8711)
    parser.add_argument("--model-seed", type=int, default=0)
    parser.add_argument("--features", type=int, default=48)
    args = parser.parse_args()

    config = ServiceConfig(port=args.port, model_seed=args.model_seed,
                           features=args.features)
    uvicorn.run(create_app(config), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
