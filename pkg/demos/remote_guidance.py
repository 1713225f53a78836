"""Drive the structure stage through a guidance service over HTTP.

The optimizer does not care where its gradients come from: anything
with an ``image_guidance(request)`` method works.  RemoteProvider
implements that method by POSTing the rendered view to a sidecar
service and decoding the gradient image it returns.  This demo checks
the service is up, then runs a handful of structure iterations through
it.

Start a service first (the ``guidance-service`` package ships one):

    guidance-service --port 8711

then run:  python3 demos/remote_guidance.py [--url http://127.0.0.1:8711]
"""

import argparse
import sys

import numpy as np

from sketch3d import curves, stage1
from sketch3d.errors import TransportError
from sketch3d.guidance import RemoteProvider


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--url", default="http://127.0.0.1:8711")
    parser.add_argument("--iters", type=int, default=10)
    args = parser.parse_args()

    provider = RemoteProvider(args.url, timeout=30.0, retries=2, backoff=0.2)
    try:
        health = provider.health()
    except TransportError as exc:
        print(f"no guidance service at {args.url}: {exc}")
        print("start one with:  guidance-service --port 8711")
        return 1
    print(f"service healthy: {health}")

    sketch = curves.init_sketch(n_curves=6, seed=3, prompt="a sailboat")
    cfg = stage1.Stage1Config(iters=args.iters, image_size=64, sigma=3.0,
                              samples=16, checkpoint_dir=None)
    final, trace = stage1.optimize_structure(sketch, provider, cfg)

    moved = np.linalg.norm(final.control_points - sketch.control_points)
    print(f"ran {len(trace)} iterations through {args.url}")
    print(f"control points moved by |delta| = {moved:.4f}")
    for row in trace[:3]:
        proxies = {k: round(v, 5) for k, v in row["sds"].items()}
        print(f"  iter {row['iter']}: t={row['t']:.3f} gradient proxies {proxies}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
