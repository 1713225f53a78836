"""Verify every hand-written backward pass against finite differences.

All gradients in this package are derived and coded by hand (there is
no autograd under the hood), so the gradcheck module is the safety net:
it compares each analytic gradient with a central finite difference on
randomized problems and reports the worst relative error per suite.

Run:  python3 demos/gradient_checks.py [--cases 50]
"""

import argparse

from sketch3d import gradcheck


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cases", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    report = gradcheck.run_all(seed=args.seed, cases=args.cases)
    width = max(len(name) for name in report["max_rel_err"])
    for name, err in report["max_rel_err"].items():
        tol = gradcheck.RASTER_TOL if name == "rasterizer" else gradcheck.LOSS_TOL
        status = "ok" if err < tol else "FAIL"
        print(f"{name:<{width}}  worst rel err {err:.3e}  (tol {tol:g})  {status}")
    print(f"\n{args.cases} cases per suite, all passed: {report['passed']}")


if __name__ == "__main__":
    main()
