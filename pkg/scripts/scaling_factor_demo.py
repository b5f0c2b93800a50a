"""Show how level-1 uncertainty discounts the level-2 correlation.

The emulator's scaling factor at x is the ratio between the expected
output-coordinate correlation under the level-1 posterior and the same
correlation with that posterior collapsed to its mean.  Where level 1 is
well resolved the factor sits near 1 and the recursion behaves like a
plug-in model; where level 1 is uncertain the factor drops and the
level-2 prior takes over.  This prints the factor on a grid alongside
the level-1 posterior sd so the correspondence is visible.

    python3 scripts/scaling_factor_demo.py --n1 8 --n2 6
"""

import argparse

import numpy as np

from rnagp import FitOptions, RnaEmulator, get_problem, make_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--problem", default="perdikaris")
    parser.add_argument("--kernel", default="sqexp")
    parser.add_argument("--n1", type=int, default=8)
    parser.add_argument("--n2", type=int, default=6)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--grid", type=int, default=41)
    args = parser.parse_args()

    problem = get_problem(args.problem)
    if problem.dim != 1:
        parser.error("the demo prints a 1-d table; pick a 1-d problem")
    dataset = make_dataset(problem, (args.n1, args.n2), seed=args.seed)
    emulator = RnaEmulator.fit(dataset, args.kernel, FitOptions())

    xs = np.linspace(problem.bounds[0, 0], problem.bounds[0, 1], args.grid)
    factor = emulator.scaling_factor(xs[:, None])
    sd1 = np.sqrt(emulator.predict(xs[:, None]).variances[0])

    print(f"{args.problem}, n1={args.n1}, n2={args.n2}, kernel={args.kernel}")
    print(f"{'x':>8s} {'sd level 1':>12s} {'scaling':>9s}")
    for x, s, f in zip(xs, sd1, factor):
        bar = "#" * int(round(30 * f))
        print(f"{x:8.3f} {s:12.4e} {f:9.4f} {bar}")
    print(f"\nmin factor {factor.min():.4f} at x = {xs[factor.argmin()]:.3f}; "
          f"max {factor.max():.4f}")


if __name__ == "__main__":
    main()
