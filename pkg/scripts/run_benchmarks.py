#!/usr/bin/env python3
"""Run the three train-and-measure benchmarks and print a table.

Each benchmark pairs a model that can see the relevant structure with a
control that provably cannot; the control scoring near chance is what
makes the headline number meaningful.
"""

import argparse
import time

from hmil.verification import (
    benchmark_nested_task,
    benchmark_product_task,
    benchmark_variance_task,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rows = []
    for name, fn in (("variance", benchmark_variance_task),
                     ("nested", benchmark_nested_task),
                     ("product", benchmark_product_task)):
        started = time.monotonic()
        result = fn(args.seed)
        rows.append((name, result, time.monotonic() - started))

    print(f"seed {args.seed}\n")
    print(f"{'benchmark':<10} {'metric':<28} {'value':>8}  bar")
    bars = {
        "variance": [("mil_accuracy", ">= 0.95"),
                     ("mean_baseline_accuracy", "<= 0.55"),
                     ("shuffled_accuracy", "<= 0.55")],
        "nested": [("nested_accuracy", ">= 0.90"),
                   ("flat_accuracy", "<= 0.55")],
        "product": [("joint_accuracy", ">= 0.90"),
                    ("x_only_accuracy", "0.45..0.55"),
                    ("x_only_on_x_label_accuracy", ">= 0.95")],
    }
    for name, result, seconds in rows:
        for metric, bar in bars[name]:
            print(f"{name:<10} {metric:<28} {result[metric]:>8.3f}  {bar}")
        print(f"{name:<10} {'wall time':<28} {seconds:>7.1f}s\n")


if __name__ == "__main__":
    main()
