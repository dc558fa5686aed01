"""Finite-difference check of the GRU and CNN gradients on random small configs.

    python scripts/check_gradients.py --configs 10 --seed 0
"""

import argparse

import numpy as np

from dspforecast.neural.gradcheck import check_model, random_config


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--configs", type=int, default=10, help="configs per architecture")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--loss", choices=["smape", "mse"], default="smape")
    parser.add_argument("--rtol", type=float, default=1e-4)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    n_failed = 0
    for arch in ("gru", "cnn"):
        for i in range(args.configs):
            config = random_config(arch, rng)
            check = check_model(config, rng, loss=args.loss, rtol=args.rtol)
            n_failed += not check.passed
            print(f"{arch} #{i:<2} entries={check.n_checked:<4} "
                  f"max_rel={check.max_rel_error:.2e} worst={check.worst_param or '-':<12} "
                  f"{'ok' if check.passed else 'FAILED'}  {config}")
    print(f"{2 * args.configs - n_failed}/{2 * args.configs} configurations passed")
    raise SystemExit(1 if n_failed else 0)


if __name__ == "__main__":
    main()
