"""Cut-off memory length of Burgers against ROM size, with a power-law fit.

    python scripts/burgers_scaling.py --m-list 16,32,64 --workers 4
"""
import argparse
import logging

from mzmem import pipeline
from mzmem.config import load_config


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default="burgers_desk")
    p.add_argument("--m-list", default="16,32,64")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="runs/burgers_scaling")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    cfg = load_config(args.config)
    study = pipeline.run_scaling(cfg, [int(m) for m in args.m_list.split(",")], args.out, args.workers)
    for m, tau in zip(study.m_values, study.tau_values):
        print(f"m={m:4d}  tau={tau:.4g}")
    print(f"log tau = {study.slope:.3f} log m + {study.intercept:.3f}  (rms log residual {study.residual:.3g})")


if __name__ == "__main__":
    main()
