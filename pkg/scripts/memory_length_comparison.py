"""Cut-off memory length of Kuramoto-Sivashinsky against Burgers at m = 32.

The K-S desk run takes a few minutes on one core.
"""
import argparse
import logging

from mzmem import pipeline
from mzmem.config import load_config
from mzmem.integrators import integrate
from mzmem.models import initial_condition


def cutoff_tau(name, workers):
    cfg = load_config(name)
    s = cfg.system()
    traj = integrate(s, initial_condition(s, cfg.seed), cfg.t_f, cfg.stepper)
    res = pipeline.estimate(cfg, traj, workers)
    return cfg, res.profiles.tau[-1], res.profiles.non_decaying[-1]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    for name in ("burgers_desk", "ks_desk"):
        cfg, tau, flat = cutoff_tau(name, args.workers)
        note = " (still above threshold at the last lag)" if flat else ""
        print(f"{name:13s} N={cfg.N:4d} m={cfg.m} dt={cfg.dt:g} t_f={cfg.t_f:g}: tau = {tau:.4g}"
              f" = {tau / cfg.t_f:.3%} of the window{note}")


if __name__ == "__main__":
    main()
