"""Measured ETDRK4 self-convergence order on the K-S desk problem against step and horizon."""
import numpy as np

from mzmem.config import load_config
from mzmem.integrators import StepperConfig, integrate
from mzmem.models import initial_condition


def order(system, u0, dt, horizon):
    finals = [integrate(system, u0, horizon, StepperConfig(dt / 2**i, "etdrk4")).states[-1] for i in range(3)]
    return np.log2(np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2]))


def main():
    cfg = load_config("ks_desk")
    s = cfg.system()
    u0 = initial_condition(s, cfg.seed)
    print(f"{'dt':>8s} {'horizon':>8s} {'order':>6s}")
    for dt in (2e-4, 1e-4, 5e-5):
        for horizon in (0.002, 0.004, 0.01, 0.02):
            print(f"{dt:8.0e} {horizon:8.3g} {order(s, u0, dt, horizon):6.3f}")


if __name__ == "__main__":
    main()
