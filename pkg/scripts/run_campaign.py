"""Run a shipped campaign end to end: full-order run, subgrid tables, kernel and diagnostics.

    python scripts/run_campaign.py linear brusselator_lco --workers 4
"""
import argparse
import logging
import time

from mzmem import pipeline
from mzmem.config import available_configs, load_config


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("names", nargs="+", choices=available_configs())
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--root", default="runs")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    for name in args.names:
        cfg = load_config(name)
        out = f"{args.root}/{name}"
        start = time.perf_counter()
        pipeline.run_fom(cfg, out)
        pipeline.run_subgrid(cfg, out_dir=out)
        res = pipeline.run_kernel(cfg, out_dir=out, workers=args.workers)
        cfg.save(f"{out}/config.json")
        r = res.report
        print(f"{name}: rel L2 {r['rel_l2_total']:.4f}  NRMS {r['nrms_total']:.4f}  corr {r['corr_total']:.4f}  "
              f"cut-off tau {res.profiles.tau[-1]:.4g}  [{res.status}, {time.perf_counter() - start:.1f} s]")


if __name__ == "__main__":
    main()
