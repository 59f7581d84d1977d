"""Command line entry point.

Subcommands mirror the pipeline stages::

    mzmem fom      --config linear
    mzmem subgrid  --config linear
    mzmem kernel   --config brusselator_lco --workers 4
    mzmem scaling  --config burgers_desk --m-list 16,32,64
    mzmem plot     --output-dir runs/linear

Exit status is 0 on success, 2 when a kernel table is partial (some rows
diverged) and 1 on any other failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, pipeline
from .config import available_configs, load_config

log = logging.getLogger("mzmem")

EXIT_OK, EXIT_FAIL, EXIT_PARTIAL = 0, 1, 2


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_overrides(config, items):
    changes, params = {}, dict(config.params)
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--set expects key=value, got {item!r}")
        if key.startswith("params."):
            params[key[len("params."):]] = _parse_value(value)
        else:
            changes[key] = _parse_value(value)
    if params != config.params:
        changes["params"] = params
    return config.replace(**changes) if changes else config


def _workers(args, config):
    if args.workers is not None:
        return args.workers
    env = os.environ.get("MZMEM_WORKERS")
    return int(env) if env else config.workers


def _build_parser():
    p = argparse.ArgumentParser(prog="mzmem", description="Memory-kernel estimation for truncated dynamical systems.")
    p.add_argument("--version", action="version", version=f"mzmem {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        sp.add_argument("--config", required=needs_config,
                        help=f"config JSON path or shipped campaign ({', '.join(available_configs())})")
        sp.add_argument("--output-dir", help="overrides the config output directory")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field; params.<name>=value for model parameters")

    common(sub.add_parser("fom", help="integrate the full system and store snapshots"))
    sp = sub.add_parser("subgrid", help="exact subgrid term from stored snapshots")
    common(sp)
    sp.add_argument("--fom", help="snapshot file (default: <output-dir>/fom.mzk)")
    sp = sub.add_parser("kernel", help="estimate the memory kernel and compare to the exact subgrid term")
    common(sp)
    sp.add_argument("--fom", help="snapshot file (default: <output-dir>/fom.mzk)")
    sp.add_argument("--workers", type=int, help="worker processes (default: $MZMEM_WORKERS or config)")
    sp = sub.add_parser("scaling", help="memory length of the cut-off mode against ROM size")
    common(sp)
    sp.add_argument("--m-list", required=True, help="comma-separated ROM sizes, e.g. 16,32,64")
    sp.add_argument("--workers", type=int)
    sp = sub.add_parser("plot", help="regenerate figures from CSVs in an output directory")
    sp.add_argument("--output-dir", required=True)
    return p


def run(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "plot":
        made = pipeline.replot(args.output_dir)
        if not made:
            log.error("no recognised CSV files in %s", args.output_dir)
            return EXIT_FAIL
        log.info("wrote %s", ", ".join(made))
        return EXIT_OK

    config = _apply_overrides(load_config(args.config), args.set)
    out = Path(args.output_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.save(out / "config.json")

    if args.command == "fom":
        res = pipeline.run_fom(config, out)
        log.info("wrote %s and %s", res.full_path, res.resolved_path)
    elif args.command == "subgrid":
        pipeline.run_subgrid(config, args.fom, out)
        log.info("wrote subgrid tables to %s", out)
    elif args.command == "kernel":
        res = pipeline.run_kernel(config, args.fom, out, _workers(args, config))
        log.info("relative L2 %.4g, correlation %.4f; outputs in %s",
                 res.report["rel_l2_total"], res.report["corr_total"], out)
        if res.status == "partial":
            failed = sorted(res.table.failures)
            log.warning("kernel table is partial: %d rows diverged (first: %s); see failed_rows.csv",
                        len(failed), failed[:10])
            return EXIT_PARTIAL
    elif args.command == "scaling":
        m_list = [int(x) for x in args.m_list.split(",") if x.strip()]
        study = pipeline.run_scaling(config, m_list, out, _workers(args, config))
        log.info("tau = %s; slope %.4g, residual %.3g", study.tau_values, study.slope, study.residual)
    return EXIT_OK


def main(argv=None):
    try:
        return run(argv)
    except KeyboardInterrupt:
        return EXIT_FAIL
    except Exception as exc:  # noqa: BLE001
        log.error("%s: %s", type(exc).__name__, exc)
        logging.getLogger("mzmem").debug("traceback", exc_info=True)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
