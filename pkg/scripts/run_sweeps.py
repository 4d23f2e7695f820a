"""Run the epsilon sweeps for every config given (default: configs/*.json) and print the rate fits."""

import argparse
import json
import time
from dataclasses import replace
from pathlib import Path

from insulated_gap.harness import SweepConfig, dump_json, fit_table, run_sweep

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("configs", nargs="*", type=Path)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    paths = args.configs or sorted((ROOT / "configs").glob("*.json"))
    summary = {}
    for path in paths:
        cfg = replace(SweepConfig.from_json(path), workers=args.workers)
        t0 = time.perf_counter()
        res = run_sweep(cfg)
        fits = {q: fit_table(res, q, cfg.d, cfg.m).as_dict() for q in ("max_grad", "u_at_eps1m", "grad_lb")}
        summary[path.stem] = {"seconds": round(time.perf_counter() - t0, 2), "out_dir": cfg.out_dir,
                              "fits": fits}
        f = fits["max_grad"]
        print(f"{path.stem}: slope {f['slope']:.4f}  target {f['target']:.4f}  "
              f"deviation {f['deviation']:.4f}")
    if any(s["out_dir"] for s in summary.values()):
        (ROOT / "runs").mkdir(exist_ok=True)
        (ROOT / "runs" / "fits.json").write_text(dump_json(summary))
    else:
        print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
