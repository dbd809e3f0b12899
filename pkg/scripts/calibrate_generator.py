#!/usr/bin/env python3
"""Calibrate the synthetic damage equation against the published marginals.

The generator standardizes its structural composite per realization and
rescales it, so the free calibration knobs are the damage anchor (pre-clip
level) and the structural SD. This script sweeps both across seeds and
reports the achieved post-clip damage mean/SD, the fraction of rows clipped
at zero, and whether every seed lands inside the 15% band around the
8.14 +/- 6.21 targets. The chosen values are frozen into
``fairflood.dataset`` (DAMAGE_ANCHOR / DAMAGE_STRUCT_SD); rerun this after
touching the generator.

Usage: python3 scripts/calibrate_generator.py [--seeds N] [--sweep]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fairflood import dataset as ds  # noqa: E402


def stats_for(anchor, struct_sd, seeds, bias=None):
    saved = (ds.DAMAGE_ANCHOR, ds.DAMAGE_STRUCT_SD)
    ds.DAMAGE_ANCHOR, ds.DAMAGE_STRUCT_SD = anchor, struct_sd
    try:
        means, sds, clipped = [], [], []
        for seed in seeds:
            cfg = ds.SyntheticConfig(seed=seed)
            if bias is not None:
                cfg.district_bias_strength = bias
            data = ds.generate_synthetic(cfg)
            y = data.targets()
            means.append(y.mean())
            sds.append(y.std())
            clipped.append(float(np.mean(y == 0.0)))
        return np.array(means), np.array(sds), np.array(clipped)
    finally:
        ds.DAMAGE_ANCHOR, ds.DAMAGE_STRUCT_SD = saved


def report(label, means, sds, clipped):
    mean_lo, mean_hi = ds.DAMAGE_MEAN_TARGET * 0.85, ds.DAMAGE_MEAN_TARGET * 1.15
    sd_lo, sd_hi = ds.DAMAGE_SD_TARGET * 0.85, ds.DAMAGE_SD_TARGET * 1.15
    ok_mean = np.all((means >= mean_lo) & (means <= mean_hi))
    ok_sd = np.all((sds >= sd_lo) & (sds <= sd_hi))
    print(f"{label}: mean {means.mean():.3f} [{means.min():.3f}, {means.max():.3f}] "
          f"(target {mean_lo:.2f}..{mean_hi:.2f} {'OK' if ok_mean else 'FAIL'}) | "
          f"sd {sds.mean():.3f} [{sds.min():.3f}, {sds.max():.3f}] "
          f"(target {sd_lo:.2f}..{sd_hi:.2f} {'OK' if ok_sd else 'FAIL'}) | "
          f"clipped {clipped.mean() * 100:.1f}%")
    return ok_mean and ok_sd


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seeds", type=int, default=25,
                        help="number of seeds (0..N-1) to check")
    parser.add_argument("--sweep", action="store_true",
                        help="sweep a grid instead of checking current values")
    args = parser.parse_args()
    seeds = range(args.seeds)

    if not args.sweep:
        means, sds, clipped = stats_for(ds.DAMAGE_ANCHOR, ds.DAMAGE_STRUCT_SD, seeds)
        ok = report(f"current (anchor={ds.DAMAGE_ANCHOR}, "
                    f"struct_sd={ds.DAMAGE_STRUCT_SD})", means, sds, clipped)
        means0, sds0, clipped0 = stats_for(ds.DAMAGE_ANCHOR, ds.DAMAGE_STRUCT_SD,
                                           seeds, bias=0.0)
        report("bias_strength=0 variant", means0, sds0, clipped0)
        # sanity note: mean * 87 vs the headline total the source tables imply
        print(f"implied 87-row total: {means.mean() * 87:.1f} USD M "
              "(the published per-row mean times 87 exceeds the headline "
              "405.5M total; the generator calibrates to the per-row table)")
        sys.exit(0 if ok else 1)

    for anchor in np.arange(7.0, 8.8, 0.3):
        for struct_sd in (5.3, 5.6, 5.9, 6.2):
            means, sds, clipped = stats_for(anchor, struct_sd, seeds)
            report(f"anchor={anchor:.1f} struct_sd={struct_sd}", means, sds, clipped)


if __name__ == "__main__":
    main()
