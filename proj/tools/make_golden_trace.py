#!/usr/bin/env python3
"""Writes data/golden/table3_load_follow.csv, a 1 Hz zero-export trace.

The house profile follows the table3 appliance schedule with a cycling dryer,
scaled to 6.908 kWh. The EV follows the house load 6 s late and is scaled so
that it supplies 4.374 kWh; the grid imports the rest. The EV never charges
and never pushes more than the house draws, so house = ev + net holds exactly.
"""

import argparse
import pathlib

import numpy as np

DURATION_S = 303 * 60
ALPHA_KW = 0.1
HOUSE_KWH = 6.908
EV_KWH = 4.374
LAG_S = 6

# (start_min, duration_min, kW) blocks for the non-dryer appliances
BLOCKS = [
    (8, 4, 1.05),
    (15, 57, 0.26),
    (170, 2, 0.6),
    (185, 10, 0.12), (195, 14, 1.9), (209, 25, 0.12), (234, 12, 1.9), (246, 12, 0.12), (258, 10, 0.05),
]


def house_profile(rng):
    t = np.arange(DURATION_S + 1)
    kw = np.full(t.shape, 0.13)
    for start, dur, p in BLOCKS:
        kw[(t >= start * 60) & (t < (start + dur) * 60)] += p
    dryer = (t >= 80 * 60) & (t < 160 * 60)
    kw[dryer] += 0.25
    s = 80 * 60
    while s < 152 * 60:
        on = int(rng.integers(1, 3))
        kw[s:s + on] += 5.9
        s += on + int(rng.integers(1, 3))
    return t, kw


def ev_profile(house, scale):
    delayed = np.concatenate([np.full(LAG_S, house[0]), house[:-LAG_S]])
    supply = np.clip(scale * (delayed - ALPHA_KW), 0.0, None)
    return -np.minimum(supply, house)


def integral_kwh(kw):
    return float(kw[:-1].sum()) / 3600.0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent
                                         / "data" / "golden" / "table3_load_follow.csv"))
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    t, house = house_profile(rng)
    house *= HOUSE_KWH / integral_kwh(house)
    house = np.round(house, 4)

    lo, hi = 0.0, 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if integral_kwh(-ev_profile(house, mid)) < EV_KWH:
            lo = mid
        else:
            hi = mid
    p_ev = np.round(ev_profile(house, 0.5 * (lo + hi)), 4)
    p_net = np.round(house + p_ev, 4)

    soc = 85.0 - np.concatenate([[0.0], np.cumsum(-p_ev[:-1]) / 3600.0]) / 0.95 / 40.0 * 100.0
    with open(args.out, "w") as f:
        f.write("t,p_net_kw,p_ev_kw,soc_pct,mode,setpoint_kw\n")
        for i in range(len(t)):
            f.write(f"{t[i]:.3f},{p_net[i]:.4f},{p_ev[i]:.4f},{soc[i]:.2f},zero_export,{p_ev[i]:.4f}\n")
    print(f"house {integral_kwh(p_net - p_ev):.4f} ev {integral_kwh(-p_ev):.4f} net {integral_kwh(p_net):.4f}")


if __name__ == "__main__":
    main()
