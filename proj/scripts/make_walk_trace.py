#!/usr/bin/env python3
"""Generate the bundled synthetic human trace: walk to the table, reach over
it, dwell, and leave. Writes data/motions/walk_to_table.csv."""

import argparse
import math
import pathlib

RATE = 50.0
V_LIMIT = 1.9  # keep margin below the 2 m/s bound checked at load time

KEYPOINTS = [
    "head", "neck", "pelvis",
    "shoulder_l", "elbow_l", "wrist_l", "shoulder_r", "elbow_r", "wrist_r",
    "hip_l", "knee_l", "ankle_l", "hip_r", "knee_r", "ankle_r",
]


def smooth(u):
    u = min(max(u, 0.0), 1.0)
    return 0.5 - 0.5 * math.cos(math.pi * u)


def lerp(a, b, u):
    return a + (b - a) * u


def phase_state(t):
    """Centre (x, y), heading, reach in [0, 1], gait amplitude in [0, 1]."""
    start, table, away = (2.6, -1.2), (0.95, 0.0), (2.6, 1.4)
    to_table = math.atan2(table[1] - start[1], table[0] - start[0])
    face_robot = math.pi
    from_table = math.atan2(away[1] - table[1], away[0] - table[0])
    if t < 3.0:
        u = smooth(t / 3.0)
        return (lerp(start[0], table[0], u), lerp(start[1], table[1], u), to_table, 0.0,
                math.sin(math.pi * t / 3.0))
    if t < 4.0:
        u = smooth(t - 3.0)
        return (*table, lerp(to_table, face_robot, u), 0.0, 0.0)
    if t < 5.5:
        return (*table, face_robot, smooth((t - 4.0) / 1.5), 0.0)
    if t < 8.0:
        return (*table, face_robot, 1.0 - 0.1 * math.sin(math.pi * (t - 5.5) / 2.5), 0.0)
    if t < 9.5:
        return (*table, face_robot, 1.0 - smooth((t - 8.0) / 1.5), 0.0)
    if t < 10.5:
        u = smooth(t - 9.5)
        return (*table, lerp(face_robot, from_table, u), 0.0, 0.0)
    u = smooth((t - 10.5) / 3.5)
    return (lerp(table[0], away[0], u), lerp(table[1], away[1], u), from_table, 0.0,
            math.sin(math.pi * min(t - 10.5, 3.5) / 3.5))


def pose(t):
    x, y, heading, reach, gait = phase_state(t)
    fx, fy = math.cos(heading), math.sin(heading)
    lx, ly = -fy, fx
    swing = 0.08 * gait * math.sin(2 * math.pi * 0.9 * t)
    lean = 0.12 * reach

    def at(f, l, z):
        return (x + f * fx + l * lx, y + f * fy + l * ly, z)

    k = {
        "head": at(lean, 0, 1.65 - 0.05 * reach),
        "neck": at(lean, 0, 1.5 - 0.04 * reach),
        "pelvis": at(0, 0, 0.95),
    }
    for side, s in (("l", 1.0), ("r", -1.0)):
        leg = swing * s
        k["shoulder_" + side] = at(lean, 0.2 * s, 1.45 - 0.04 * reach)
        if side == "r":
            k["elbow_" + side] = at(lean + 0.3 * reach - leg, 0.22 * s, 1.15 + 0.12 * reach)
            k["wrist_" + side] = at(lean + 0.55 * reach - leg, 0.22 * s, 0.9 + 0.15 * reach)
        else:
            k["elbow_" + side] = at(-leg, 0.22 * s, 1.15)
            k["wrist_" + side] = at(-1.5 * leg, 0.22 * s, 0.9)
        k["hip_" + side] = at(0, 0.1 * s, 0.9)
        k["knee_" + side] = at(leg, 0.1 * s, 0.5)
        k["ankle_" + side] = at(1.5 * leg, 0.1 * s, 0.08)
    return k


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    root = pathlib.Path(__file__).resolve().parent.parent
    ap.add_argument("--out", default=root / "data" / "motions" / "walk_to_table.csv")
    ap.add_argument("--duration", type=float, default=15.0)
    args = ap.parse_args()

    frames = int(args.duration * RATE) + 1
    rows = []
    prev = None
    vmax = 0.0
    for i in range(frames):
        t = i / RATE
        k = pose(t)
        if prev is not None:
            for name in KEYPOINTS:
                d = math.dist(k[name], prev[name]) * RATE
                vmax = max(vmax, d)
        prev = k
        rows.append([f"{t:.4f}"] + [f"{c:.6f}" for name in KEYPOINTS for c in k[name]])
    if vmax > V_LIMIT:
        raise SystemExit(f"keypoint speed {vmax:.3f} m/s exceeds {V_LIMIT}")

    header = ["time"] + [f"{n}_{a}" for n in KEYPOINTS for a in "xyz"]
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as f:
        f.write(",".join(header) + "\n")
        for r in rows:
            f.write(",".join(r) + "\n")
    print(f"wrote {out} ({frames} frames, peak keypoint speed {vmax:.3f} m/s)")


if __name__ == "__main__":
    main()
