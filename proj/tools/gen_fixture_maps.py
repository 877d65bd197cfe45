#!/usr/bin/env python3
"""Writes the fixture lane maps under data/maps.

    python3 tools/gen_fixture_maps.py [out_dir]
"""
import json
import math
import sys
from pathlib import Path

LANE_W = 3.5


def r3(v):
    v = round(v, 3)
    return 0.0 if v == 0 else v


def pts(seq):
    return [[r3(x), r3(y)] for x, y in seq]


def straight(x0, y0, x1, y1, step=50.0):
    n = max(1, math.ceil(math.hypot(x1 - x0, y1 - y0) / step))
    return [(x0 + (x1 - x0) * i / n, y0 + (y1 - y0) * i / n) for i in range(n + 1)]


def lane(lid, centerline, **kw):
    out = {"id": lid, "centerline": pts(centerline), "width": LANE_W}
    out.update(kw)
    return out


def highway():
    lanes = [
        lane("R", straight(0, 0, 1500, 0), left_neighbor="M", left_boundary="dashed",
             right_boundary="solid", successors=[], in_junction=False, speed_limit=20.0),
        lane("M", straight(0, 3.5, 1500, 3.5), left_neighbor="L", right_neighbor="R",
             left_boundary="dashed", right_boundary="dashed", successors=[], in_junction=False,
             speed_limit=20.0),
        lane("L", straight(0, 7, 1500, 7), right_neighbor="M", left_boundary="solid",
             right_boundary="dashed", successors=[], in_junction=False, speed_limit=20.0),
    ]
    return {"format_version": 1, "id": "highway_3lane", "lanes": lanes, "lights": [], "stop_signs": []}


def two_lane():
    lanes = [
        lane("a_r", straight(0, 0, 600, 0), left_neighbor="a_l", left_boundary="dashed",
             right_boundary="solid", successors=["b_r"], in_junction=False, speed_limit=13.9),
        lane("a_l", straight(0, 3.5, 600, 3.5), right_neighbor="a_r", left_boundary="solid",
             right_boundary="dashed", successors=["b_l"], in_junction=False, speed_limit=13.9),
        lane("b_r", straight(600, 0, 1000, 0), left_neighbor="b_l", left_boundary="double_solid",
             right_boundary="solid", successors=[], in_junction=False, speed_limit=13.9),
        lane("b_l", straight(600, 3.5, 1000, 3.5), right_neighbor="b_r", left_boundary="solid",
             right_boundary="double_solid", successors=[], in_junction=False, speed_limit=13.9),
    ]
    return {"format_version": 1, "id": "two_lane_road", "lanes": lanes, "lights": [],
            "stop_signs": [{"id": "end_stop", "lane": "b_r", "stop_line": [[960, -1.75], [960, 1.75]]}]}


H = 14.0       # junction box half size
ARM = 300.0    # arm length
ARMS = ["S", "E", "N", "W"]  # each arm is the previous one rotated by +90 degrees


def rot(p, k):
    x, y = p
    for _ in range(k):
        x, y = -y, x
    return (x, y)


def arc(cx, cy, r, a0, a1):
    n = max(2, math.ceil(abs(a1 - a0) * r / 1.0))
    return [(cx + r * math.cos(a0 + (a1 - a0) * i / n), cy + r * math.sin(a0 + (a1 - a0) * i / n))
            for i in range(n + 1)]


def junction():
    road = dict(in_junction=False, speed_limit=13.9)
    conn = dict(in_junction=True, speed_limit=10.0, left_boundary="solid", right_boundary="solid")
    lanes, lights = [], []
    for k, arm in enumerate(ARMS):
        straight_to = ARMS[(k + 2) % 4]
        left_to = ARMS[(k + 3) % 4]
        right_to = ARMS[(k + 1) % 4]
        # south arm geometry, rotated into place
        in0 = [rot(p, k) for p in straight(1.75, -H - ARM, 1.75, -H)]
        in1 = [rot(p, k) for p in straight(5.25, -H - ARM, 5.25, -H)]
        out0 = [rot(p, k) for p in straight(-1.75, -H, -1.75, -H - ARM)]
        out1 = [rot(p, k) for p in straight(-5.25, -H, -5.25, -H - ARM)]
        lanes.append(lane(f"{arm}_in_0", in0, right_neighbor=f"{arm}_in_1", left_boundary="double_solid",
                          right_boundary="dashed", successors=[f"{arm}_0_straight", f"{arm}_0_left"], **road))
        lanes.append(lane(f"{arm}_in_1", in1, left_neighbor=f"{arm}_in_0", left_boundary="dashed",
                          right_boundary="solid", successors=[f"{arm}_1_straight", f"{arm}_1_right"], **road))
        lanes.append(lane(f"{arm}_out_0", out0, right_neighbor=f"{arm}_out_1", left_boundary="double_solid",
                          right_boundary="dashed", successors=[], **road))
        lanes.append(lane(f"{arm}_out_1", out1, left_neighbor=f"{arm}_out_0", left_boundary="dashed",
                          right_boundary="solid", successors=[], **road))
        lanes.append(lane(f"{arm}_0_straight", [rot(p, k) for p in straight(1.75, -H, 1.75, H, step=4.0)],
                          successors=[f"{straight_to}_out_0"], **conn))
        lanes.append(lane(f"{arm}_1_straight", [rot(p, k) for p in straight(5.25, -H, 5.25, H, step=4.0)],
                          successors=[f"{straight_to}_out_1"], **conn))
        lanes.append(lane(f"{arm}_0_left", [rot(p, k) for p in arc(-H, -H, H + 1.75, 0.0, math.pi / 2)],
                          successors=[f"{left_to}_out_0"], **conn))
        lanes.append(lane(f"{arm}_1_right", [rot(p, k) for p in arc(H, -H, H - 5.25, math.pi, math.pi / 2)],
                          successors=[f"{right_to}_out_1"], **conn))
        north_south = arm in ("S", "N")
        schedule = [{"state": "green", "duration": 30.0}, {"state": "yellow", "duration": 3.0},
                    {"state": "red", "duration": 33.0}]
        lights.append({"id": f"{arm}_light", "controlled_lanes": [f"{arm}_in_0", f"{arm}_in_1"],
                       "stop_line": pts([rot((0.0, -H - 4.0), k), rot((7.0, -H - 4.0), k)]),
                       "schedule": schedule, "offset": 0.0 if north_south else 33.0})
    return {"format_version": 1, "id": "junction_4way", "lanes": lanes, "lights": lights, "stop_signs": []}


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "maps"
    out.mkdir(parents=True, exist_ok=True)
    for doc in (highway(), two_lane(), junction()):
        (out / f"{doc['id']}.json").write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
