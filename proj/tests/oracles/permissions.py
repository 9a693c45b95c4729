#!/usr/bin/env python3
"""Enumerates every (item, actor) pair of a task file and states whether
that actor may take the item from its starting area: the robot reaches
every area, a human only shared ones.

With --check FILE, compares against a frozen expectation file.
"""
import json
import sys


def table(task):
    access = {a["name"]: a["access"] for a in task["areas"]}
    rows = []
    for item in task["items"]:
        for actor in ("human", "robot"):
            allowed = actor == "robot" or access[item["area"]] == "shared"
            rows.append({"item": item["name"], "actor": actor, "allowed": allowed})
    return rows


def main(argv):
    with open(argv[1], encoding="utf-8") as f:
        got = table(json.load(f))
    if len(argv) > 3 and argv[2] == "--check":
        with open(argv[3], encoding="utf-8") as f:
            want = json.load(f)
        if got != want:
            print("FAIL permission table differs from", argv[3])
            return 1
        print(f"{len(got)} pairs match")
        return 0
    print(json.dumps(got, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
