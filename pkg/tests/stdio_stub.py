"""Minimal stdio endpoint used to exercise the protocol client in tests.

Modes (argv[1]):
  echo     -- output = first coordinate
  and2     -- output = 1 if both of two binary inputs are 1
  garbage  -- responds with a non-JSON line (protocol-error path)
  nan      -- responds with NaN outputs
  silent   -- never responds (timeout path)
"""

import json
import sys


def main() -> int:
    mode = sys.argv[1] if len(sys.argv) > 1 else "echo"
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        if mode == "silent":
            continue
        if mode == "garbage":
            print("not json at all")
            sys.stdout.flush()
            continue
        req = json.loads(line)
        if req.get("op") == "spec":
            features = ["x0", "x1"] if mode == "and2" else ["x0", "x1", "x2"]
            print(json.dumps({"id": req.get("id"), "features": features, "output_type": "numeric"}))
        else:
            points = req.get("points", [])
            if mode == "nan":
                outputs = [float("nan") for _ in points]
                print(json.dumps({"id": req.get("id"), "outputs": ["NaN"] * len(points)}))
                sys.stdout.flush()
                continue
            if mode == "and2":
                outputs = [1.0 if (p[0] == 1 and p[1] == 1) else 0.0 for p in points]
            else:
                outputs = [float(p[0]) for p in points]
            print(json.dumps({"id": req.get("id"), "outputs": outputs}))
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
