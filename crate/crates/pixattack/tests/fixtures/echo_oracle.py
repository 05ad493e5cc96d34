"""Line-protocol test oracle.

Modes:
  fixed      reply with the same probability vector to every request
  mean       two classes, p0 = mean pixel / 255
  wrong-id   echo id + 1
  bad-sum    probabilities summing to 0.8
  die        exit after the first request without replying
"""
import base64
import json
import sys

mode = sys.argv[1] if len(sys.argv) > 1 else "fixed"
FIXED = [0.1, 0.2, 0.30000000000000004, 0.39999999999999997]

for line in sys.stdin:
    req = json.loads(line)
    pixels = base64.b64decode(req["pixels"])
    assert len(pixels) == req["h"] * req["w"] * req["c"]
    rid = req["id"]
    if mode == "die":
        sys.exit(0)
    if mode == "fixed":
        probs = FIXED
    elif mode == "mean":
        m = sum(pixels) / len(pixels) / 255.0
        probs = [m, 1.0 - m]
    elif mode == "wrong-id":
        rid += 1
        probs = FIXED
    elif mode == "bad-sum":
        probs = [0.5, 0.3]
    sys.stdout.write(json.dumps({"id": rid, "probs": probs}, separators=(",", ":")) + "\n")
    sys.stdout.flush()
