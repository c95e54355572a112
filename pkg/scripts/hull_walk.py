#!/usr/bin/env python3
"""Walk a control-frame hull, then step off its edge.

Builds a three-frame motion hull and visits interior points, an edge,
and two extrapolated points outside the simplex. Prints per-point latent
digests and inside/outside flags; the outputs land in ./out/hull_walk
with a manifest that `latentdiff replay` can verify later.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from latentdiff.harness import MotionSpec, run_latent_motion
from latentdiff.tensors import Weights

FRAMES = ("figure crouching", "figure leaping", "figure landing")

TRAVERSAL = (
    Weights((1.0, 0.0, 0.0)),      # vertex: pure first frame
    Weights((0.5, 0.5, 0.0)),      # edge midpoint
    Weights((1 / 3, 1 / 3, 1 / 3)),  # centroid
    Weights((0.0, 0.5, 0.5)),      # opposite edge
    Weights((-0.25, 0.75, 0.5)),   # just outside the hull
    Weights((-1.0, 1.5, 0.5)),     # far extrapolation
)


def main() -> None:
    out_dir = Path("out/hull_walk")
    spec = MotionSpec(frames=FRAMES, traversal=TRAVERSAL, prompt="figure in motion")
    points = run_latent_motion(spec, out_dir)

    print(f"frames: {', '.join(FRAMES)}")
    print()
    for point in points:
        where = "inside " if point["inside"] else "OUTSIDE"
        weights = ", ".join(f"{w:+.3f}" for w in point["weights"])
        if point.get("failed"):
            print(f"{point['name']} [{where}] ({weights}) failed: {point['error']}")
        else:
            print(f"{point['name']} [{where}] ({weights}) latent {point['latent_digest']}")
    print()
    print(f"wrote {out_dir.resolve()} (verify later with: latentdiff replay --dir {out_dir})")


if __name__ == "__main__":
    main()
