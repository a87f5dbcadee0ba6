"""Cluster synthetic box dimensions into anchors with IoU k-means.

A detector's anchors should tile the width/height distribution of real
objects. We fake such a distribution with six gaussian blobs, cluster it
under the 1-IoU distance, and check how well the anchors cover the boxes.
"""

import numpy as np

import littleyolo as ly
from littleyolo.anchors import anchors_line, lloyd_cluster


def make_corpus(rng, n=2000):
    centers = np.array([[0.04, 0.04], [0.10, 0.10], [0.23, 0.18],
                        [0.28, 0.40], [0.62, 0.40], [0.80, 0.76]])
    picks = centers[rng.integers(0, len(centers), n)]
    dims = picks * (1 + rng.normal(0, 0.05, (n, 2)))
    return np.clip(dims, 0.004, 1.0), centers


def main():
    rng = np.random.default_rng(3)
    dims, centers = make_corpus(rng)
    print(f"corpus: {len(dims)} (w, h) pairs drawn around 6 blob centers\n")

    # A single Lloyd run lives or dies by its k-means++ draw: seed 0 stalls
    # in a poor local optimum here while seed 11 finds the real structure.
    # cluster_anchors runs several seedings and keeps the cheapest, so the
    # demo corpus never depends on one lucky draw.
    for seed in (0, 11):
        result = lloyd_cluster(dims, k=6, seed=seed)
        trace = "  ".join(f"{c:.2f}" for c in result.costs)
        print(f"seed {seed:2d} total 1-IoU cost per iteration: {trace}")
    print()

    aset = ly.cluster_anchors(dims, k=6, net_w=416, net_h=416)
    print("anchors (area-ascending, scaled to a 416 net):")
    print("  " + anchors_line(aset))
    print(f"masks: coarse head {aset.masks[0]}, fine head {aset.masks[1]}")
    print()

    truth = np.sort(centers.prod(axis=1))
    got = np.sort([w * h / 416 / 416 for w, h in aset.anchors])
    worst = np.abs(got - truth).max() / truth.max()
    print(f"recovered the generating areas to within {worst:.1%}")

    score = ly.mean_iou_report(dims * 416, aset.anchors)
    print(f"mean best-anchor IoU over the corpus: {score:.3f}")


if __name__ == "__main__":
    main()
