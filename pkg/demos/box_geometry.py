"""IoU vs GIoU on a few boxes, then gradient descent with the analytic grad.

GIoU extends IoU below zero for disjoint boxes by penalizing the empty
share of the smallest enclosing box, which gives optimization a signal
even when the overlap (and therefore IoU's gradient) is exactly zero.
"""

import numpy as np

import littleyolo as ly
from littleyolo.boxes import BBox


def show(label, a, b):
    g = ly.giou(a, b)
    print(f"{label:<28} iou {g.iou:+.4f}   giou {g.giou:+.4f}   "
          f"loss {ly.giou_loss(a, b):.4f}")


def main():
    show("identical", BBox(0, 0, 2, 2), BBox(0, 0, 2, 2))
    show("corner overlap", BBox(0, 0, 2, 2), BBox(1, 1, 3, 3))
    show("disjoint, touching", BBox(0, 0, 1, 1), BBox(2, 0, 3, 1))
    show("disjoint, far apart", BBox(0, 0, 1, 1), BBox(9, 9, 10, 10))
    print()

    # Slide a box onto a target by following -d(loss)/d(pred). IoU alone
    # could not start: the boxes begin with zero overlap, so its gradient
    # is zero; GIoU's enclosing-box term supplies the pull. The raw
    # gradient is tiny far from the target, so steps are normalized to a
    # fixed pixel budget (with one decay for the endgame).
    gt = BBox(6.0, 6.0, 9.0, 10.0)
    pred = np.array([0.0, 0.0, 2.0, 2.0])
    print(f"target {tuple(gt)}")
    for it in range(1100):
        box = BBox(*pred)
        if it % 200 == 0:
            print(f"  iter {it:4d}  loss {ly.giou_loss(box, gt):.4f}  "
                  f"pred ({pred[0]:5.2f}, {pred[1]:5.2f}, "
                  f"{pred[2]:5.2f}, {pred[3]:5.2f})")
        grad = ly.giou_loss_grad(box, gt)
        scale = float(np.abs(grad).max())
        if scale < 1e-12:
            break
        step = 0.05 if it < 800 else 0.005
        pred -= step * grad / scale
    final = BBox(*pred)
    print(f"  final      loss {ly.giou_loss(final, gt):.4f}  "
          f"iou {ly.iou(final, gt):.4f}")


if __name__ == "__main__":
    main()
