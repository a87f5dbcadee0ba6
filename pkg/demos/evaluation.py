"""Walk through VOC-style mAP on a corpus small enough to score by hand.

Three images, two classes, seven predictions. Matching is greedy in
confidence order; a hit needs IoU >= 0.5 against an unclaimed same-class
box in the same image; boxes flagged `difficult` neither count as ground
truth nor punish a detector that finds them.
"""

import littleyolo as ly
from littleyolo.evaluate import (evaluation_report, format_report,
                                 precision_recall)


def main():
    corpus = ly.EvalCorpus()
    corpus.add_ground_truth("img0", "car", (0, 0, 10, 10))
    corpus.add_ground_truth("img0", "bus", (20, 20, 30, 30))
    corpus.add_ground_truth("img1", "car", (0, 0, 10, 10))
    corpus.add_ground_truth("img1", "car", (50, 50, 70, 70), difficult=True)
    corpus.add_ground_truth("img2", "bus", (5, 5, 25, 25))

    corpus.add_prediction("img0", "car", 0.9, (0, 0, 10, 10))      # exact hit
    corpus.add_prediction("img1", "car", 0.8, (0, 5, 10, 15))      # iou 1/3: miss
    corpus.add_prediction("img1", "car", 0.7, (50, 50, 70, 70))    # difficult: ignored
    corpus.add_prediction("img2", "car", 0.6, (0, 0, 10, 10))      # no car here
    corpus.add_prediction("img0", "bus", 0.9, (100, 100, 110, 110))
    corpus.add_prediction("img0", "bus", 0.8, (20, 20, 30, 30))
    corpus.add_prediction("img2", "bus", 0.7, (5, 5, 25, 25))

    for name in corpus.class_names:
        preds = [p for p in corpus.predictions if p.class_name == name]
        gts = [g for g in corpus.ground_truths if g.class_name == name]
        flags, total = ly.match_class(preds, gts, iou_threshold=0.5)
        marks = ["TP" if f else "--" if f is None else "FP" for f in flags]
        print(f"{name}: flags {marks}, countable ground truth {total}")
        prec, rec = precision_recall(flags, total)
        for p, r in zip(prec, rec):
            print(f"    precision {p:.3f} at recall {r:.3f}")
        print(f"  AP {ly.average_precision(flags, total):.4f}")

    # car: only the 0.9 hit lands, recall stops at 1/2 -> AP 0.5
    # bus: both boxes are found but a confident miss leads -> AP 2/3
    print()
    doc = evaluation_report(corpus, iou_threshold=0.5)
    print(format_report(doc))


if __name__ == "__main__":
    main()
