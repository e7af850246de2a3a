# coding: utf-8

# # Scoring predictions
#
# Moment retrieval is scored with R1@m (is the top window a hit?), mAP over
# IoU thresholds and mIoU. Highlight detection ranks clips by saliency.

# In[1]:

from groundline import TimeSegment, iou
from groundline.evaluate import (
    MomentGroundTruth,
    SaliencyGroundTruth,
    average_precision,
    evaluate,
    ranking_ap,
)

print(iou(TimeSegment(0, 10), TimeSegment(4, 12)))   # 6 / 12


# A confident wrong window ahead of a correct one halves the precision at the
# hit, so AP is 0.5.

# In[2]:

gt = [TimeSegment(0, 10)]
print(average_precision([(40, 50, 0.9), (0, 10, 0.8)], gt, 0.5))


# Clip ranking AP: positives ranked 1st and 3rd give (1 + 2/3) / 2.

# In[3]:

print(ranking_ap([0.7, 0.8, 0.9, 0.1], [True, False, True, False]))


# A small report with two queries and per-clip annotator scores.

# In[4]:

gts = {
    "a": MomentGroundTruth("a", (TimeSegment(4, 12),), 20.0),
    "b": MomentGroundTruth("b", (TimeSegment(0, 6), TimeSegment(14, 18)), 20.0),
}
preds = {"a": [(0, 10, 0.9), (4, 12, 0.4)], "b": [(14, 18, 0.8), (0, 4, 0.7)]}
sal_gt = {"a": SaliencyGroundTruth("a", [(4, 4, 3), (1, 0, 2), (2, 3, 4)])}
sal_pred = {"a": [0.9, 0.1, 0.5]}

report = evaluate(preds, gts, sal_pred, sal_gt)
print(report.format_table())
