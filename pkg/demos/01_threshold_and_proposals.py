# coding: utf-8

# # From a similarity row to ranked moments
#
# One row of a similarity matrix holds the cosine similarity between one
# rephrased query and every frame caption. Here we build a toy row, pick the
# adaptive threshold, scan it into proposals, score them and suppress overlaps.

# In[1]:

import numpy as np

from groundline import GeneratorConfig, NmsConfig, ScorerConfig, SimilarityMatrix
from groundline import dynamic_threshold, ground, nms, scan_proposals, score_proposal

rng = np.random.default_rng(0)
row = rng.uniform(0.05, 0.25, 60)
row[20:32] += 0.5   # the event the query talks about
row[25] -= 0.45     # one badly captioned frame inside it
row[45:48] += 0.3   # a weaker distractor
print(np.round(row, 2))


# The threshold comes from a 10-bin histogram of the row: walk down from the
# top bin until 8 frames are covered and take that bin's lower edge.

# In[2]:

theta = dynamic_threshold(row, GeneratorConfig(n_bins=10, top_k=8))
print("theta =", round(theta, 3), "relevant frames:", np.flatnonzero(row >= theta))


# Scanning joins relevant frames into proposals. Gaps of up to 6 frames are
# bridged, so the dip at frame 25 does not split the event.

# In[3]:

props = scan_proposals(row, theta, gap_lambda=6, fps=0.5)
for p in props:
    print(p.start_frame, p.end_frame, p.segment)


# Each proposal gets a fused score: the share of relevant frames it covers,
# blended with how similar those frames are.

# In[4]:

scored = [score_proposal(p, row, theta, ScorerConfig(alpha=0.5)) for p in props]
for s in scored:
    print(s.segment, "s_l=%.3f s_sim=%.3f s_f=%.3f" % (s.s_l, s.s_sim, s.s_f))
print([s.segment for s in nms(scored, NmsConfig(0.75))])


# With several rephrasings the rows are pooled before suppression. `ground`
# does the whole thing for a matrix and returns (segment, score) pairs.

# In[5]:

rows = np.stack([np.clip(row + rng.normal(0, 0.03, row.size), -1, 1) for _ in range(5)])
matrix = SimilarityMatrix.from_rows(rows, fps=0.5)
for seg, score in ground(matrix)[:3]:
    print(seg, round(score, 3))
