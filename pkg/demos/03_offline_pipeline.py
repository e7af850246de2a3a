# coding: utf-8

# # The whole pipeline, offline
#
# A synthetic corpus stands in for a real dataset: JPEG frames, an
# annotation file, and canned model answers so no service is needed. The
# stages are the same ones the command line runs.

# In[1]:

import json
import tempfile
from pathlib import Path

from groundline.cli import main
from groundline.synthetic import make_corpus

root = Path(tempfile.mkdtemp()) / "corpus"
corpus = make_corpus(root, n_videos=6, queries_per_video=2, seed=7)
print(corpus.annotation_path.read_text().splitlines()[0])


# Each stage reads the previous one's output from the work directory and
# caches every model call, so reruns are cheap and resumable.

# In[2]:

args = ["--config", str(corpus.config_path), "--offline", "--seed", "7"]
for stage in ("debias", "caption", "embed", "ground", "eval"):
    assert main([stage, *args]) == 0

work = root / "work"
print(sorted(p.name for p in work.iterdir()))


# One prediction line: ranked windows plus a saliency score per clip.

# In[3]:

first = json.loads((work / "predictions.jsonl").read_text().splitlines()[0])
print(first["qid"], first["pred_relevant_windows"][:3])
print(json.dumps(json.loads((work / "predictions.metrics.json").read_text()), indent=1))
