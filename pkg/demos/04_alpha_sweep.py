# coding: utf-8

# # How much should proposal length count?
#
# alpha trades the coverage term against the similarity term. Sweeping it
# reuses the cached captions and embeddings, so only grounding reruns.

# In[1]:

import json
import tempfile
from pathlib import Path

from groundline.cli import main
from groundline.synthetic import make_corpus

root = Path(tempfile.mkdtemp()) / "corpus"
corpus = make_corpus(root, n_videos=10, queries_per_video=2, seed=11)
args = ["--config", str(corpus.config_path), "--offline"]
for stage in ("debias", "caption", "embed"):
    assert main([stage, *args]) == 0


# In[2]:

out = root / "sweep"
assert main(["ground", *args, "--alpha", "0,0.25,0.5,0.75,1", "--out", str(out)]) == 0

def alpha_of(path):
    return float(path.name.split("=")[1].removesuffix(".metrics.json"))


for path in sorted(out.glob("*.metrics.json"), key=alpha_of):
    m = json.loads(path.read_text())
    print("alpha=%-5g R1@0.5 %5.1f  mAP %5.1f" % (alpha_of(path), m["r1"]["0.5"], 100 * m["map_avg"]))
