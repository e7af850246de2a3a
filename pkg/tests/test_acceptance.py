"""Acceptance criteria, each checked at its stated tolerance.

Every test records one PASS/FAIL line (SKIP for the optional reproduction
check), printed in the "acceptance criteria" section of the pytest summary.
Run alone with ``pytest tests/test_acceptance.py``.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import skip_criterion
from groundline.cli import main
from groundline.config import default_config
from groundline.core import SimilarityMatrix, TimeSegment, iou
from groundline.evaluate import (
    MomentGroundTruth,
    average_precision,
    detection_map,
    evaluate,
    parse_grid,
    ranking_ap,
)
from groundline.grounder import (
    GeneratorConfig,
    NmsConfig,
    Proposal,
    ScoredProposal,
    ScorerConfig,
    dynamic_threshold,
    ground,
    ground_proposals,
    nms,
    scan_proposals,
    score_proposal,
)
from groundline.synthetic import make_corpus
from oracles import ap_oracle, nms_oracle, scan_run_merge, threshold_oracle

REPRO_ENV = "GROUNDLINE_REPRO_CONFIG"


def test_ac01_threshold_oracle(criterion):
    rng = np.random.default_rng(1001)
    cases = []
    for _ in range(1000):
        n_v = int(rng.integers(1, 51))
        # mix continuous rows with coarse ones so ties and edge hits occur
        row = rng.uniform(-1, 1, n_v) if rng.random() < 0.5 else rng.integers(-4, 5, n_v) / 4
        cases.append((row, int(rng.integers(1, 17)), int(rng.integers(1, n_v + 1))))
    t0 = time.perf_counter()
    got = [dynamic_threshold(row, GeneratorConfig(n_bins=b, top_k=k)) for row, b, k in cases]
    elapsed = time.perf_counter() - t0
    mismatches = sum(g != threshold_oracle(row, b, k) for g, (row, b, k) in zip(got, cases))
    criterion("AC1 threshold oracle", mismatches == 0 and elapsed < 1.0,
              f"{mismatches} mismatches / 1000, {elapsed:.3f}s")


def test_ac02_scan_oracle(criterion):
    rng = np.random.default_rng(1002)
    cases = []
    for _ in range(1000):
        n_v = int(rng.integers(1, 151))
        row = rng.uniform(-1, 1, n_v) if rng.random() < 0.5 else rng.integers(0, 4, n_v) / 4
        theta = float(rng.choice(row)) if rng.random() < 0.5 else float(rng.uniform(-1, 1))
        cases.append((row, theta, int(rng.integers(0, 11))))
    t0 = time.perf_counter()
    got = [scan_proposals(row, th, lam) for row, th, lam in cases]
    elapsed = time.perf_counter() - t0
    mismatches = sum(
        [(p.start_frame, p.end_frame) for p in g] != scan_run_merge(list(row), th, lam)
        for g, (row, th, lam) in zip(got, cases)
    )
    criterion("AC2 scan oracle", mismatches == 0 and elapsed < 1.0,
              f"{mismatches} mismatches / 1000, {elapsed:.3f}s")


def test_ac03_nms_oracle(criterion):
    rng = np.random.default_rng(1003)
    cases = []
    for _ in range(1000):
        n = int(rng.integers(0, 65))
        props = [
            ScoredProposal(
                Proposal(int(rng.integers(0, 5)), int(s), int(s + rng.integers(0, 12)), 0.5), 0.0, 0.0,
                # coarse scores force ties so every tie-break level is exercised
                float(rng.integers(0, 6)) / 5,
            )
            for s in rng.integers(0, 60, n)
        ]
        cases.append((props, float(rng.choice([0.3, 0.5, 0.75, 1.0]))))
    t0 = time.perf_counter()
    got = [nms(props, NmsConfig(mu)) for props, mu in cases]
    elapsed = time.perf_counter() - t0
    mismatches = 0
    for kept, (props, mu) in zip(got, cases):
        want = nms_oracle([(p.segment, p.s_f, p.proposal.query_index) for p in props], mu)
        mismatches += [(p.segment, p.s_f, p.proposal.query_index) for p in kept] != want
    criterion("AC3 NMS oracle", mismatches == 0 and elapsed < 1.0,
              f"{mismatches} mismatches / 1000, {elapsed:.3f}s")


@pytest.mark.filterwarnings("ignore::groundline.evaluate.MissingPrediction")
def test_ac04_metric_oracle(criterion):
    rng = np.random.default_rng(1004)
    grid = parse_grid("0.5:0.05:0.95")
    worst = 0.0
    for _ in range(500):
        preds, gts = {}, {}
        for q in range(int(rng.integers(1, 4))):
            segs = tuple(TimeSegment(float(s), float(s + rng.integers(1, 30))) for s in rng.integers(0, 60, int(rng.integers(1, 6))))
            gts[q] = MomentGroundTruth(q, segs, 100.0)
            preds[q] = [
                (float(s), float(s + rng.integers(1, 30)), float(rng.integers(0, 20)) / 19)
                for s in rng.integers(0, 60, int(rng.integers(0, 11)))
            ]
        map_at, map_avg = detection_map(preds, gts, grid, max_windows=None)
        want_at = {m: float(np.mean([ap_oracle(preds[q], list(gts[q].segments), m) for q in gts])) for m in grid}
        worst = max(worst, abs(map_avg - float(np.mean(list(want_at.values())))))
        worst = max(worst, max(abs(map_at[f"{m:g}"] - v) for m, v in want_at.items()))
    g = [TimeSegment(0, 10)]
    fixtures = (
        average_precision([(40, 50, 0.9), (0, 10, 0.8)], g, 0.5) == 0.5
        and abs(ranking_ap([0.7, 0.8, 0.9, 0.1], [True, False, True, False]) - 0.8333333333333333) < 1e-15
        and iou(TimeSegment(0, 10), TimeSegment(4, 12)) == 6 / 12
    )
    criterion("AC4 metric oracle", worst < 1e-9 and fixtures,
              f"max |diff| {worst:.2e} over 500 instances, hand fixtures {'ok' if fixtures else 'WRONG'}")


def test_ac05_fused_score_endpoints(criterion):
    rng = np.random.default_rng(1005)
    worst_end, worst_lin, n = 0.0, 0.0, 0
    while n < 200:
        row = rng.uniform(-1, 1, int(rng.integers(5, 80)))
        theta = dynamic_threshold(row)
        for p in scan_proposals(row, theta, int(rng.integers(0, 7))):
            if n == 200:
                break
            n += 1
            base = score_proposal(p, row, theta, ScorerConfig(0.0))
            relevant = row >= theta
            l_ratio = relevant[p.start_frame:p.end_frame + 1].sum() / relevant.sum()
            one = score_proposal(p, row, theta, ScorerConfig(1.0))
            worst_end = max(worst_end, abs(base.s_f - base.s_sim), abs(one.s_f - l_ratio))
            for a in np.linspace(0, 1, 11):
                sf = score_proposal(p, row, theta, ScorerConfig(float(a))).s_f
                worst_lin = max(worst_lin, abs(sf - (a * l_ratio + (1 - a) * base.s_sim)))
    criterion("AC5 fused-score endpoints and linearity", worst_end < 1e-12 and worst_lin < 1e-12,
              f"endpoint dev {worst_end:.1e}, affine dev {worst_lin:.1e} over {n} proposals")


def test_ac06_degenerate_inputs(criterion):
    ok = True
    for c in (-0.3, 0.0, 0.42, 1.0):
        m = SimilarityMatrix.from_rows(np.full((5, 37), c), fps=0.5)
        for row in m.values:
            theta = dynamic_threshold(row)
            pre = scan_proposals(row, theta, 6)
            ok &= theta == c and [(p.start_frame, p.end_frame) for p in pre] == [(0, 36)]
        post = ground_proposals(m)
        ok &= len(post) == 1 and post[0].segment == TimeSegment(0.0, 74.0)
    report = evaluate({1: [(50, 60, 1.0)], 2: [(0, 3, 0.4)]}, {1: MomentGroundTruth(1, (TimeSegment(0, 10),), 100),
                                                          2: MomentGroundTruth(2, (TimeSegment(5, 9),), 100)})
    ok &= all(v == 0.0 for v in report.r1_at.values()) and report.miou == 0.0
    criterion("AC6 degenerate inputs", bool(ok), "all-equal rows and empty-overlap eval")


def _offline_run(root: Path) -> tuple[bytes, bytes, float]:
    t0 = time.perf_counter()
    corpus = make_corpus(root, n_videos=20, queries_per_video=2, seed=7)
    base = ["--config", str(corpus.config_path), "--offline", "--seed", "7"]
    for stage in ("debias", "caption", "embed", "ground", "eval"):
        if main([stage, *base]) != 0:
            raise RuntimeError(f"stage {stage} failed")
    elapsed = time.perf_counter() - t0
    work = root / "work"
    return (work / "predictions.jsonl").read_bytes(), (work / "predictions.metrics.json").read_bytes(), elapsed


def test_ac07_offline_determinism(criterion, tmp_path, capsys):
    pred_a, rep_a, t_a = _offline_run(tmp_path / "run_a")
    pred_b, rep_b, t_b = _offline_run(tmp_path / "run_b")
    n_queries = len(pred_a.splitlines())
    same = pred_a == pred_b and rep_a == rep_b
    criterion("AC7 end-to-end offline determinism", same and n_queries == 40 and max(t_a, t_b) < 10.0,
              f"identical={same}, {n_queries} queries, runs {t_a:.2f}s / {t_b:.2f}s")


def test_ac08_grounding_throughput(criterion):
    rng = np.random.default_rng(1008)
    matrices = [SimilarityMatrix.from_rows(rng.uniform(-1, 1, (5, 150)), fps=0.5) for _ in range(10_000)]
    gen, sc, nm = GeneratorConfig(), ScorerConfig(), NmsConfig()
    t0 = time.perf_counter()
    for m in matrices:
        ground(m, gen, sc, nm)
    elapsed = time.perf_counter() - t0
    criterion("AC8 grounding throughput", elapsed <= 5.0, f"10,000 matrices (5x150) in {elapsed:.2f}s")


def test_ac09_default_hyperparameters(criterion, tmp_path):
    expected = {
        "n_q": 5,
        "generator.n_bins": 10,
        "generator.top_k": 8,
        "generator.gap_lambda": 6,
        "scorer.alpha": 0.5,
        "nms.iou_threshold": 0.75,
        "providers.caption_temperature": 0.1,
        "providers.debias_temperature": 0.2,
    }
    fps = {"qvhighlights": 0.5, "charades": 0.5, "activitynet": 1 / 3}
    bad = []
    for kind, want_fps in fps.items():
        out = tmp_path / f"{kind}.json"
        main(["init-config", "--kind", kind, "--out", str(out)])
        data = json.loads(out.read_text())
        for path, want in {**expected, "dataset.fps": want_fps}.items():
            node = data
            for part in path.split("."):
                node = node[part]
            if node != want:
                bad.append(f"{kind}:{path}={node}")
    criterion("AC9 default hyperparameters", not bad and default_config().to_dict() == json.loads(
        (tmp_path / "qvhighlights.json").read_text()), ", ".join(bad) or "all defaults match")


def test_ac10_optional_reproduction(criterion):
    """Needs released captions/debiased queries and a live sentence-embedding service.

    ``GROUNDLINE_REPRO_CONFIG`` must name a pipeline config whose work_dir
    already holds ``debiased.jsonl`` and ``captions/`` for QVHighlights val,
    and whose providers point at the embedding endpoint.
    """
    cfg_path = os.environ.get(REPRO_ENV)
    if not cfg_path or not Path(cfg_path).exists():
        skip_criterion("AC10 optional reproduction", f"set {REPRO_ENV} to run (not CI-gated)")
    assert main(["ground", "--config", cfg_path]) == 0
    from groundline.config import PipelineConfig

    work = Path(PipelineConfig.load(cfg_path).work_dir)
    assert main(["eval", "--config", cfg_path]) == 0
    report = json.loads((work / "predictions.metrics.json").read_text())
    r1, mavg = report["r1"]["0.5"], 100 * report["map_avg"]
    criterion("AC10 optional reproduction", abs(r1 - 54.26) <= 1.0 and abs(mavg - 30.91) <= 1.0,
              f"R1@0.5={r1:.2f} (target 54.26 +/- 1), mAP Avg={mavg:.2f} (target 30.91 +/- 1)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
