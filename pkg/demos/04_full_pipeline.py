"""
Full localization pipeline: retrieve, re-rank, register, evaluate
=================================================================

Runs the complete pipeline twice on one aliased world - once with plain
descriptor retrieval and once with spectral re-ranking - and compares
recall, pose success rate and the top-1 distance statistics.
"""

from scanrank import WorldConfig, generate_world
from scanrank.metrics import (
    top1_distance_regressions,
    mean_pose_errors,
    mean_reciprocal_rank,
    recall_at_k,
    success_rate,
)
from scanrank.pipeline import RunConfig, process_queries

world = generate_world(WorldConfig(seed=0, num_places=80, num_queries=25))
print(f"world: {len(world.database)} database scans, {len(world.queries)} queries\n")

runs = {}
for strategy in ("none", "spectral"):
    cfg = RunConfig(strategy=strategy, n_topk=20, seed=0)
    runs[strategy] = process_queries(world.database, world.queries, cfg)

header = f"{'metric':<28} {'baseline':>10} {'re-ranked':>10}"
print(header)
print("-" * len(header))
for label, fn in [
    ("Recall@1 (5 m)", lambda o, rr: recall_at_k(o, 1, 5.0, reranked=rr)),
    ("Recall@5 (5 m)", lambda o, rr: recall_at_k(o, 5, 5.0, reranked=rr)),
    ("MRR (5 m)", lambda o, rr: mean_reciprocal_rank(o, 5.0, reranked=rr)),
]:
    base = fn(runs["none"], False)
    sgv = fn(runs["spectral"], True)
    print(f"{label:<28} {base:>10.1f} {sgv:>10.1f}")

print(f"{'pose success rate':<28} {success_rate(runs['none']):>10.1f} "
      f"{success_rate(runs['spectral']):>10.1f}")
rte_b, rre_b = mean_pose_errors(runs["none"])
rte_s, rre_s = mean_pose_errors(runs["spectral"])
print(f"{'mean RTE (m)':<28} {rte_b:>10.2f} {rte_s:>10.2f}")
print(f"{'mean RRE (deg)':<28} {rre_b:>10.2f} {rre_s:>10.2f}")

violations, before, after = top1_distance_regressions(runs["spectral"], 5.0)
print(f"\ntop-1 geo distance: {before:.1f} m -> {after:.1f} m "
      f"({violations} queries got farther)")
