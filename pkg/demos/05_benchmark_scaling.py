"""
Re-ranking cost versus candidate count
======================================

Times the two geometric-verification strategies while the number of
re-ranked candidates grows. Per-candidate registration scales linearly;
the spectral score is one batched computation whose fixed costs amortize
across candidates (and spread over threads on multicore hosts).
"""

from scanrank import WorldConfig, generate_world
from scanrank.pipeline import RunConfig, bench_table, run_bench

world = generate_world(WorldConfig(seed=0, num_places=80, num_queries=20))
cfg = RunConfig(
    seed=0,
    threads=0,  # auto
    bench_n_topk=(2, 5, 10, 20),
    bench_strategies=("spectral", "ransac_rir"),
)

rows, _ = run_bench(world.database, world.queries, cfg)
print(bench_table(rows))

by = {(r.strategy, r.n_topk): r.mean_rerank_ms for r in rows}
for strategy in cfg.bench_strategies:
    ratio = by[(strategy, 20)] / by[(strategy, 2)]
    print(f"{strategy}: t(20)/t(2) = {ratio:.1f}")
