"""End-to-end training on the planted-pattern benchmark (slow)."""

import pytest

from neste.evaluation import eval_triple_prediction
from neste.patterns import heatmap_matches, relation_heatmaps
from neste.synthetic import IMPLICATION_RELATION, SYMMETRY_RELATION, generate_synthetic_graph
from neste.training import TrainConfig, train

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def benchmark():
    return generate_synthetic_graph(seed=0)


@pytest.mark.parametrize("algebra", ["Q", "H", "S"])
def test_planted_patterns_are_learned(benchmark, algebra):
    cfg = TrainConfig(algebra=algebra, epochs=200, valid_every=10, seed=1)
    result = train(benchmark, cfg)

    records = {r.epoch: r for r in result.log.records}
    assert records[50].loss < records[1].loss
    first = [mrr for _, mrr in result.log.validation_points[:3]]
    assert first[0] < first[1] < first[2]

    report = eval_triple_prediction(result.store, benchmark, "test")
    assert report.mrr >= 0.80
    assert report.hits_at[10] >= 0.95

    heatmaps = relation_heatmaps(result.store)
    assert heatmap_matches(heatmaps[IMPLICATION_RELATION], "diagonal")
    assert heatmap_matches(heatmaps[SYMMETRY_RELATION], "anti_diagonal")
