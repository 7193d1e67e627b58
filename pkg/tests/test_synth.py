import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score

from netpart.clustering import ClusterSet, hierarchical_partition
from netpart.errors import InvalidScenario, UniverseMismatch
from netpart.graph import build_graph, connected_components
from netpart.metrics import network_intra
from netpart.synth import (
    RegionProfile,
    SynthScenario,
    adjusted_rand_index,
    generate,
    load_scenario,
    tidal_pair,
)


def test_zero_noise_regions_identical():
    data = generate(SynthScenario(noise_sigma=0.0, seed=3))
    day = data.day()
    for cluster in data.truth.clusters():
        first = day[cluster[0]].values
        assert all(np.array_equal(day[r].values, first) for r in cluster)


def test_same_seed_same_output():
    a, b = generate(SynthScenario(seed=9)), generate(SynthScenario(seed=9))
    assert all(np.array_equal(a.day()[r].values, b.day()[r].values) for r in a.graph.roads)
    c = generate(SynthScenario(seed=10))
    assert not np.array_equal(a.day()["r000c000"].values, c.day()["r000c000"].values)


def test_truth_regions_connected_and_series_valid():
    for rows, cols, count in [(12, 12, 4), (5, 7, 3), (3, 3, 9), (1, 6, 2)]:
        sc = SynthScenario(rows, cols, count, region_profiles=[SynthScenario().region_profiles[0]] * count)
        data = generate(sc)
        assert data.truth.k == count
        for c in data.truth.clusters():
            assert len(connected_components(data.graph, c)) == 1
        for s in data.day().values():
            assert len(s.values) == 288 and s.values.min() >= 1.0


def test_invalid_scenarios():
    with pytest.raises(InvalidScenario):
        generate(SynthScenario(noise_sigma=-1))
    with pytest.raises(InvalidScenario):
        generate(SynthScenario(rows=2, cols=2, region_count=5))
    with pytest.raises(InvalidScenario):
        generate(SynthScenario(region_count=5))  # only four default profiles


def test_morning_vs_evening_regions_distance():
    depth, width = 20.0, 10.0
    morning = RegionProfile(50.0, depth, 0.0, 96.0, 210.0, width)
    evening = RegionProfile(50.0, 0.0, depth, 96.0, 210.0, width)
    data = generate(SynthScenario(1, 4, 2, [morning, evening], noise_sigma=0.0))
    # disjoint Gaussian dips: L1 gap = two dip areas, depth * width * sqrt(2 pi) each
    cross = 2 * depth * width * math.sqrt(2 * math.pi)
    series = {r: s.values for r, s in data.day().items()}
    # 4 roads in two regions of 2: 8 of the 12 ordered pairs cross regions
    assert network_intra(series) == pytest.approx(8 * cross / 12, rel=1e-6)
    assert network_intra(series) > 0  # within-region distance is exactly 0


def test_tidal_pair_mirrored():
    data, (a, b) = tidal_pair(SynthScenario(noise_sigma=0.0))
    day = data.day()
    assert np.array_equal(day[b].values, day[a].values[::-1])
    assert data.truth.assignment[a] == data.truth.assignment[b]
    assert data.graph.index[b] in data.graph.neighbors[data.graph.index[a]]
    same = [r for r in data.truth.clusters()[data.truth.assignment[a]] if r not in (a, b)][0]
    d_mirror = np.abs(day[a].values - day[b].values).sum()
    d_same = np.abs(day[a].values - day[same].values).sum()
    assert d_mirror > d_same == 0


def test_tidal_pair_two_road_graph_separated():
    data, (a, b) = tidal_pair(SynthScenario(noise_sigma=1.0))
    g = build_graph([a, b], [(a, b)])
    cs, _ = hierarchical_partition(g, {r: data.day()[r].values for r in (a, b)}, 2)
    assert cs.assignment[a] != cs.assignment[b]


def test_ari_examples():
    roads = list("abcdef")
    truth = ClusterSet.from_labels(roads, [0, 0, 1, 1, 2, 2])
    assert adjusted_rand_index(truth, truth) == 1
    permuted = ClusterSet.from_labels(roads, [2, 2, 0, 0, 1, 1])
    assert adjusted_rand_index(permuted, truth) == 1
    singletons = ClusterSet.from_labels(roads, range(6))
    one = ClusterSet.from_labels(roads, [0] * 6)
    assert adjusted_rand_index(singletons, one) == 0
    with pytest.raises(UniverseMismatch):
        adjusted_rand_index(truth, ClusterSet.from_labels(list("abcdeg"), [0] * 6))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=2, max_size=30))
def test_ari_matches_sklearn_and_is_symmetric(pairs):
    roads = [f"r{i}" for i in range(len(pairs))]
    a = ClusterSet.from_labels(roads, [p[0] for p in pairs])
    b = ClusterSet.from_labels(roads, [p[1] for p in pairs])
    ref = adjusted_rand_score([p[0] for p in pairs], [p[1] for p in pairs])
    assert adjusted_rand_index(a, b) == pytest.approx(ref, abs=1e-12)
    assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_index(b, a), abs=1e-12)


def test_ari_degrades_with_noise():
    medians = []
    for sigma in (2.0, 15.0, 30.0, 60.0):
        scores = []
        for seed in range(20):
            sc = SynthScenario(6, 6, 4, noise_sigma=sigma, seed=seed, slots=72)
            data = generate(sc)
            feats = {r: s.values for r, s in data.day().items()}
            found, _ = hierarchical_partition(data.graph, feats, 4)
            scores.append(adjusted_rand_index(found, data.truth))
        medians.append(float(np.median(scores)))
    assert all(later <= earlier for earlier, later in zip(medians, medians[1:])), medians
    assert medians[0] > medians[-1]


def test_scenario_json_round_trip(tmp_path):
    sc = SynthScenario(rows=3, cols=4, region_count=2, seed=4)
    path = tmp_path / "s.json"
    import json

    path.write_text(json.dumps(sc.to_json()))
    again = load_scenario(path)
    assert again == sc
