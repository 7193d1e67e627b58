"""Synthetic grid networks with planted regions and tidal speed profiles.

Roads sit on a ``rows x cols`` grid with 4-neighbour adjacency.  The grid is
cut into rectangular blocks, one per region, and every road in a region
follows that region's daily template: a base speed with two Gaussian dips
(morning and evening peak) plus seeded Gaussian noise.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import comb

from .clustering import ClusterSet
from .errors import InvalidScenario, UniverseMismatch
from .graph import RoadGraph
from .ingest import SLOTS_PER_DAY, DailySeries, SpeedRecord

MIN_SPEED = 1.0


@dataclass
class RegionProfile:
    """Daily speed template; centres and width are in slot units."""

    base_speed: float
    morning_depth: float
    evening_depth: float
    morning_center: float
    evening_center: float
    peak_width: float

    def template(self, slots=SLOTS_PER_DAY):
        scale = slots / SLOTS_PER_DAY
        t = np.arange(slots, dtype=np.float64)
        w = self.peak_width * scale

        def dip(center, depth):
            return depth * np.exp(-0.5 * ((t - center * scale) / w) ** 2)

        return self.base_speed - dip(self.morning_center, self.morning_depth) - dip(
            self.evening_center, self.evening_depth
        )


# Four contrasting day shapes: inbound commuter (heavy morning), outbound
# commuter (heavy evening), symmetric two-peak arterial, midday commercial.
TIDAL_PROFILES = (
    RegionProfile(45.0, 25.0, 6.0, 96.0, 210.0, 14.0),
    RegionProfile(50.0, 6.0, 25.0, 96.0, 210.0, 14.0),
    RegionProfile(40.0, 15.0, 15.0, 84.0, 222.0, 8.0),
    RegionProfile(35.0, 18.0, 4.0, 150.0, 250.0, 24.0),
)


@dataclass
class SynthScenario:
    rows: int = 12
    cols: int = 12
    region_count: int = 4
    region_profiles: list = field(default_factory=lambda: list(TIDAL_PROFILES))
    noise_sigma: float = 2.0
    seed: int = 0
    slots: int = SLOTS_PER_DAY
    days: int = 1
    start_date: str = "20210621"

    def validate(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidScenario("grid must have at least one row and column")
        if not 1 <= self.region_count <= self.rows * self.cols:
            raise InvalidScenario("region_count must lie in [1, rows*cols]")
        if self.noise_sigma < 0:
            raise InvalidScenario("noise_sigma must be non-negative")
        if len(self.region_profiles) < self.region_count:
            raise InvalidScenario("need one profile per region")
        if self.days < 1 or self.slots < 2:
            raise InvalidScenario("need at least one day of at least two slots")
        region_blocks(self.rows, self.cols, self.region_count)

    def to_json(self):
        d = asdict(self)
        d["region_profiles"] = [asdict(p) if not isinstance(p, dict) else p for p in self.region_profiles]
        return d

    @classmethod
    def from_json(cls, doc):
        doc = dict(doc)
        if "region_profiles" in doc:
            doc["region_profiles"] = [RegionProfile(**p) for p in doc["region_profiles"]]
        return cls(**doc)


def load_scenario(path):
    with open(path) as fh:
        return SynthScenario.from_json(json.load(fh))


def road_name(r, c):
    return f"r{r:03d}c{c:03d}"


def region_blocks(rows, cols, count):
    """``rows x cols`` array of region labels forming ``count`` rectangles."""
    band = max(d for d in range(1, int(np.sqrt(count)) + 1) if count % d == 0)
    per_band = count // band
    if rows < band or cols < per_band:
        band, per_band = per_band, band
    if rows < band or cols < per_band:
        raise InvalidScenario(f"cannot cut a {rows}x{cols} grid into {count} blocks")
    r_edges = np.linspace(0, rows, band + 1).round().astype(int)
    c_edges = np.linspace(0, cols, per_band + 1).round().astype(int)
    labels = np.empty((rows, cols), dtype=int)
    for bi in range(band):
        for bj in range(per_band):
            labels[r_edges[bi]:r_edges[bi + 1], c_edges[bj]:c_edges[bj + 1]] = bi * per_band + bj
    return labels


def grid_graph(rows, cols):
    roads = [road_name(r, c) for r in range(rows) for c in range(cols)]
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((road_name(r, c), road_name(r, c + 1)))
            if r + 1 < rows:
                edges.append((road_name(r, c), road_name(r + 1, c)))
    return RoadGraph(roads, edges)


@dataclass
class SynthData:
    graph: RoadGraph
    series: dict  # date -> {road_id: DailySeries}
    truth: ClusterSet
    templates: dict  # road_id -> noise-free template

    @property
    def dates(self):
        return list(self.series)

    def day(self, i=0):
        return self.series[self.dates[i]]


def _realise(scenario, templates, graph):
    rng = np.random.default_rng(scenario.seed)
    start = dt.datetime.strptime(scenario.start_date, "%Y%m%d").date()
    out = {}
    for d in range(scenario.days):
        date = start + dt.timedelta(days=d)
        day = {}
        for road in graph.roads:
            noise = rng.normal(0.0, scenario.noise_sigma, scenario.slots) if scenario.noise_sigma > 0 else 0.0
            values = np.maximum(templates[road] + noise, MIN_SPEED)
            day[road] = DailySeries(road, date, values, np.zeros(scenario.slots, dtype=bool))
        out[date] = day
    return out


def generate(scenario):
    """Build the grid graph, noisy per-road series and planted truth."""
    scenario.validate()
    graph = grid_graph(scenario.rows, scenario.cols)
    labels = region_blocks(scenario.rows, scenario.cols, scenario.region_count).ravel()
    base = [p.template(scenario.slots) for p in scenario.region_profiles[: scenario.region_count]]
    templates = {road: base[labels[i]] for i, road in enumerate(graph.roads)}
    truth = ClusterSet.from_labels(graph.roads, labels)
    return SynthData(graph, _realise(scenario, templates, graph), truth, templates)


def tidal_pair(scenario, region=0):
    """Scenario data with one time-mirrored road inside ``region``.

    The pair is the road nearest the region's centre and its right (or lower)
    neighbour in the same region; the second road's template is the first's
    reflected about midday, swapping morning and evening dips.  Returns
    ``(data, (road_a, road_b))``.
    """
    scenario.validate()
    graph = grid_graph(scenario.rows, scenario.cols)
    labels = region_blocks(scenario.rows, scenario.cols, scenario.region_count)
    cells = np.argwhere(labels == region)
    if len(cells) < 2:
        raise InvalidScenario(f"region {region} has fewer than two roads")
    centre = cells.mean(axis=0)
    ordered = sorted(map(tuple, cells), key=lambda rc: (np.hypot(rc[0] - centre[0], rc[1] - centre[1]), rc))
    pair = None
    for r, c in ordered:
        for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < scenario.rows and 0 <= cc < scenario.cols and labels[rr, cc] == region:
                pair = (road_name(r, c), road_name(rr, cc))
                break
        if pair:
            break
    if pair is None:
        raise InvalidScenario(f"region {region} has no adjacent pair")
    base = [p.template(scenario.slots) for p in scenario.region_profiles[: scenario.region_count]]
    flat = labels.ravel()
    templates = {road: base[flat[i]] for i, road in enumerate(graph.roads)}
    templates[pair[1]] = templates[pair[0]][::-1].copy()
    truth = ClusterSet.from_labels(graph.roads, flat)
    return SynthData(graph, _realise(scenario, templates, graph), truth, templates), pair


def to_records(data, vehicles=20):
    records = []
    for date, day in data.series.items():
        for road in data.graph.roads:
            for p, v in enumerate(day[road].values):
                records.append(SpeedRecord(date, p, road, float(v), vehicles))
    return records


def adjusted_rand_index(found, truth):
    """Adjusted Rand index from the contingency table of two partitions."""
    if set(found.assignment) != set(truth.assignment):
        raise UniverseMismatch("partitions cover different road sets")
    roads = sorted(found.assignment)
    n = len(roads)
    table = np.zeros((found.k, truth.k), dtype=np.int64)
    for r in roads:
        table[found.assignment[r], truth.assignment[r]] += 1
    sum_cells = comb(table, 2).sum()
    sum_rows = comb(table.sum(axis=1), 2).sum()
    sum_cols = comb(table.sum(axis=0), 2).sum()
    total = comb(n, 2)
    expected = sum_rows * sum_cols / total if total else 0.0
    max_index = (sum_rows + sum_cols) / 2
    if max_index == expected:
        # both partitions trivial in the same way (all singletons or one block)
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))
