import math

import numpy as np
import pytest

from hofnet.exceptions import EndpointError
from hofnet.geometry import OccupancyGrid
from hofnet.planning import (Episode, GridPath, astar, baseline_sabb, baseline_shortest_l1,
                             evaluate_paths, format_report, sample_episodes)

import helpers


def grid(n, cells=()):
    occ = np.zeros((n, n, n), dtype=bool)
    for c in cells:
        occ[c] = True
    return OccupancyGrid(occ)


def wall_with_gap(n, x, gap):
    occ = np.zeros((n, n, n), dtype=bool)
    occ[x] = True
    occ[x][gap] = False
    return OccupancyGrid(occ)


def test_empty_grid_length_is_l1():
    ep = Episode((0, 1, 2), (5, 3, 0))
    assert astar(grid(8), ep).length == ep.l1() == 9


def test_wall_with_gap_matches_dijkstra():
    g = wall_with_gap(8, 4, (7, 7))
    ep = Episode((0, 0, 0), (7, 0, 0))
    path = astar(g, ep)
    assert path.length == helpers.dijkstra_length(g.occupied, ep.start, ep.goal) == 7 + 2 * 14  # over to the gap and back
    assert not path.collides(g)


def test_enclosed_goal_has_no_path():
    cells = [(4, 4, 3), (4, 4, 5), (3, 4, 4), (5, 4, 4), (4, 3, 4), (4, 5, 4)]
    assert astar(grid(8, cells), Episode((0, 0, 0), (4, 4, 4))) is None


def test_occupied_endpoint_raises():
    with pytest.raises(EndpointError):
        astar(grid(4, [(0, 0, 0)]), Episode((0, 0, 0), (3, 3, 3)))
    with pytest.raises(EndpointError):
        astar(grid(4), Episode((0, 0, 0), (4, 0, 0)))


def test_astar_matches_dijkstra_random_grids():
    rng = np.random.default_rng(0)
    for _ in range(60):
        n = int(rng.integers(2, 12))
        occ = rng.random((n, n, n)) < 0.2
        free = np.argwhere(~occ)
        if len(free) < 2:
            continue
        a, b = rng.choice(len(free), 2, replace=False)
        ep = Episode(tuple(free[a]), tuple(free[b]))
        path = astar(OccupancyGrid(occ), ep)
        ref = helpers.dijkstra_length(occ, ep.start, ep.goal)
        assert (path is None and ref is None) or path.length == ref
        if path is not None:
            assert path[0] == ep.start and path[-1] == ep.goal and not path.collides(OccupancyGrid(occ))


def test_grid_path_validation():
    with pytest.raises(ValueError):
        GridPath([(0, 0, 0), (1, 1, 0)])
    assert GridPath([(0, 0, 0)]).length == 0


def test_shortest_l1_baseline():
    ep = Episode((0, 0, 0), (3, 0, 0))
    assert baseline_shortest_l1(ep).length == 3
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, b = rng.integers(0, 10, 3), rng.integers(0, 10, 3)
        if tuple(a) == tuple(b):
            continue
        ep = Episode(a, b)
        assert baseline_shortest_l1(ep).length == ep.l1()


def test_sabb_empty_gt_is_shortest():
    ep = Episode((0, 0, 0), (5, 5, 5))
    assert baseline_sabb(grid(8), ep).length == ep.l1()


def test_sabb_around_box_matches_dijkstra():
    g = grid(10, [(3, 4, 4), (6, 5, 5)])  # box spans x 3..6, y 4..5, z 4..5
    ep = Episode((0, 4, 4), (9, 5, 5))
    box = g.bounding_box()
    path = baseline_sabb(g, ep)
    assert path.length == helpers.dijkstra_length(box.occupied, ep.start, ep.goal)
    assert not path.collides(box) and not path.collides(g)


def test_episode_from_direction():
    ep = Episode.from_direction([1.0, 0.0, 0.0], 32)
    assert ep.start == (31, 16, 16) and ep.goal == (0, 16, 16)
    with pytest.raises(ValueError):
        Episode((1, 1, 1), (1, 1, 1))


def test_sample_episodes_deterministic():
    a = sample_episodes(16, 50, np.random.default_rng(2))
    b = sample_episodes(16, 50, np.random.default_rng(2))
    assert a == b and len(a) == 50


# ---------------------------------------------------------------- evaluate_paths


def blob_grid(n, rng, count=3):
    occ = np.zeros((n, n, n), dtype=bool)
    for _ in range(count):
        lo = rng.integers(n // 4, n // 2, 3)
        size = rng.integers(1, n // 4 + 1, 3)
        occ[lo[0]:lo[0] + size[0], lo[1]:lo[1] + size[1], lo[2]:lo[2] + size[2]] = True
    return OccupancyGrid(occ)


def test_pred_equals_gt_is_perfect():
    rng = np.random.default_rng(3)
    gt = blob_grid(16, rng)
    rep = evaluate_paths(gt, gt, sample_episodes(16, 60, rng))
    assert rep.success_rate == 1.0 and rep.optimality == 1.0


def test_empty_grids_shortest_l1_optimal():
    rng = np.random.default_rng(4)
    g = grid(16)
    eps = sample_episodes(16, 30, rng)
    for method in ("astar", "shortest_l1", "sabb"):
        rep = evaluate_paths(g, g, eps, method)
        assert rep.success_rate == 1.0 and rep.optimality == 1.0 and rep.skipped == 0


def test_empty_prediction_collides_with_blocking_gt():
    occ = np.zeros((8, 8, 8), dtype=bool)
    occ[3:5, 3:5, 3:5] = True
    gt = OccupancyGrid(occ)
    eps = [Episode((0, 3, 3), (7, 3, 3)), Episode((0, 0, 0), (0, 7, 0))]
    rep = evaluate_paths(grid(8), gt, eps)
    assert rep.success_rate == 0.5


def test_skip_tally():
    gt = grid(8, [(0, 0, 0)])
    eps = [Episode((0, 0, 0), (7, 7, 7)), Episode((1, 0, 0), (7, 7, 7))]
    pred = grid(8, [(7, 7, 7)])
    rep = evaluate_paths(pred, gt, eps)
    assert rep.skipped == 2 and math.isnan(rep.success_rate)


def test_optimality_in_unit_interval():
    rng = np.random.default_rng(5)
    for _ in range(10):
        gt = blob_grid(16, rng)
        pred = blob_grid(16, rng).union(gt)
        rep = evaluate_paths(pred, gt, sample_episodes(16, 30, rng))
        if rep.successes:
            assert 0 < rep.optimality <= 1.0


def test_sabb_never_collides():
    rng = np.random.default_rng(6)
    for _ in range(10):
        gt = blob_grid(16, rng)
        rep = evaluate_paths(None, gt, sample_episodes(16, 30, rng), "sabb")
        assert rep.successes == 30 - rep.skipped


def test_nested_conservative_grids_monotone():
    # gt <= pred1 <= pred2: every path found is collision-free, and
    # reachability only shrinks as obstacles are added
    rng = np.random.default_rng(7)
    for _ in range(10):
        gt = blob_grid(16, rng)
        pred1 = gt.union(blob_grid(16, rng))
        pred2 = pred1.union(blob_grid(16, rng))
        eps = [e for e in sample_episodes(16, 40, rng)
               if not pred2.occupied[e.start] and not pred2.occupied[e.goal]]
        rates = [evaluate_paths(p, gt, eps).success_rate for p in (gt, pred1, pred2)]
        assert rates[0] >= rates[1] >= rates[2]


def test_unconstrained_monotonicity_counterexample():
    # adding the true obstacles to an empty prediction raises success
    occ = np.zeros((8, 8, 8), dtype=bool)
    occ[3:5, 2:6, 2:6] = True
    gt = OccupancyGrid(occ)
    eps = [Episode((0, 3, 3), (7, 3, 3))]
    assert evaluate_paths(grid(8), gt, eps).success_rate == 0.0
    assert evaluate_paths(gt, gt, eps).success_rate == 1.0


def test_report_csv():
    rep = evaluate_paths(grid(4), grid(4), [Episode((0, 0, 0), (3, 3, 3))], model_id="m")
    lines = format_report([rep]).splitlines()
    assert lines[0] == "model_id,episodes,skipped,success_rate,optimality"
    assert lines[1] == "m,1,0,1.0,1.0"
