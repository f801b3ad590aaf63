import numpy as np
import pytest

from iosscert.grid import GridError, GridSpec, box_grid, grid_blocks, grid_points, parse_grid, grid_to_text


def test_single_axis_three_points():
    g = box_grid([(0.0, 1.0)], 3)
    pts = np.array(list(grid_points(g)))
    assert np.array_equal(pts[:, 0], [0.0, 0.5, 1.0])


def test_count_one_takes_midpoint():
    g = box_grid([(2.0, 4.0)], 1)
    assert list(grid_points(g))[0][0] == 3.0


def test_lowest_axis_varies_fastest():
    g = box_grid([(0.0, 1.0), (10.0, 11.0)], [2, 2])
    pts = np.array(list(grid_points(g)))
    expected = np.array([[0, 10], [1, 10], [0, 11], [1, 11]], dtype=float)
    assert np.array_equal(pts, expected)


def test_total_points_product():
    g = box_grid([(0, 1)] * 5, [3, 4, 1, 2, 5])
    assert g.total_points == 3 * 4 * 1 * 2 * 5
    # the headline configuration: 100 points in each of five directions
    g5 = box_grid([(0, 1)] * 5, 100)
    assert g5.total_points == 100 ** 5


def test_blocks_concatenate_to_full_enumeration():
    g = box_grid([(0, 1), (0, 2), (-1, 1)], [3, 4, 5])
    full = np.array(list(grid_points(g)))
    blocks = [blk for _, blk in grid_blocks(g, chunk=7)]
    assert np.array_equal(np.concatenate(blocks), full)


def test_determinism():
    g = box_grid([(0, 1), (0, 2)], [17, 13])
    a = np.array(list(grid_points(g)))
    b = np.array(list(grid_points(g)))
    assert np.array_equal(a, b)


def test_validation_errors():
    with pytest.raises(GridError, match="lower bound"):
        box_grid([(1.0, 0.0)], 3)
    with pytest.raises(GridError, match="at least one point"):
        box_grid([(0.0, 1.0)], 0)
    with pytest.raises(GridError, match="finite"):
        box_grid([(0.0, np.inf)], 3)
    with pytest.raises(GridError, match="equal length"):
        GridSpec(np.array([0.0]), np.array([1.0, 2.0]), np.array([3, 3]))


def test_parse_and_roundtrip():
    text = "0.1 0.5 100\n0.1 0.5 100\n-0.1 0.1 100  # u1\n"
    g = parse_grid(text)
    assert g.dim == 3
    assert g.total_points == 100 ** 3
    g2 = parse_grid(grid_to_text(g))
    assert np.array_equal(g2.lows, g.lows)
    assert np.array_equal(g2.highs, g.highs)
    assert np.array_equal(g2.counts, g.counts)


def test_parse_errors():
    with pytest.raises(GridError, match="expected"):
        parse_grid("0 1\n")
    with pytest.raises(GridError, match="no axes"):
        parse_grid("# nothing here\n")


def test_block_range_check():
    g = box_grid([(0, 1)], 4)
    with pytest.raises(GridError):
        g.block(0, 5)
