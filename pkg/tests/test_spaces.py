import numpy as np
import pytest

from confdim.spaces import SpaceFormatError, SpaceSpec, expected_count, generate, load, save
from confdim.metric import FiniteMetricSpace


def test_third_cantor_level_one():
    X = generate(SpaceSpec("third_cantor", 1))
    assert sorted(X.coords[:, 0].tolist()) == pytest.approx([1 / 6, 5 / 6])
    assert X.h == pytest.approx(1 / 6)


@pytest.mark.parametrize("spec, n", [(SpaceSpec("carpet", 2), 64),
                                     (SpaceSpec("carpet", 3), 512),
                                     (SpaceSpec("cantor_product", 2, grid=9), 36),
                                     (SpaceSpec("square", grid=5), 25),
                                     (SpaceSpec("circle", grid=12), 12)])
def test_counts(spec, n):
    assert generate(spec).n == n == expected_count(spec)


def test_round_trip_carpet(tmp_path):
    X = generate(SpaceSpec("carpet", 1))
    save(X, tmp_path / "c.txt")
    Y = load(tmp_path / "c.txt")
    assert Y == X
    assert Y.h == X.h


def test_round_trip_matrix(tmp_path):
    rng = np.random.default_rng(0)
    P = rng.uniform(size=(12, 3))
    X = FiniteMetricSpace(matrix=FiniteMetricSpace(P).to_matrix().matrix, h=0.01)
    save(X, tmp_path / "m.txt")
    Y = load(tmp_path / "m.txt")
    assert np.array_equal(Y.matrix, X.matrix)


def test_truncated_file_is_format_error(tmp_path):
    X = generate(SpaceSpec("carpet", 2))
    save(X, tmp_path / "c.txt")
    text = (tmp_path / "c.txt").read_text().splitlines()
    (tmp_path / "t.txt").write_text("\n".join(text[:10]) + "\n")
    with pytest.raises(SpaceFormatError):
        load(tmp_path / "t.txt")


def test_spec_validation():
    with pytest.raises(ValueError):
        SpaceSpec("moebius")
    with pytest.raises(ValueError):
        SpaceSpec("square", grid=1)
    with pytest.raises(ValueError):
        SpaceSpec("file")
    assert SpaceSpec.from_dict(SpaceSpec("carpet", 3).to_dict()) == SpaceSpec("carpet", 3)
