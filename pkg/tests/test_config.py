import pytest

from acev.config import AcevConfig, read_config_file
from acev.errors import InvalidInputError


def test_defaults():
    cfg = AcevConfig()
    assert (cfg.k, cfg.alpha, cfg.angle_tol) == (25, 0.6, 0.15)
    assert cfg.filtration_floor(2) == 10


@pytest.mark.parametrize("changes", [
    {"k": 0}, {"alpha": 0.0}, {"alpha": 1.0}, {"angle_tol": 0.0}, {"var_thresh": 1.0},
    {"zero_tol": 0.0}, {"warmup_frac": 1.0}, {"min_neigh": 1}, {"k": 4, "min_neigh": 5},
    {"matching": "greedy"}, {"filter_distance": "manhattan"}, {"ema_gate": "x"},
    {"min_neigh_frac": 1.5},
])
def test_invalid(changes):
    with pytest.raises(InvalidInputError):
        AcevConfig(**changes)


@pytest.mark.parametrize("cfg, dim, floor", [
    (AcevConfig(min_neigh_frac=0.0), 2, 5),
    (AcevConfig(min_neigh_frac=0.0), 7, 8),
    (AcevConfig(min_neigh=6), 2, 6),
    (AcevConfig(k=50), 2, 20),
])
def test_filtration_floor(cfg, dim, floor):
    assert cfg.filtration_floor(dim) == floor


def test_literal_preset():
    cfg = AcevConfig.literal(k=10)
    assert cfg.k == 10 and cfg.matching == "rank" and cfg.ema_gate == "update"
    assert cfg.filtration_floor(2) == 5


def test_read_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# tuned\nk = 12\nangle-tol=0.2\nmin_neigh = auto\nmutual_knn = yes\nmatching = rank\n")
    values = read_config_file(path)
    assert values == {"k": 12, "angle_tol": 0.2, "min_neigh": None, "mutual_knn": True, "matching": "rank"}
    assert AcevConfig(**values).k == 12


@pytest.mark.parametrize("text", ["k\n", "nope = 3\n", "k = many\n", "mutual_knn = maybe\n"])
def test_read_config_file_errors(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(InvalidInputError, match="bad.cfg:1"):
        read_config_file(path)
