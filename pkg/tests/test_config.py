from pathlib import Path

import pytest

from surfmem.builder import Basis
from surfmem.config import DEFAULT_BATCH, PointSpec, TaskOptions, load_config, parse_config, parse_order_label
from surfmem.errors import ConfigError, InvalidParameterError
from surfmem.geometry import CnotOrder, CodeFamily
from surfmem.stats import ScheduleStep, default_ladder


def task(**kw):
    base = {"family": "rotated", "distances": [3], "ps": [0.005]}
    base.update(kw)
    return base


def test_defaults():
    cfg = parse_config({"tasks": [task()]})
    assert cfg.seed == 0 and cfg.workers == 1 and cfg.batch_size == DEFAULT_BATCH
    assert list(cfg.ladder) == default_ladder()
    (pt,) = cfg.points
    assert pt.order_label == "32013021" and pt.basis is Basis.Z and pt.rounds_per_distance == 3


def test_empty_config_has_no_points():
    assert parse_config(None).points == ()
    assert parse_config({"tasks": []}).points == ()


def test_points_expand_product():
    cfg = parse_config({"tasks": [task(distances=[3, 5], ps=[0.004, 0.005, 0.006], bases=["X", "Z"])]})
    assert len(cfg.points) == 12
    assert len({pt.key for pt in cfg.points}) == 12


@pytest.mark.parametrize("data, where", [
    ({"tasks": [task(family="hexagonal")]}, "tasks[0].family"),
    ({"tasks": [task(distances=[1])]}, "tasks[0].distances[0]"),
    ({"tasks": [task(ps=[0.7])]}, "tasks[0].ps[0]"),
    ({"tasks": [task(bases=["Y"])]}, "tasks[0].bases[0]"),
    ({"tasks": [task(orders=["32013021", "01231023"])]}, "tasks[0].orders[1]"),
    ({"tasks": [task(orders=[1320312])]}, "tasks[0].orders[0]"),
    ({"tasks": [task(options={"colour": True})]}, "tasks[0].options.colour"),
    ({"tasks": [task(options={"hook_study": "yes"})]}, "tasks[0].options.hook_study"),
    ({"tasks": [task(colour=1)]}, "tasks[0].colour"),
    ({"tasks": [task(), task()]}, "duplicate point"),
    ({"workers": 0}, "workers"),
    ({"ladder": [[100, 5], [10, 5]]}, "ladder[1]"),
    ({"ladder": [[100]]}, "ladder[0]"),
    ({"colour": 1}, "colour"),
    ([1, 2], "<root>"),
])
def test_errors_name_the_field(data, where):
    with pytest.raises(ConfigError) as info:
        parse_config(data)
    assert where in str(info.value)


def test_hook_orders_need_the_study_flag():
    with pytest.raises(ConfigError):
        parse_config({"tasks": [task(distances=[5], orders=["21302130"])]})
    cfg = parse_config({"tasks": [task(distances=[5], orders=["21302130"], options={"hook_study": True})]})
    assert str(cfg.points[0].order) == "21302130"


def test_non_parallel_orders_need_bypass():
    t = task(family="unrotated", orders=["10230132"])
    with pytest.raises(ConfigError):
        parse_config({"tasks": [t]})
    cfg = parse_config({"tasks": [dict(t, options={"bypass_parallel": True})]})
    assert cfg.points[0].order_label == "10230132+bypass"


def test_order_label_round_trip():
    opts = TaskOptions(stabiliser_swap=True, exclude_opposite_detectors=False)
    pt = PointSpec(CodeFamily.UNROTATED, 3, 0.001, Basis.X, CnotOrder.parse("12031023"), 12, opts)
    assert pt.order_label == "12031023+swap+alldet+r12"
    order, flags = parse_order_label(pt.order_label)
    assert order == "12031023"
    assert flags == {"stabiliser_swap": True, "exclude_opposite_detectors": False, "rounds": 12}
    with pytest.raises(InvalidParameterError):
        parse_order_label("32013021+fast")


def test_load_config_relative_output(tmp_path: Path):
    path = tmp_path / "c.yaml"
    path.write_text("seed: 7\noutput: out/results.csv\nladder: [[1000, 50]]\ntasks:\n"
                    "  - family: unrotated\n    distances: [3]\n    ps: [0.005]\n    orders: ['10231203']\n")
    cfg = load_config(path)
    assert cfg.seed == 7 and cfg.output == tmp_path / "out" / "results.csv"
    assert cfg.ladder == (ScheduleStep(1000, 50),)


def test_load_config_errors(tmp_path: Path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("tasks: [\n")
    with pytest.raises(ConfigError):
        load_config(bad)
