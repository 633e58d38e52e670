import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

from cbjj.svg import Figure, _edges, _heat

GOLDEN = Path(__file__).parent / "data" / "figure.svg"


def _figure():
    fig = Figure(title="demo", xlabel="x", ylabel="y", ylog=True, version="0.1.0")
    x = np.array([1.0, 2.0, 3.0, 4.0])
    fig.scatter(x, 10.0 ** x, yerr=0.1 * 10.0 ** x, label="points")
    fig.line(x, 10.0 ** x, label="model", dashed=True)
    fig.hline(100.0, "level")
    fig.top_axis([1.5, 3.5], ["a", "b"], "secondary")
    return fig


def test_matches_golden_file():
    text = _figure().render()
    assert text == GOLDEN.read_text()


def test_output_is_well_formed_xml():
    root = ET.fromstring(_figure().render())
    assert root.tag.endswith("svg")
    heat = Figure().heatmap([1, 2, 3], [0.5, 1.0], np.array([[0, 0.5, 1], [np.nan, 1, 0]]))
    ET.fromstring(heat.render())


def test_rendering_is_deterministic():
    assert _figure().render() == _figure().render()


def test_cell_edges_and_colours():
    assert np.allclose(_edges([1.0, 2.0, 4.0]), [0.5, 1.5, 3.0, 5.0])
    assert np.allclose(_edges([3.0]), [2.5, 3.5])
    assert _heat(0.0, 0, 1) == "#ffffff"
    assert _heat(2.0, 0, 1) == _heat(1.0, 0, 1)
    assert _heat(float("nan"), 0, 1) == "#dddddd"
