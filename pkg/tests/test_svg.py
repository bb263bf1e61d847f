import math

from fairsel.svg import line_chart


SERIES = [("fair", [0.0, 1.0, 2.0], [0.5, 0.7, 0.9]),
          ("uniform", [0.0, 1.0, 2.0], [0.5, 0.6, 0.7])]


def test_chart_is_standalone_svg():
    text = line_chart(SERIES, title="Accuracy", xlabel="epoch",
                      ylabel="accuracy")
    assert text.startswith("<svg")
    assert text.rstrip().endswith("</svg>")
    assert "Accuracy" in text and "epoch" in text


def test_chart_has_legend_entry_per_series():
    text = line_chart(SERIES, title="t", xlabel="x", ylabel="y")
    assert "fair" in text and "uniform" in text
    assert text.count("<polyline") >= 2


def test_chart_deterministic():
    a = line_chart(SERIES, title="t", xlabel="x", ylabel="y")
    b = line_chart(SERIES, title="t", xlabel="x", ylabel="y")
    assert a == b


def test_nan_breaks_polyline_without_error():
    series = [("a", [0.0, 1.0, 2.0, 3.0], [0.1, math.nan, 0.3, 0.4])]
    text = line_chart(series, title="t", xlabel="x", ylabel="y")
    assert "nan" not in text.lower().replace("xml", "")


def test_single_point_series():
    text = line_chart([("a", [1.0], [0.5])], title="t", xlabel="x", ylabel="y")
    assert text.startswith("<svg")
