"""Shared hypothesis strategies for small Shimura data."""

from hypothesis import strategies as st

from muord.datum import PlaceDatum


@st.composite
def places(draw, case=None, max_f=3, max_total=4, min_total=1):
    case = case or draw(st.sampled_from("LU"))
    total = draw(st.integers(min_total, max_total))
    f = draw(st.integers(1, max_f))
    top = total if case == "L" else total // 2
    a = draw(st.lists(st.integers(0, top), min_size=f, max_size=f))
    return PlaceDatum.from_lists(case, a, total=total)
