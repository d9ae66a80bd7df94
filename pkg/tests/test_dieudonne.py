from itertools import product

import pytest

from muord.datum import PlaceDatum, canonical_heights, enumerate_places
from muord.dieudonne import (
    BadEpsilon,
    Kind,
    TruncationTooSmall,
    assemble_mu_ordinary,
    build_epsilon_module,
    canonical_subgroup_checks,
    chain_holds,
    classify,
    classify_module,
    direct_sum,
    frobenius_kernels,
    fv_identity_holds,
    partial_degrees_p_torsion,
    required_truncation,
)


def test_build_examples():
    m = build_epsilon_module((0, 0), 2, 1)
    assert classify_module(m) is Kind.ETALE
    m = build_epsilon_module((1, 1), 3, 1)
    assert classify_module(m) is Kind.MULTIPLICATIVE
    assert classify_module(build_epsilon_module((0, 1), 2, 2)) is Kind.BI_INFINITESIMAL
    with pytest.raises(BadEpsilon):
        build_epsilon_module((0, 2), 2, 1)
    with pytest.raises(BadEpsilon):
        build_epsilon_module((), 2, 1)


def test_classify_examples():
    assert classify((1, 1, 1)) is Kind.MULTIPLICATIVE
    assert classify((0, 0)) is Kind.ETALE
    assert classify((0, 1)) is Kind.BI_INFINITESIMAL


@pytest.mark.parametrize("eps", [e for f0 in (1, 2, 3) for e in product((0, 1), repeat=f0)])
def test_classification_routes_agree(eps):
    assert classify(eps) is classify_module(build_epsilon_module(eps, 2, 2))


def test_partial_degrees_examples():
    assert partial_degrees_p_torsion(build_epsilon_module((0, 1, 1), 2, 2)) == [0, 1, 1]
    assert partial_degrees_p_torsion(build_epsilon_module((0, 0, 0, 0), 3, 2)) == [0] * 4
    pm = assemble_mu_ordinary(PlaceDatum.from_lists("L", [1, 2], total=3), 2)
    assert partial_degrees_p_torsion(pm) == [1, 2]


def test_assembly_examples():
    pm = assemble_mu_ordinary(PlaceDatum.from_lists("L", [1, 2], total=3), 2, 3)
    assert len(pm.factors) == 3 and pm.rank_per_tau() == [3, 3]
    pm = assemble_mu_ordinary(PlaceDatum.from_lists("L", [2, 2], total=3), 2, 3)
    assert len(pm.factors) == 2
    pm = assemble_mu_ordinary(PlaceDatum("U", ((1, 3),)), 2, 3)
    assert len(pm.factors) == 3 and pm.rank_per_tau() == [4, 4]
    assert fv_identity_holds(pm)


def test_truncation_guard():
    place = PlaceDatum.from_lists("L", [1, 2], total=3)
    assert required_truncation(place) == 3
    with pytest.raises(TruncationTooSmall):
        assemble_mu_ordinary(place, 2, 2)


def test_etale_kernels_have_degree_zero():
    place = PlaceDatum.from_lists("L", [0, 0], total=2)
    pm = assemble_mu_ordinary(place, 3)
    for rep in frobenius_kernels(pm, place):
        assert set(rep.partial_degrees) == {0}


def test_direct_sum_mismatch():
    with pytest.raises(ValueError):
        direct_sum([(build_epsilon_module((1,), 2, 2), 1), (build_epsilon_module((1,), 3, 2), 1)])


@pytest.mark.parametrize("place", [p for p in enumerate_places("L", 2, 3) if canonical_heights(p)],
                         ids=str)
def test_canonical_kernels_split(place):
    res = canonical_subgroup_checks(place, 3)
    assert res["ok"] and res["chain"]
    assert chain_holds(res["reports"])


@pytest.mark.parametrize("place", list(enumerate_places("U", 1, 4)), ids=str)
def test_canonical_kernels_inert(place):
    res = canonical_subgroup_checks(place, 2)
    assert res["ok"]
    assert all(h and d for _, h, d in res["complement"])
