import numpy as np
import pytest

import blockmf as bm
from blockmf.rates import total_rate


def test_color_graph_canonical_order_and_lookup():
    cg = bm.ColorGraph(3, [(2, 0), (0, 1), (1, 2)])
    assert cg.edges == ((0, 1), (1, 2), (2, 0))
    assert cg.n_edges == 3
    assert cg.edge_index(1, 2) == 1
    assert cg.out_edges(2) == (2,)
    assert cg.out_edges(0) == (0,)
    with pytest.raises(bm.UnknownEdgeError):
        cg.edge_index(2, 1)


def test_color_graph_rejects_bad_edges():
    with pytest.raises(bm.InvalidArgumentError):
        bm.ColorGraph(2, [(0, 0)])
    with pytest.raises(bm.InvalidArgumentError):
        bm.ColorGraph(2, [(0, 2)])
    with pytest.raises(bm.InvalidArgumentError):
        bm.ColorGraph(2, [(0, 1), (0, 1)])
    with pytest.raises(bm.InvalidArgumentError):
        bm.ColorGraph(0, [])


def test_rate_spec_validation():
    cg = bm.ColorGraph(2, [(0, 1), (1, 0)])
    with pytest.raises(bm.InvalidArgumentError, match="gamma_c"):
        bm.RateSpec(cg, [(1.0, 0.0)], [(0.0, 0.0), (0.0, 0.0)])
    with pytest.raises(bm.InvalidArgumentError, match=">= 0"):
        bm.RateSpec(cg, [(-1.0, 0.0), (0.0, 0.0)],
                    [(0.0, 0.0), (0.0, 0.0)])
    with pytest.raises(bm.InvalidArgumentError, match="beta"):
        bm.RateSpec(cg, [(0.0, 1.0), (0.0, 0.0)],
                    [(0.0, 0.0), (0.0, 0.0)], beta=(1.0,))
    with pytest.raises(bm.InvalidArgumentError, match="finite"):
        bm.RateSpec(cg, [(0.0, 1.0), (0.0, 0.0)],
                    [(0.0, 0.0), (0.0, 0.0)], beta=(np.inf, 0.0))
    spec = bm.RateSpec(cg, [(0.0, 1.0), (0.0, 0.0)],
                       [(0.0, 2.0), (0.0, 0.0)])
    assert spec.beta == (0.0, 0.0)


def test_rate_spec_bounds():
    cg = bm.ColorGraph(2, [(0, 1), (1, 0)])
    spec = bm.RateSpec(cg, [(0.0, 2.0), (0.0, 0.0)],
                       [(0.0, 1.0), (0.5, 0.5)], beta=(0.0, 0.9))
    assert spec.gamma_bar == 2.0
    assert spec.gamma_span == 2.0
    assert spec.rate_bound(0) == 2.0
    assert spec.rate_bound(1) == pytest.approx(0.5 + 0.9)


def test_central_rate_worked_number():
    fam = bm.sis_spec(1, gamma=2.0, nu=1.0, eta=0.6, zeta=0.9)
    spec = fam.spec_for(0, 0)
    v = bm.lambda_c(spec, nu=(0.7, 0.3), mu=(0.2, 0.8),
                    a1=0.5, a2=0.5, edge=(0, 1))
    # 0.5 * 2 * 0.3 + 0.5 * 1 * 0.8
    assert v == pytest.approx(0.7)
    # cure edge has no affine part
    assert bm.lambda_c(spec, (0.7, 0.3), (0.2, 0.8), 0.5, 0.5, (1, 0)) == 0.0
    assert spec.beta[spec.colors.edge_index(1, 0)] == 0.9


def test_peripheral_rate_and_weight_checks():
    fam = bm.sis_spec(2, gamma=1.0, nu=0.5, eta=0.6, zeta=0.3)
    spec = fam.spec_for(0, 1)
    mus = [(0.5, 0.5), (0.9, 0.1)]
    v = bm.lambda_p(spec, nu=(0.4, 0.6), mus=mus, a=0.5, b=(0.25, 0.25),
                    edge=(0, 1))
    assert v == pytest.approx(0.5 * 0.5 * 0.6 + 0.6 * (0.25 * 0.5 + 0.25 * 0.1))
    with pytest.raises(bm.InvalidArgumentError, match="sum to 1"):
        bm.lambda_p(spec, (0.4, 0.6), mus, 0.5, (0.25, 0.3), (0, 1))
    with pytest.raises(bm.InvalidArgumentError, match=r"\(0,1\)"):
        bm.lambda_c(spec, (0.4, 0.6), (0.5, 0.5), 1.0, 0.0, (0, 1))
    with pytest.raises(bm.InvalidArgumentError, match="measures"):
        bm.lambda_p(spec, (0.4, 0.6), mus[:1], 0.5, (0.25, 0.25), (0, 1))
    with pytest.raises(bm.InvalidArgumentError, match="sums to"):
        bm.lambda_c(spec, (0.4, 0.5), (0.5, 0.5), 0.5, 0.5, (0, 1))


def test_total_rate_affine_plus_offset_clamped():
    q = bm.queue_spec(3, zeta=1.0, vartheta=0.5, h_coefficient=0.4)
    cg = q.colors
    assert cg.edges == ((0, 1), (1, 0), (1, 2), (2, 1))
    nu = np.array([0.2, 0.3, 0.5])   # mean 1.3
    mu = np.array([0.5, 0.5, 0.0])   # mean 0.5
    up = cg.edge_index(1, 2)
    v = total_rate(q, up, 0.5, nu, (0.5,), (mu,))
    # zeta[1] + c0*(mean - 1) with mean = 0.5*1.3 + 0.5*0.5
    assert v == pytest.approx(1.0 + 0.4 * (0.9 - 1.0))
    down = cg.edge_index(1, 0)
    assert total_rate(q, down, 0.5, nu, (0.5,), (mu,)) == 0.5
    # arrivals clamp at zero when the offset drags the affine part negative
    q2 = bm.queue_spec(3, zeta=0.0, vartheta=0.5, h_coefficient=1.0)
    at0 = np.array([1.0, 0.0, 0.0])
    assert total_rate(q2, cg.edge_index(1, 2), 0.5, at0, (0.5,), (at0,)) == 0.0


def test_block_rates_family():
    fam = bm.sis_spec(2, gamma=[0.8, 1.1], nu=[0.5, 0.4], eta=0.6,
                      zeta=[0.9, 0.7])
    assert fam.r == 2
    assert fam.gamma_bar == 1.1
    assert fam.spec_for(1, 0).gamma_c[0] == (0.0, 1.1)
    assert fam.spec_for(1, 1).gamma_c[0] == (0.0, 0.4)
    assert fam.spec_for(0, 1).gamma_p[0] == (0.0, 0.6)
    cg2 = bm.ColorGraph(3, [(0, 1)])
    other = bm.RateSpec(cg2, [(1.0, 0.0, 0.0)], [(0.0, 0.0, 0.0)])
    with pytest.raises(bm.InvalidArgumentError, match="color graph"):
        bm.BlockRates((fam.central[0], other), fam.peripheral)


def test_as_block_rates():
    q = bm.queue_spec(3, 1.0, 0.5, 0.4)
    fam = bm.as_block_rates(q, 2)
    assert fam.r == 2 and fam.central[0] is q and fam.peripheral[1] is q
    with pytest.raises(bm.InvalidArgumentError, match="r=2"):
        bm.as_block_rates(fam, 3)
    with pytest.raises(bm.InvalidArgumentError):
        bm.as_block_rates("sis", 2)


def test_rate_spec_json_round_trip():
    q = bm.queue_spec(3, zeta=(1.0, 0.8, 0.0), vartheta=0.5,
                      h_coefficient=0.4)
    q2 = bm.RateSpec.from_json(q.to_json())
    assert q2 == q
    plain = bm.RateSpec(bm.ColorGraph(2, [(0, 1)]), [(0.0, 1.5)], [(2.0, 0.0)])
    assert "beta" not in plain.to_json_obj()
    assert bm.RateSpec.from_json(plain.to_json()) == plain


def test_rate_spec_json_one_based_and_errors():
    obj = {
        "colors": 2,
        "edges": [[1, 2], [2, 1]],
        "gamma_c": {"1,2": [0.0, 1.0], "2,1": [0.0, 0.0]},
        "gamma_p": {"1,2": [0.0, 0.5], "2,1": [0.0, 0.0]},
        "beta": {"2,1": 0.9},
        "base": 1,
    }
    spec = bm.RateSpec.from_json_obj(obj)
    assert spec.colors.edges == ((0, 1), (1, 0))
    assert spec.gamma_c[0] == (0.0, 1.0)
    assert spec.beta == (0.0, 0.9)
    with pytest.raises(bm.InvalidArgumentError, match="unknown rate spec"):
        bm.RateSpec.from_json_obj({**obj, "extra": 1})
    missing = {k: v for k, v in obj.items() if k != "gamma_p"}
    with pytest.raises(bm.InvalidArgumentError, match="gamma_p"):
        bm.RateSpec.from_json_obj(missing)
    bad_edge = dict(obj)
    bad_edge["beta"] = {"1,1": 0.9}
    with pytest.raises(bm.InvalidArgumentError, match="unknown edges"):
        bm.RateSpec.from_json_obj(bad_edge)


def test_sis_spec_parameter_validation():
    with pytest.raises(bm.InvalidArgumentError, match="scalar or length"):
        bm.sis_spec(2, gamma=[1.0, 2.0, 3.0], nu=0.5, eta=0.6, zeta=0.9)
    with pytest.raises(bm.InvalidArgumentError, match=">= 0"):
        bm.sis_spec(2, gamma=1.0, nu=-0.5, eta=0.6, zeta=0.9)


def test_queue_spec_validation():
    with pytest.raises(bm.InvalidArgumentError, match="K >= 2"):
        bm.queue_spec(1, 1.0, 0.5, 0.4)
    with pytest.raises(bm.InvalidArgumentError, match="scalar or length"):
        bm.queue_spec(3, (1.0, 0.8), 0.5, 0.4)
    with pytest.raises(bm.InvalidArgumentError, match=">= 0"):
        bm.queue_spec(3, 1.0, 0.5, -0.4)
