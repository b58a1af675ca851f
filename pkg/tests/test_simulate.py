import io

import numpy as np
import pytest

import blockmf as bm
from blockmf.rates import total_rate
from blockmf.simulate import _Kernel, local_empirical

SIS = bm.sis_spec(2, gamma=[0.8, 1.1], nu=[0.5, 0.4], eta=0.6,
                  zeta=[0.9, 0.7])


def test_system_state_from_colors():
    g = bm.build_complete_peripheral([(2, 3), (2, 3)])
    colors = [0, 1, 1, 1, 0, 0, 0, 1, 0, 1]
    st = bm.SystemState.from_colors(g, colors, 2)
    assert st.K == 2
    assert st.counts[0][0] == (1, 1)     # block 0 centrals
    assert st.counts[0][1] == (1, 2)     # block 0 peripherals
    assert st.counts[1][1] == (1, 2)
    assert st.class_size(1, 0) == 2
    with pytest.raises(bm.InvalidArgumentError, match="colors"):
        bm.SystemState.from_colors(g, colors[:-1], 2)
    with pytest.raises(bm.InvalidArgumentError, match="0..1"):
        bm.SystemState.from_colors(g, [2] + colors[1:], 2)


def test_trajectory_replay_and_csv():
    g = bm.build_complete_peripheral([(1, 1)])
    st = bm.SystemState.from_colors(g, [0, 0], 2)
    tr = bm.Trajectory(st, [(0.5, 0, 0, 1), (0.9, 1, 0, 1), (1.4, 0, 1, 0)],
                       2.0)
    assert list(tr.final_colors) == [0, 1]
    buf = io.StringIO()
    tr.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,node,from,to"
    assert lines[1] == "0.5,0,0,1"
    assert len(lines) == 4


def test_simulate_determinism_and_horizon():
    g = bm.build_complete_peripheral([(2, 3), (2, 3)])
    init = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1]
    a = bm.simulate(g, SIS, None, init, 2.0, seed=7)
    b = bm.simulate(g, SIS, None, init, 2.0, seed=7)
    c = bm.simulate(g, SIS, None, init, 2.0, seed=8)
    assert a.events == b.events
    assert a.events != c.events
    assert a.horizon == 2.0
    times = [e[0] for e in a.events]
    assert all(0.0 < t <= 2.0 for t in times)
    assert all(t1 < t2 for t1, t2 in zip(times, times[1:]))


def test_simulate_events_follow_color_graph():
    g = bm.build_complete_peripheral([(2, 3), (2, 3)])
    q = bm.queue_spec(3, zeta=1.0, vartheta=0.8, h_coefficient=0.4)
    init = [0, 1, 2, 0, 1, 2, 0, 1, 2, 0]
    tr = bm.simulate(g, q, None, init, 1.5, seed=11, debug=True)
    allowed = set(q.colors.edges)
    colors = list(init)
    for _, node, z, zp in tr.events:
        assert colors[node] == z
        assert (z, zp) in allowed
        colors[node] = zp
    assert list(tr.final_colors) == colors


def test_simulate_zero_horizon_and_bad_args():
    g = bm.build_complete_peripheral([(1, 1)])
    tr = bm.simulate(g, SIS.central[0], None, [0, 1], 0.0, seed=3)
    assert tr.events == []
    with pytest.raises(bm.InvalidArgumentError):
        bm.simulate(g, SIS.central[0], None, [0, 1], -1.0, seed=3)
    with pytest.raises(bm.InvalidArgumentError, match="K"):
        q3 = bm.queue_spec(3, 1.0, 0.5, 0.4)
        st = bm.SystemState.from_colors(g, [0, 1], 2)
        bm.simulate(g, q3, None, st, 1.0, seed=3)


def kernel_definition_gap(graph, family, colors):
    """Max |kernel rate - definition rate| over nodes and edges."""
    family = bm.as_block_rates(family, graph.r)
    st = bm.SystemState.from_colors(graph, colors, family.colors.K)
    kern = _Kernel(graph, family)
    kern.load(st.colors)
    worst = 0.0
    for n in range(graph.n_total):
        j, cls = graph.block_of(n), graph.class_of(n)
        spec = family.spec_for(j, cls)
        lm = local_empirical(st, graph, n)
        g = kern.group_of_node[n]
        for e in range(family.colors.n_edges):
            ref = total_rate(spec, e, lm.proportions[0], lm.parts[0],
                             lm.proportions[1:], lm.parts[1:])
            worst = max(worst, abs(kern.rate[g][e] - ref))
    return worst


@pytest.mark.parametrize("builder", [
    lambda: bm.build_complete_peripheral([(2, 3), (2, 3)]),
    lambda: bm.build_regular_peripheral([(2, 4), (2, 4)],
                                        ((0.5, 0.5), (0.5, 0.5))),
])
@pytest.mark.parametrize("fam", [
    SIS,
    bm.queue_spec(3, zeta=(1.0, 0.8, 0.0), vartheta=0.6, h_coefficient=0.4),
])
def test_kernel_rates_match_definition(builder, fam):
    # aggregated-group rates must agree with the per-node neighborhood
    # definition in both aggregation regimes (complete peripheral graphs
    # aggregate whole blocks; regular designs fall back to singletons)
    graph = builder()
    family = bm.as_block_rates(fam, graph.r)
    gen = np.random.default_rng(5)
    for _ in range(6):
        colors = gen.integers(0, family.colors.K, graph.n_total)
        assert kernel_definition_gap(graph, family, colors) <= 1e-12


def test_kernel_group_totals():
    graph = bm.build_complete_peripheral([(2, 3), (2, 3)])
    gen = np.random.default_rng(9)
    colors = gen.integers(0, 2, graph.n_total)
    st = bm.SystemState.from_colors(graph, colors, 2)
    kern = _Kernel(graph, SIS)
    kern.load(st.colors)
    cg = SIS.colors
    for g, members in enumerate(kern.members):
        expect = sum(
            kern.rate[g][e]
            for n in members
            for e in cg.out_edges(int(colors[n]))
        )
        assert kern.group_total[g] == pytest.approx(expect, abs=1e-12)


def test_independent_nodes_exponential_law():
    # gamma == 0 and a one-way color edge: every node flips 0 -> 1 at
    # constant rate b independently, so the final share of color 1 is a
    # Binomial(N, 1 - exp(-b T)) average
    b, T = 0.7, 1.3
    cg = bm.ColorGraph(2, [(0, 1)])
    spec = bm.RateSpec(cg, [(0.0, 0.0)], [(0.0, 0.0)], beta=(b,))
    g = bm.build_complete_peripheral([(5, 5), (5, 5)])
    n_rep = 400
    hits = total = 0
    for rep in range(n_rep):
        tr = bm.simulate(g, spec, None, [0] * g.n_total, T, seed=1000 + rep)
        hits += int(tr.final_colors.sum())
        total += g.n_total
    p = 1.0 - np.exp(-b * T)
    se = np.sqrt(p * (1 - p) / total)
    assert abs(hits / total - p) <= 4 * se


def test_empirical_process_masses_and_alignment():
    g = bm.build_complete_peripheral([(2, 3), (2, 3)])
    init = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1]
    tr = bm.simulate(g, SIS, None, init, 2.0, seed=21)
    grid = np.linspace(0.0, 2.0, 41)
    series = bm.empirical_process(tr, g, grid)
    assert series.values.shape == (41, 4, 2)
    assert np.allclose(series.values.sum(axis=2), 1.0)
    assert np.all(series.values >= 0)
    # t=0 row is the initial state
    st = bm.SystemState.from_colors(g, init, 2)
    assert np.allclose(series.values[0, 0], np.array(st.counts[0][0]) / 2)
    # component accessor matches the flat layout
    assert np.array_equal(series.component(1, 1), series.values[:, 3, :])


def test_empirical_process_right_continuous():
    g = bm.build_complete_peripheral([(1, 1)])
    st = bm.SystemState.from_colors(g, [0, 0], 2)
    tr = bm.Trajectory(st, [(0.5, 0, 0, 1)], 1.0)
    series = bm.empirical_process(tr, g, [0.5])
    # the grid point sitting exactly on the jump sees the post-jump state
    assert series.values[0, 0, 1] == 1.0


def test_empirical_process_grid_validation():
    g = bm.build_complete_peripheral([(1, 1)])
    tr = bm.simulate(g, SIS.central[0], None, [0, 1], 1.0, seed=2)
    with pytest.raises(bm.InvalidArgumentError):
        bm.empirical_process(tr, g, [])
    with pytest.raises(bm.InvalidArgumentError):
        bm.empirical_process(tr, g, [0.5, 0.4])
    with pytest.raises(bm.InvalidArgumentError):
        bm.empirical_process(tr, g, [0.5, 1.5])


def test_component_series_csv():
    g = bm.build_complete_peripheral([(2, 3), (2, 3)])
    init = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1]
    tr = bm.simulate(g, SIS, None, init, 1.0, seed=4)
    series = bm.empirical_process(tr, g, [0.0, 0.5, 1.0])
    buf = io.StringIO()
    series.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,block,class,color,mass"
    assert len(lines) == 1 + 3 * 2 * 2 * 2   # times * blocks * classes * K
    assert lines[1].split(",")[:4] == ["0", "0", "c", "0"]


def test_local_empirical_decomposition():
    g = bm.build_complete_peripheral([(2, 3), (2, 3)])
    colors = [0, 1, 1, 0, 1, 0, 0, 1, 1, 0]
    st = bm.SystemState.from_colors(g, colors, 2)
    lm_c = local_empirical(st, g, 0)
    assert np.allclose(lm_c.proportions, [0.4, 0.6])
    assert np.allclose(lm_c.combined(),
                       0.4 * np.array([1, 1]) / 2 + 0.6 * np.array([1, 2]) / 3)
    lm_p = local_empirical(st, g, 2)
    assert lm_p.labels == ("central", "peripheral_0", "peripheral_1")
    assert np.allclose(lm_p.proportions, [2 / 8, 3 / 8, 3 / 8])
    # own-block peripheral part includes self
    assert np.allclose(lm_p.parts[1], np.array([1, 2]) / 3)
