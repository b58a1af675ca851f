import io

import numpy as np
import pytest

import blockmf as bm


def make_targets():
    # N-independent exact proportions of the complete-peripheral family
    # with p_c = 1/2: a peripheral node sees N/4 centrals of its block and
    # N/2 peripherals (self included) spread evenly over the two blocks
    return bm.ProportionTargets(
        p_c=(0.5, 0.5), alpha_c=(1 / 3, 1 / 3),
        q=((1 / 3, 1 / 3), (1 / 3, 1 / 3)), alpha=(0.5, 0.5))


def test_proportional_family_sizes():
    build = bm.proportional_family(make_targets())
    g = build(40)
    assert g.block_sizes == ((10, 10), (10, 10))
    assert g.is_complete_peripheral
    with pytest.raises(bm.InvalidArgumentError, match="N=30"):
        build(30)   # 30 splits into blocks of 15, not into equal classes


def test_proportional_family_matches_targets():
    t = make_targets()
    g = bm.proportional_family(t)(24)
    rep = bm.check_regularity(g, t)
    assert rep.max_resid <= 1e-12


def test_sample_block_colors():
    g = bm.build_complete_peripheral([(50, 50), (50, 50)])
    inits = [np.array([1.0, 0.0]), np.array([0.0, 1.0]),
             np.array([0.5, 0.5]), np.array([0.2, 0.8])]
    gen = np.random.default_rng(1)
    colors = bm.sample_block_colors(g, inits, gen)
    assert np.all(colors[g.central_nodes(0)] == 0)
    assert np.all(colors[g.peripheral_nodes(0)] == 1)
    frac = colors[g.peripheral_nodes(1)].mean()
    assert 0.6 <= frac <= 0.95   # ~Binomial(50, 0.8)/50
    again = bm.sample_block_colors(g, inits, np.random.default_rng(1))
    assert np.array_equal(colors, again)
    with pytest.raises(bm.InvalidArgumentError):
        bm.sample_block_colors(g, inits[:3], gen)


def small_lln(threads=1, n_list=(12, 24), replicas=6):
    targets = make_targets()
    spec = bm.sis_spec(2, gamma=0.8, nu=0.5, eta=0.6, zeta=0.7)
    inits = [np.array([0.6, 0.4])] * 4
    return bm.lln_experiment(
        bm.proportional_family(targets), spec, targets, inits,
        T=1.0, grid=11, N_list=list(n_list), replicas=replicas,
        seed=902, dt=0.01, threads=threads)


def test_lln_experiment_shrinks_with_n():
    rep = small_lln(n_list=(12, 96), replicas=12)
    assert rep.n_values == (12, 96)
    assert rep.means[1] < rep.means[0]
    assert rep.distances.shape == (2, 12)
    assert np.all(rep.stderrs > 0)
    assert rep.component_means.shape == (2, 4)


def test_lln_experiment_deterministic_across_threads():
    a = small_lln(threads=1)
    b = small_lln(threads=2)
    assert np.array_equal(a.distances, b.distances)
    assert np.array_equal(a.means, b.means)


def test_lln_experiment_validation():
    targets = make_targets()
    spec = bm.sis_spec(2, 0.8, 0.5, 0.6, 0.7)
    inits = [np.array([0.6, 0.4])] * 4
    fam = bm.proportional_family(targets)
    with pytest.raises(bm.InvalidArgumentError):
        bm.lln_experiment(fam, spec, targets, inits, 1.0, 11, [24, 12],
                          6, 1)
    with pytest.raises(bm.InvalidArgumentError):
        bm.lln_experiment(fam, spec, targets, inits, 1.0, 11, [12, 24],
                          1, 1)


def test_convergence_report_csv_and_svg():
    rep = small_lln()
    buf = io.StringIO()
    rep.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "N,replicas,mean_dist,stderr"
    assert len(lines) == 3
    assert lines[1].split(",")[0] == "12"
    svg = io.StringIO()
    rep.to_svg(svg)
    text = svg.getvalue()
    assert text.startswith("<svg ")
    assert "slope -1/2" in text
    assert text.rstrip().endswith("</svg>")


def test_multichaos_joint_and_tv():
    targets = make_targets()
    spec = bm.sis_spec(2, 0.8, 0.5, 0.6, 0.7)
    inits = [np.array([0.6, 0.4])] * 4
    g = bm.proportional_family(targets)(48)
    joint, product, tv = bm.multichaos_test(
        g, spec, targets, [(0, "c"), (1, "p")], T=1.0, replicas=400,
        seed=17, inits=inits)
    assert joint.shape == (2, 2) and product.shape == (2, 2)
    assert joint.sum() == pytest.approx(1.0)
    assert product.sum() == pytest.approx(1.0)
    assert 0.0 <= tv <= 1.0
    # the tagged nodes in a 48-node system are already nearly independent
    assert tv < 0.2
    # determinism across thread counts
    j2, p2, tv2 = bm.multichaos_test(
        g, spec, targets, [(0, "c"), (1, "p")], T=1.0, replicas=400,
        seed=17, inits=inits, threads=2)
    assert np.array_equal(joint, j2)
    assert tv == tv2


def test_multichaos_tagged_resolution():
    targets = make_targets()
    spec = bm.sis_spec(2, 0.8, 0.5, 0.6, 0.7)
    inits = [np.array([0.6, 0.4])] * 4
    g = bm.proportional_family(targets)(24)
    # node ids and (block, class) requests resolve to the same nodes
    a = bm.multichaos_test(g, spec, targets, [(0, "c"), (1, "p")], 0.5,
                           50, 3, inits=inits)
    first_p1 = list(g.peripheral_nodes(1))[0]
    b = bm.multichaos_test(g, spec, targets, [0, first_p1], 0.5,
                           50, 3, inits=inits)
    assert np.array_equal(a[0], b[0])
    with pytest.raises(bm.InvalidArgumentError, match="distinct"):
        bm.multichaos_test(g, spec, targets, [0, (0, "c")], 0.5, 50, 3,
                           inits=inits)
    with pytest.raises(bm.InvalidArgumentError):
        bm.multichaos_test(g, spec, targets, [g.n_total], 0.5, 50, 3,
                           inits=inits)
    # three tagged nodes produce a rank-3 joint table
    j3, p3, _ = bm.multichaos_test(
        g, spec, targets, [0, (0, "p"), (1, "p")], 0.5, 50, 3, inits=inits)
    assert j3.shape == (2, 2, 2)
    assert p3.sum() == pytest.approx(1.0)
