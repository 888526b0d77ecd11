import math
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LAM0, degenerate_kernel
from weierdim.core import KernelFunction, Params, SymbolStream, eval_W, g_apply
from weierdim.entropy import (
    DigitProductMeasure,
    EmpiricalMeasure,
    component,
    component_entropy_average,
    conditional_entropy,
    decomposition_bound,
    decomposition_residual,
    entropy,
    entropy_dimension,
    is_concentrated,
    is_saturated,
    join_entropy,
    load_measure_csv,
    mixture,
    orthogonal_complement,
    project,
    sample_flow_projection,
    sample_mu,
    save_measure_csv,
)

H03 = -(0.3 * math.log2(0.3) + 0.7 * math.log2(0.7))
BERN = DigitProductMeasure.bernoulli(0.3)


def brute_entropy(points, weights, b, n):
    """Dictionary-based cell masses, independent of the vectorised path."""
    mass = defaultdict(float)
    for pt, w in zip(points, weights):
        mass[tuple(math.floor(v * b**n) for v in pt)] += w
    return sum(-m * math.log(m, b) for m in mass.values() if m > 0)


def uniform_cells(level, dim=1, b=2):
    """Exact uniform measure at ``level``: one point per cell centre."""
    g = (np.arange(b**level) + 0.5) / b**level
    pts = np.stack(np.meshgrid(*([g] * dim), indexing="ij"), -1).reshape(-1, dim)
    return EmpiricalMeasure.uniform_weights(pts, b)


def random_measure(rng, k=2, size=200):
    pts = rng.uniform(-1, 1, size=(size, k))
    w = rng.random(size)
    return EmpiricalMeasure(pts, w / w.sum())


# --- entropy ----------------------------------------------------------------------------


def test_entropy_examples():
    for n in range(6):
        assert entropy(EmpiricalMeasure.point_mass([0.3, -0.2]), n) == 0
    for n in range(1, 10):
        assert entropy(uniform_cells(10), n) == pytest.approx(n, abs=1e-12)
        assert entropy(BERN, n) == pytest.approx(n * H03, abs=1e-12)
    with pytest.raises(ValueError):
        entropy(BERN, -1)


def test_exact_measures_agree_with_enumeration():
    for m in (DigitProductMeasure.bernoulli(0.3), DigitProductMeasure(((0.2, 0.5, 0.3), (0.6, 0.0, 0.4)), 3)):
        e = m.to_empirical(6)
        for n in range(7):
            assert m.entropy(n) == pytest.approx(e.entropy(n), abs=1e-12)
            assert m.occupied(n) == e.occupied(n)


def test_entropy_matches_brute_force(rng):
    for b in (2, 3):
        w = random_measure(rng, 2, 300)
        for n in range(0, 7):
            assert w.entropy(n) == pytest.approx(brute_entropy(w.points, w.weights, b=w.b, n=n), abs=1e-12)
    # negative coordinates floor consistently
    w = EmpiricalMeasure.uniform_weights([[-0.1], [-0.6], [0.2]])
    assert w.entropy(1) == pytest.approx(math.log2(3))
    assert w.entropy(0) == pytest.approx(math.log2(3) - 2 / 3)


def test_high_level_exact_entropy():
    # type-class enumeration reaches levels a point cloud never could
    assert BERN.entropy(200) == pytest.approx(200 * H03, rel=1e-12)
    u = DigitProductMeasure.uniform(2, 3)
    assert u.entropy(40) == pytest.approx(80, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.sampled_from([2, 3]))
def test_entropy_bounds_and_monotonicity(seed, k, b):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-2, 2, size=(150, k))
    w = rng.random(150)
    mu = EmpiricalMeasure(pts, w / w.sum(), b)
    prev = None
    for n in range(0, 8):
        h = mu.entropy(n)
        assert -1e-12 <= h <= math.log(mu.occupied(n), b) + 1e-12
        if prev is not None:
            assert prev - 1e-12 <= h <= prev + k + 1e-12
        prev = h


def test_concavity_and_convexity_bounds(rng):
    for _ in range(100):
        w1, w2 = random_measure(rng, 2, 60), random_measure(rng, 2, 60)
        for t in (0.25, 0.5, 0.75):
            mix = mixture(w1, w2, t)
            for n in range(1, 9):
                lin = t * w1.entropy(n) + (1 - t) * w2.entropy(n)
                h = mix.entropy(n)
                assert lin <= h + 1e-12
                assert h <= 1 + lin + 1e-12


# --- conditional entropy and components --------------------------------------------------------


def test_conditional_entropy_examples():
    u = uniform_cells(12)
    assert conditional_entropy(u, 4, 4) == 0
    assert conditional_entropy(u, 9, 4) == pytest.approx(5, abs=1e-12)
    for n, m in [(0, 3), (5, 7), (40, 10)]:
        assert conditional_entropy(BERN, n + m, n) == pytest.approx(m * H03, abs=1e-10)
    with pytest.raises(ValueError):
        conditional_entropy(u, 3, 4)


def test_conditional_consistency(rng):
    for w in [random_measure(rng, 2, 500), uniform_cells(8), BERN, DigitProductMeasure.uniform(2)]:
        for nc, nf in [(0, 3), (2, 5), (4, 4), (3, 7)]:
            direct = component_entropy_average(w, nf, nc)
            assert direct == pytest.approx(conditional_entropy(w, nf, nc), abs=1e-10)


def test_component_average_by_hand(rng):
    # explicit loop over components, no vectorised bookkeeping
    w = random_measure(rng, 1, 200)
    for nc, nf in [(1, 3), (2, 6)]:
        cells = np.floor(w.points[:, 0] * 2**nc)
        total = 0.0
        for c in np.unique(cells):
            mask = cells == c
            mass = w.weights[mask].sum()
            comp = component(w, nc, [int(c)])
            assert comp.weights.sum() == pytest.approx(1.0)
            total += mass * brute_entropy(comp.points, comp.weights, 2, nf)
        assert total == pytest.approx(component_entropy_average(w, nf, nc), abs=1e-10)


def test_component_examples():
    pm = EmpiricalMeasure.point_mass([0.3])
    c = component(pm, 3, [2])
    assert np.array_equal(c.points, pm.points) and c.weights[0] == 1
    u = uniform_cells(6)
    c = component(u, 1, [0])
    assert np.all(c.points < 0.5) and c.size == 32
    assert np.allclose(c.weights, 1 / 32)
    with pytest.raises(ValueError):
        component(u, 1, [5])
    for level, idx in [(3, [5]), (7, [100])]:
        comp = component(BERN, level, idx)
        for m in (1, 4, 9):
            assert comp.entropy(level + m) == pytest.approx(m * H03, abs=1e-10)
    with pytest.raises(ValueError):
        component(DigitProductMeasure(((1.0, 0.0),)), 2, [1])


# --- decomposition ------------------------------------------------------------------------------


def test_decomposition_examples():
    assert decomposition_residual(BERN, 24, 4) <= 1e-10
    assert decomposition_residual(EmpiricalMeasure.point_mass([0.1, 0.7]), 10, 3) == 0
    u2 = DigitProductMeasure.uniform(2)
    assert decomposition_bound(u2, 24, 4) == pytest.approx(2 * (8 + math.log2(2 * math.sqrt(2) + 2) + 1) / 24)
    assert decomposition_residual(u2, 24, 4) <= 1e-10
    with pytest.raises(ValueError):
        decomposition_residual(BERN, 3, 4)


def test_decomposition_residual_by_definition(rng):
    w = random_measure(rng, 2, 400)
    n, m = 6, 2
    avg = sum(conditional_entropy(w, i + m, i) for i in range(n)) / (n * m)
    assert decomposition_residual(w, n, m) == pytest.approx(abs(w.entropy(n) / n - avg), abs=1e-12)


def test_decomposition_contract(rng):
    for w in [random_measure(rng, 2, 2000), uniform_cells(5, 2), DigitProductMeasure(((0.1, 0.2, 0.7),), 3)]:
        for n, m in [(8, 1), (10, 3), (12, 4)]:
            assert decomposition_residual(w, n, m) <= decomposition_bound(w, n, m)


# --- projections and diagnostics ---------------------------------------------------------------------


def test_project_examples(rng):
    w = random_measure(rng, 2)
    full = project(w, np.eye(2))
    assert np.array_equal(full.points, w.points)
    z = project(w, np.zeros((0, 2)))
    assert z.dim == 0 and z.entropy(5) == 0
    sq = uniform_cells(6, 2)
    px = project(sq, [[1.0, 0.0]])
    assert px.dim == 1
    assert px.entropy(6) == pytest.approx(6, abs=1e-12)
    with pytest.raises(ValueError):
        project(w, [[1.0, 1.0]])


def test_orthogonal_complement(rng):
    for q, k in [(0, 3), (1, 3), (2, 4), (3, 3)]:
        B = np.linalg.qr(rng.normal(size=(k, k)))[0][:q]
        P = orthogonal_complement(B, k)
        full = np.concatenate([B, P])
        assert full.shape == (k, k)
        assert np.allclose(full @ full.T, np.eye(k))


def test_commensurability(rng):
    sq = uniform_cells(7, 2)
    for w in [random_measure(rng, 2, 3000), sq, mixture(sq, random_measure(rng, 2, 500), 0.4)]:
        for theta in (0.3, 1.1, 2.0):
            V = [[math.cos(theta), math.sin(theta)]]
            diffs = [abs(join_entropy(w, V, m) - w.entropy(m)) for m in range(1, 8)]
            assert max(diffs) <= w.dim


def test_concentration_examples():
    assert is_concentrated(EmpiricalMeasure.point_mass([0.2, 0.4]), np.zeros((0, 2)), 0.05)
    line = EmpiricalMeasure.uniform_weights(np.column_stack([np.linspace(0, 1, 500, endpoint=False), np.zeros(500)]))
    assert is_concentrated(line, [[1.0, 0.0]], 0.01)
    sq = uniform_cells(6, 2)
    assert not is_concentrated(sq, [[1.0, 0.0]], 0.01)
    # brute force: the best strip of half-width 0.01 holds about 0.02 of the mass
    ys = sq.points[:, 1]
    best = max(np.mean(np.abs(ys - c) <= 0.01) for c in np.linspace(0, 1, 401))
    assert best < 0.99
    with pytest.raises(ValueError):
        is_concentrated(sq, [[1.0, 0.0]], 0)


def test_saturation_examples():
    sq = uniform_cells(8, 2)
    assert is_saturated(sq, np.eye(2), 0.1, 8)
    line = EmpiricalMeasure.uniform_weights(np.column_stack([(np.arange(256) + 0.5) / 256, np.zeros(256)]))
    assert is_saturated(line, [[1.0, 0.0]], 0.1, 8)
    assert not is_saturated(EmpiricalMeasure.point_mass([0.3, 0.3]), [[0.0, 1.0]], 0.1, 3)
    with pytest.raises(ValueError):
        is_saturated(sq, np.eye(2), 0.1, 0)


# --- samplers ---------------------------------------------------------------------------------------


def test_sample_mu_examples():
    mu = sample_mu(Params(2, 0.7), KernelFunction.zero(1), 100, seed=3)
    assert np.all(mu.points[:, 1] == 0)
    xs = mu.points[:, 0]
    assert np.all(np.floor(xs * 100) == np.arange(100))
    one = sample_mu(Params(2, 0.7), KernelFunction.cosine(), 1)
    assert one.size == 1 and one.entropy(10) == 0
    mu = sample_mu(Params(3, 0.5), KernelFunction.cosine(), 5000)
    assert np.max(np.abs(mu.points[:, 1])) <= 2 + 1e-12
    assert mu.radius <= 3 + 1e-12
    mu2 = sample_mu(Params(3, 0.5), KernelFunction.cosine(), 5000)
    assert np.array_equal(mu.points, mu2.points)


def test_sample_mu_values_are_W(rng):
    p, k = Params(2, 0.8), KernelFunction.complex_exponential()
    mu = sample_mu(p, k, 300, seed=9)
    assert np.allclose(mu.points[:, 1:], eval_W(p, k, mu.points[:, 0]), atol=0)


def test_flow_projection_examples():
    z = sample_flow_projection(Params(2, 0.7), KernelFunction.zero(2), SymbolStream(), 200)
    assert np.all(z.points == 0)


def test_flow_projection_flat_for_telescoping():
    # phi = W0 - lam W0(b.) gives W = W0 smooth, so every pi_j mu is (close to) a point mass
    from conftest import telescoping_kernel

    p = Params(2, 0.7)
    k = telescoping_kernel(0.7)
    j = SymbolStream((1, 0, 1, 1), (0, 1))
    w = sample_flow_projection(p, k, j, 20_000)
    fit = entropy_dimension(w, (2, 8))
    assert abs(fit.slope) < 0.05
    assert np.ptp(w.points) < 1e-8


def test_flow_projection_degenerate_collapses():
    # q' = d = 1 at lam0: same flat behaviour for the scalar degenerate kernel
    p = Params(2, LAM0)
    w = sample_flow_projection(p, degenerate_kernel(), SymbolStream((0, 1), (1,)), 20_000)
    assert abs(entropy_dimension(w, (2, 8)).slope) < 0.05
    generic = sample_flow_projection(Params(2, 0.8), degenerate_kernel(), SymbolStream((0, 1), (1,)), 20_000)
    assert entropy_dimension(generic, (2, 6)).slope > 0.5


@pytest.mark.slow
def test_flow_projection_self_affinity():
    # pi_j mu = (1/b) sum_i [lam pi_{i j} mu + pi_j g_i(0, 0)], assembled from independent pieces
    p, k = Params(2, 0.8), KernelFunction.complex_exponential()
    j = SymbolStream.random(2, 64, np.random.default_rng(5))
    M = 10**6
    direct = sample_flow_projection(p, k, j, M, seed=11)
    pieces = []
    for i in range(p.b):
        part = sample_flow_projection(p, k, j.prepend([i]), M // p.b, seed=100 + i)
        origin = g_apply(p, k, [i], (np.zeros(1), np.zeros((1, k.d))))
        from weierdim.core import eval_flow_projection

        shift = eval_flow_projection(p, k, j, origin)[0]
        pieces.append(p.lam * part.points + shift)
    assembled = EmpiricalMeasure.uniform_weights(np.concatenate(pieces))
    assert abs(direct.entropy(6) - assembled.entropy(6)) <= 0.05


# --- entropy dimension --------------------------------------------------------------------------------


def test_entropy_dimension_examples():
    fit = entropy_dimension(DigitProductMeasure.uniform(2), (1, 10))
    assert fit.slope == pytest.approx(2.0, abs=1e-9) and fit.warning == ""
    assert entropy_dimension(BERN, (1, 30)).slope == pytest.approx(H03, abs=1e-9)
    assert entropy_dimension(EmpiricalMeasure.point_mass([0.5]), (1, 10)).slope == 0
    with pytest.raises(ValueError):
        entropy_dimension(BERN, (3, 3))


def test_entropy_dimension_matches_numpy_fit():
    w = random_measure(np.random.default_rng(2), 2, 100_000)
    fit = entropy_dimension(w, (1, 6))
    ns = [n for n in range(1, 7) if n not in fit.undersampled]
    H = [w.entropy(n) for n in ns]
    assert fit.slope == pytest.approx(np.polyfit(ns, H, 1)[0], rel=1e-12)


def test_undersampling_warning():
    w = uniform_cells(8)  # 256 points: every level >= 3 has >= M/50 cells
    fit = entropy_dimension(w, (3, 6))
    assert fit.undersampled == (3, 4, 5, 6)
    assert "undersampled" in fit.warning
    assert fit.slope == pytest.approx(1.0)
    fit = entropy_dimension(uniform_cells(12), (1, 8))
    assert fit.undersampled == (7, 8) and fit.levels == tuple(range(1, 7))


# --- CSV ------------------------------------------------------------------------------------------------


def test_csv_round_trip(tmp_path, rng):
    w = random_measure(rng, 3, 50)
    path = tmp_path / "m.csv"
    text = save_measure_csv(w, path)
    assert text.splitlines()[0] == f"# dim=3 points=50 radius={w.radius:.17g}"
    for back in (load_measure_csv(path), load_measure_csv(text)):
        assert np.array_equal(back.points, w.points)
        assert np.array_equal(back.weights, w.weights)
        assert back.radius == w.radius


def test_csv_count_mismatch():
    text = "# dim=1 points=2 radius=1\n0.5,1\n"
    with pytest.raises(ValueError):
        load_measure_csv(text)
