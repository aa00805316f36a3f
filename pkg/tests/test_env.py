import math

import numpy as np
import pytest

import kpzlab as kz
from kpzlab import rare
from kpzlab.env import load_grid, log_likelihood_ratio, materialize, save_grid
from kpzlab.errors import ParameterError
from kpzlab.rng import cell_uniform, derive_seed


def test_single_cell_exponential_positive():
    g = kz.sample_grid(1, 1, kz.exponential(1.0), seed=7)
    assert g.weights[0, 0] > 0


def test_constant_grid():
    g = kz.sample_grid(2, 2, kz.constant(1.0), seed=123)
    assert (g.weights == 1.0).all()


def test_law_of_large_numbers():
    # sd of the mean is 0.01; 0.05 is a 5-sigma band
    g = kz.sample_grid(100, 100, kz.exponential(1.0), seed=42)
    assert abs(g.weights.mean() - 1.0) < 0.05


def test_rate_scaling():
    g1 = kz.sample_grid(50, 50, kz.exponential(1.0), seed=9)
    g2 = kz.sample_grid(50, 50, kz.exponential(2.0), seed=9)
    assert np.allclose(g1.weights, 2.0 * g2.weights)


def test_bit_identical_regeneration():
    a = kz.sample_grid(8, 8, kz.exponential(1.0), seed=99)
    b = kz.sample_grid(8, 8, kz.exponential(1.0), seed=99)
    assert (a.weights == b.weights).all()
    w, _ = materialize(a.rows, a.cols, a.dist, a.seed, a.tilt)
    assert (w == a.weights).all()


def test_traversal_independence():
    # a cell's weight does not depend on the grid shape around it
    big = kz.sample_grid(12, 12, kz.exponential(1.0), seed=5)
    small = kz.sample_grid(4, 7, kz.exponential(1.0), seed=5)
    assert (big.weights[:4, :7] == small.weights).all()


def test_cell_uniform_matches_kernels():
    g = kz.sample_grid(3, 3, kz.exponential(1.0), seed=31)
    u = cell_uniform(31, 2, 1)
    assert g.weights[2, 1] == -math.log(u)


def test_invalid_parameters():
    with pytest.raises(ParameterError):
        kz.exponential(0.0)
    with pytest.raises(ParameterError):
        kz.log_gamma(-1.0)
    with pytest.raises(ParameterError):
        kz.TiltSpec(1.0, 1.0)
    with pytest.raises(ParameterError):
        kz.sample_grid(0, 3, kz.exponential(1.0), 1)


def test_tilt_zero_gives_zero_loglr():
    _, lr = kz.sample_tilted_grid(6, 6, kz.exponential(1.0), kz.TiltSpec(0.0, 1.0), 5)
    assert lr == 0.0


def test_tilt_single_cell_closed_form():
    tilt = kz.TiltSpec(0.5, 1.0)
    g, lr = kz.sample_tilted_grid(1, 1, kz.exponential(1.0), tilt, 5)
    w = g.weights[0, 0]
    assert lr == pytest.approx(-0.5 * w - math.log(0.5), abs=1e-14)
    assert log_likelihood_ratio(g) == lr


def test_tilt_requires_exponential_base():
    with pytest.raises(ParameterError):
        kz.sample_tilted_grid(2, 2, kz.log_gamma(2.0), kz.TiltSpec(0.2, 1.0), 1)


def test_tilted_unbiasedness_2x2():
    # E_tilted[1{G > 6} exp(log_lr)] vs plain Monte Carlo of P(G > 6),
    # 2x2 grid fully inside the corridor, theta = 0.3, 1e5 replicates.
    spec = rare.ModelSpec("exp-lpp", 2)
    reps = 100000
    _, g_plain, _ = rare.screen(spec, 101, 0, reps, threads=1)
    p_plain = (g_plain > 6.0).mean()
    se_plain = math.sqrt(p_plain * (1 - p_plain) / reps)
    _, g_tilt, lr = rare.screen(spec, 202, 0, reps, theta=0.3, corridor=1.0, threads=1)
    est = np.where(g_tilt > 6.0, np.exp(lr), 0.0)
    p_tilt = est.mean()
    se_tilt = est.std(ddof=1) / math.sqrt(reps)
    assert abs(p_tilt - p_plain) < 3.0 * math.hypot(se_plain, se_tilt)


@pytest.mark.parametrize(
    "theta,n,corridor",
    [(0.3, 8, 1.0), (0.6, 3, 2.0), (0.9, 2, 2.0)],
    ids=["theta0.3-8x8", "theta0.6-3x3", "theta0.9-2x2"],
)
def test_tilted_unbiasedness_property(theta, n, corridor):
    # indicator of G above its median; grid size shrinks with theta so the
    # importance weights keep a usable effective sample size
    spec = rare.ModelSpec("exp-lpp", n)
    reps = 20000
    _, g_plain, _ = rare.screen(spec, 7, 0, reps, threads=1)
    med = np.median(g_plain)
    _, g_tilt, lr = rare.screen(spec, 8, 0, reps, theta=theta, corridor=corridor, threads=1)
    w = np.exp(lr)
    est = np.where(g_tilt > med, w, 0.0)
    se = est.std(ddof=1) / math.sqrt(reps)
    assert abs(est.mean() - 0.5) < 4.0 * se + 0.02


def test_tilted_unbiasedness_total_weight():
    # total weight of a fully tilted 6x6 grid has exact mean 36
    tilt = kz.TiltSpec(0.3, 3.0)
    reps = 4000
    tot = np.empty(reps)
    for k in range(reps):
        grid, lr1 = kz.sample_tilted_grid(6, 6, kz.exponential(1.0), tilt, derive_seed(8, k))
        tot[k] = grid.weights.sum() * math.exp(lr1)
    se = tot.std(ddof=1) / math.sqrt(reps)
    assert abs(tot.mean() - 36.0) < 4.0 * se


def test_monotone_coupling():
    t1, _ = kz.sample_tilted_grid(6, 6, kz.exponential(1.0), kz.TiltSpec(0.2, 2.0), 1)
    t2, _ = kz.sample_tilted_grid(6, 6, kz.exponential(1.0), kz.TiltSpec(0.6, 2.0), 1)
    corr = np.abs(np.subtract.outer(np.arange(6), np.arange(6))) <= 2.0 * 6 ** (2 / 3)
    assert (t2.weights[corr] > t1.weights[corr]).all()
    assert (t2.weights[~corr] == t1.weights[~corr]).all()


def test_log_gamma_weights():
    g = kz.sample_grid(40, 40, kz.log_gamma(3.0), seed=4)
    assert (g.weights > 0).all()
    # inverse-gamma(3) has mean 1/2
    assert abs(g.weights.mean() - 0.5) < 0.05
    again = kz.sample_grid(40, 40, kz.log_gamma(3.0), seed=4)
    assert (g.weights == again.weights).all()


def test_binary_roundtrip(tmp_path):
    tilt = kz.TiltSpec(0.25, 1.5)
    g, _ = kz.sample_tilted_grid(5, 7, kz.exponential(1.0), tilt, seed=77)
    p = tmp_path / "grid.bin"
    save_grid(g, p)
    h = load_grid(p)
    assert (h.weights == g.weights).all()
    assert h.dist == g.dist and h.seed == g.seed and h.tilt == g.tilt
    assert h.rows == 5 and h.cols == 7


def test_csv_export(tmp_path):
    g = kz.sample_grid(3, 4, kz.exponential(1.0), seed=6)
    p = tmp_path / "grid.csv"
    kz.env.grid_to_csv(g, p)
    back = np.loadtxt(p, delimiter=",")
    assert np.array_equal(back, g.weights)


def test_derive_seed_chunk_independence():
    from kpzlab import _fast

    a = _fast.derive_seeds(np.uint64(42), 0, 10)
    b = _fast.derive_seeds(np.uint64(42), 5, 5)
    assert (a[5:] == b).all()
    assert derive_seed(42, 7) == int(a[7])
