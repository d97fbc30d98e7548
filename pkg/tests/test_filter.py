import math

import numpy as np
import pytest
import torch
from hypothesis import given, strategies as st
from scipy.spatial.transform import Rotation

from ifsdf import filter as flt
from ifsdf.filter import (LOSS_COMBOS, DegenerateGradientError, FilterConfig, average_filter_baseline,
                          bilateral_distance, combo_config, loss_cd, loss_dist, loss_field, loss_pull,
                          loss_zero, project_neighbors, pull, total_loss, weight_normal, weight_spatial)
from ifsdf.geom import InputError, PointCloud, build_query_batch
from ifsdf.shapes import PlaneField, SphereField, plane_points

import scalar_filter as oracle
from conftest import small_field
from gradcheck import loss_fixture

E1 = math.exp(-1)


class ConstantField(PlaneField):
    def __init__(self, c):
        super().__init__()
        self.c = c

    def forward(self, x):
        return 0.0 * x.to(torch.float64).sum(-1) + self.c


@pytest.fixture(scope="module")
def plane_case():
    cloud = PointCloud(plane_points(400, 0.5, seed=0))
    qs = np.random.default_rng(0).uniform(-0.3, 0.3, (40, 3))
    return cloud, build_query_batch(cloud, qs, 16)


# --- weights -----------------------------------------------------------------

def test_spatial_weight_examples():
    assert weight_spatial([0, 0, 0], [0, 0, 0], 0.3) == 1.0
    assert weight_spatial([0, 0, 0], [0.3, 0, 0], 0.3) == pytest.approx(E1, rel=1e-12)
    with pytest.raises(InputError):
        weight_spatial([0, 0, 0], [1, 0, 0], 0.0)


@given(seed=st.integers(0, 10_000), k=st.integers(1, 20))
def test_max_policy_bounds_spatial_weights(seed, k):
    r = np.random.default_rng(seed)
    c, nb = r.normal(size=3), r.normal(size=(k, 3))
    sigma = np.linalg.norm(nb - c, axis=1).max()
    assert all(weight_spatial(c, p, sigma) >= E1 - 1e-15 for p in nb)


def test_normal_weight_examples():
    n = np.array([0.0, 0.0, 1.0])
    assert weight_normal(n, n) == 1.0
    t = math.radians(15)
    assert weight_normal(n, [math.sin(t), 0, math.cos(t)]) == pytest.approx(E1, rel=1e-9)
    anti = weight_normal(n, -n)
    assert anti == pytest.approx(math.exp(-2 / (1 - math.cos(t))), rel=1e-12)
    assert anti < 1e-25
    with pytest.raises(InputError):
        weight_normal([0, 0, 2], n)


# --- pulling and projection -------------------------------------------------------

def test_pull_plane():
    f = PlaneField()
    assert np.array_equal(pull(f, [0, 0, 2.0]), np.zeros(3))
    assert np.array_equal(pull(f, [0, 0, 0.7]), np.zeros(3))
    q = np.array([0.3, -0.2, 0.0])
    assert np.array_equal(pull(f, q), q)


def test_pull_sphere_lands_on_surface():
    f = SphereField(0.4)
    qs = np.random.default_rng(1).uniform(-1, 1, (50, 3))
    out = pull(f, qs)
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), 0.4, atol=1e-6)


def test_pull_degenerate_gradient():
    with pytest.raises(DegenerateGradientError):
        pull(ConstantField(0.2), [0.1, 0.2, 0.3])


def test_project_neighbors():
    f = PlaneField()
    p = np.array([[1.0, 1.0, 0.0]])
    assert np.array_equal(project_neighbors(f, 0.0, p), p)
    np.testing.assert_allclose(project_neighbors(f, 0.5, p), [[1, 1, 0.5]])
    with pytest.raises(DegenerateGradientError):
        project_neighbors(ConstantField(0.0), 0.5, p)


# --- bilateral distance ---------------------------------------------------------

def test_bilateral_coplanar_is_zero():
    nb = plane_points(16, 0.1, seed=2)
    z = np.tile([0, 0, 1.0], (16, 1))
    assert bilateral_distance([0, 0, 0], [0, 0, 1], nb, z) == 0.0


@pytest.mark.parametrize("h", [0.01, 0.2, -0.05])
def test_bilateral_plane_offset(h):
    nb = plane_points(16, 0.1, seed=3)
    z = np.tile([0, 0, 1.0], (16, 1))
    assert bilateral_distance([0, 0, h], [0, 0, 1], nb, z) == pytest.approx(2 * abs(h), rel=1e-12)


def random_patch(seed, k=12):
    r = np.random.default_rng(seed)
    c = r.normal(size=3)
    nb = c + 0.1 * r.normal(size=(k, 3))
    nc = r.normal(size=3) + [0, 0, 3]
    nn = r.normal(size=(k, 3)) * 0.3 + [0, 0, 1]
    return c, nc, nb, nn


@given(seed=st.integers(0, 10_000))
def test_bilateral_matches_scalar_oracle(seed):
    c, nc, nb, nn = random_patch(seed)
    assert bilateral_distance(c, nc, nb, nn) == pytest.approx(oracle.d_bi(c, nc, nb, nn), rel=1e-9, abs=1e-12)
    uni = FilterConfig(projection="unidirectional")
    assert bilateral_distance(c, nc, nb, nn, uni) == pytest.approx(
        oracle.d_bi(c, nc, nb, nn, bidirectional=False), rel=1e-9, abs=1e-12)


@given(seed=st.integers(0, 10_000))
def test_bilateral_rigid_motion_invariance(seed):
    c, nc, nb, nn = random_patch(seed)
    R = Rotation.random(random_state=seed).as_matrix()
    t = np.random.default_rng(seed).normal(size=3)
    a = bilateral_distance(c, nc, nb, nn)
    b = bilateral_distance(R @ c + t, R @ nc, nb @ R.T + t, nn @ R.T)
    assert a >= 0
    assert b == pytest.approx(a, abs=1e-9)


def test_bilateral_weight_quotient_invariance(monkeypatch):
    c, nc, nb, nn = random_patch(11)
    base = bilateral_distance(c, nc, nb, nn)
    orig = flt.spatial_weight
    monkeypatch.setattr(flt, "spatial_weight", lambda d2, s: 2.0 * orig(d2, s))
    assert bilateral_distance(c, nc, nb, nn) == pytest.approx(base, rel=1e-12)


def test_bilateral_empty_neighborhood():
    with pytest.raises(InputError):
        bilateral_distance([0, 0, 0], [0, 0, 1], np.zeros((0, 3)), np.zeros((0, 3)))


# --- average baseline ---------------------------------------------------------

def test_average_single_and_symmetric():
    np.testing.assert_allclose(average_filter_baseline([0, 0, 0], [[0.3, 0.1, 0.2]]), [0.3, 0.1, 0.2])
    sym = np.array([[1, 0, 0], [-1, 0, 0], [0, 2, 0], [0, -2, 0]], float)
    np.testing.assert_allclose(average_filter_baseline([0, 0, 0], sym), 0, atol=1e-15)


def test_average_rounds_off_a_corner():
    # right-angle corner along z: points on the planes x=0 (y>=0) and y=0 (x>=0)
    s = np.linspace(0.02, 0.2, 10)
    nb = np.concatenate([np.stack([0 * s, s, 0 * s], 1), np.stack([s, 0 * s, 0 * s], 1)])
    m = average_filter_baseline([0, 0, 0], nb)
    # the mean leaves both planes: strictly inside the corner
    assert m[0] > 1e-3 and m[1] > 1e-3


# --- losses ---------------------------------------------------------------------

def test_plane_losses_vanish(plane_case):
    cloud, batch = plane_case
    f = PlaneField()
    br = total_loss(f, batch, cloud, FilterConfig())
    assert float(br.l_dist) == 0.0 and float(br.l_zero) < 1e-12 and float(br.l_field) < 1e-12


def test_loss_dist_examples(plane_case):
    cloud, _ = plane_case
    assert float(loss_dist(PlaneField(), cloud)) == 0.0
    assert float(loss_dist(ConstantField(-0.25), cloud)) == pytest.approx(0.25)
    f = small_field(seed=1)
    assert float(loss_dist(f, cloud)) == pytest.approx(oracle.loss_dist(f, cloud.points), rel=1e-10)


def test_loss_zero_single_query_two_neighbors():
    # two input points, one query; everything by hand from the sphere SDF
    f = SphereField(0.5)
    pts = np.array([[0.5, 0, 0], [0, 0.5, 0]])
    cloud = PointCloud(pts)
    q = np.array([0.8, 0.1, 0.0])
    batch = build_query_batch(cloud, q[None], 2)
    assert list(batch.neighbor_indices[0]) == [0, 1]
    qh = 0.5 * q / np.linalg.norm(q)
    nq = q / np.linalg.norm(q)
    n0, n1 = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    sigma_p = max(np.linalg.norm(qh - pts[0]), np.linalg.norm(qh - pts[1]))
    scale = 1 - math.cos(math.radians(15))
    w = [math.exp(-np.sum((qh - p) ** 2) / sigma_p ** 2) * math.exp(-(1 - nq @ n) / scale)
         for p, n in zip(pts, (n0, n1))]
    proj = [abs(n @ (qh - p)) + abs(nq @ (qh - p)) for p, n in zip(pts, (n0, n1))]
    expect = (w[0] * proj[0] + w[1] * proj[1]) / (w[0] + w[1])
    assert float(loss_zero(f, batch, cloud)) == pytest.approx(expect, rel=1e-12)


def test_random_losses_match_scalar_oracle():
    f = small_field(seed=12)
    cloud, batch = loss_fixture(seed=12, n_points=40, n_queries=6)
    P = cloud.points
    assert float(loss_zero(f, batch, cloud)) == pytest.approx(oracle.loss_zero(f, batch, P), rel=1e-9)
    assert float(loss_field(f, batch, cloud)) == pytest.approx(oracle.loss_field(f, batch, P), rel=1e-9)
    assert float(loss_cd(f, batch, cloud)) == pytest.approx(oracle.loss_cd(f, batch, P), rel=1e-9)
    assert float(loss_pull(f, batch, cloud)) == pytest.approx(oracle.loss_pull(f, batch, P), rel=1e-9)


def test_field_loss_on_zero_set_equals_zero_loss():
    f = SphereField(0.4)
    v = np.random.default_rng(0).normal(size=(60, 3))
    cloud = PointCloud(0.4 * v / np.linalg.norm(v, axis=1, keepdims=True))
    q = np.array([[0.0, 0.0, 0.4]])  # on the zero set: q_hat = q
    batch = build_query_batch(cloud, q, 8)
    assert float(loss_field(f, batch, cloud)) == pytest.approx(float(loss_zero(f, batch, cloud)), rel=1e-12)


def test_field_loss_plane_level():
    cloud = PointCloud(plane_points(200, 0.5, seed=4))
    batch = build_query_batch(cloud, np.array([[0.05, -0.1, 0.3]]), 16)
    assert float(loss_field(PlaneField(), batch, cloud)) < 1e-12


def test_chamfer_loss_examples():
    f = PlaneField()
    pts = plane_points(30, 0.5, seed=5)
    cloud = PointCloud(pts)
    # queries above the points pull straight down onto them
    batch = build_query_batch(cloud, pts + [0, 0, 0.2], 4)
    assert float(loss_cd(f, batch, cloud)) == 0.0
    assert float(loss_pull(f, batch, cloud)) == 0.0
    # one pulled point at distance d from a one-point cloud: d each way
    one = PointCloud([[0.0, 0.0, 0.0]])
    b1 = build_query_batch(one, np.array([[0.2, 0.0, 0.5]]), 1)
    assert float(loss_cd(f, b1, one)) == pytest.approx(2 * 0.2)
    assert float(loss_pull(f, b1, one)) == pytest.approx(0.2)


def test_total_weighting(plane_case):
    f = small_field(seed=13)
    cloud, batch = loss_fixture(seed=13)
    br = total_loss(f, batch, cloud, FilterConfig())
    expect = br.l_zero + br.l_field + br.l_dist + 10 * br.l_cd
    assert float(br.total) == pytest.approx(float(expect), rel=1e-12)
    only_zero = total_loss(f, batch, cloud, FilterConfig(alpha1=0, alpha2=0, alpha3=0))
    assert float(only_zero.total) == pytest.approx(float(only_zero.l_zero), rel=1e-12)
    pull_cfg = total_loss(f, batch, cloud, FilterConfig(constraint="pull"))
    assert float(pull_cfg.total) == pytest.approx(
        float(pull_cfg.l_zero + pull_cfg.l_field + pull_cfg.l_dist + 10 * pull_cfg.l_pull), rel=1e-12)
    eik = total_loss(f, batch, cloud, FilterConfig(eikonal_weight=0.5))
    assert float(eik.total) == pytest.approx(float(br.total + 0.5 * eik.l_eikonal), rel=1e-12)
    pcloud, pbatch = plane_case
    assert float(total_loss(PlaneField(), pbatch, pcloud, FilterConfig(alpha3=0)).total) < 1e-12


def test_average_mode_replaces_filter():
    f = small_field(seed=14)
    cloud, batch = loss_fixture(seed=14)
    bil = total_loss(f, batch, cloud, FilterConfig())
    avg = total_loss(f, batch, cloud, combo_config("average"))
    assert float(avg.l_dist) == float(bil.l_dist)
    assert float(avg.l_zero) != float(bil.l_zero)


def test_config_validation():
    with pytest.raises(InputError):
        FilterConfig(alpha3=-1)
    with pytest.raises(InputError):
        FilterConfig(sigma_n_deg=0)
    with pytest.raises(InputError):
        FilterConfig(constraint="both")
    with pytest.raises(InputError):
        FilterConfig(k_filter=1)
    with pytest.raises(InputError):
        combo_config("nope")


def test_loss_combos():
    assert combo_config("l_cd").zero_weight == 0 and combo_config("l_cd").alpha1 == 0
    assert combo_config("l_cd+l_zero").zero_weight == 1 and combo_config("l_cd+l_zero").alpha1 == 0
    assert combo_config("l_pull").constraint == "pull"
    assert combo_config("full") == FilterConfig()
    assert set(LOSS_COMBOS) >= {"l_pull", "l_cd", "l_cd+l_zero", "l_cd+l_zero+l_field", "full"}
