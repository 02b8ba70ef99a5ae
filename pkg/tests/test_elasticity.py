from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from caerom.elasticity import (
    ElasticityParams,
    GroundMotion,
    NewmarkConfig,
    Opening,
    WallGeometry,
    WallMesh,
    assemble_system,
    build_wall_mesh,
    element_strains,
    expand,
    load_ground_motion_csv,
    monitored_rows,
    newmark_history,
    newmark_integrate,
    rayleigh_damping,
    reduced_wall_geometry,
    save_ground_motion_csv,
    solve_wall,
    synthetic_accelerogram,
)
from caerom.elasticity.fem import assemble_full, plane_stress_matrix
from caerom.errors import AssemblyError, ConfigurationError, FormatError, GeometryError

UNIT_PANEL = WallGeometry(width=1.0, story_heights=(1.0,), openings=(), element_size=1.0)


@pytest.fixture(scope="module")
def reduced():
    mesh = build_wall_mesh(reduced_wall_geometry())
    return mesh, assemble_system(mesh, ElasticityParams(E_per_story=(25e9, 30e9, 35e9)))


# ---------------------------------------------------------------- mesh


def test_unit_panel_counts():
    mesh = build_wall_mesh(UNIT_PANEL)
    assert mesh.n_nodes == 4 and mesh.n_elements == 1
    assert len(mesh.fixed_dofs) == 4  # two base nodes, both directions
    assert mesh.d == 4


def test_default_mesh_counts_are_stable():
    a, b = build_wall_mesh(), build_wall_mesh()
    assert (a.n_elements, a.d) == (888, 1938)
    assert np.array_equal(a.nodes, b.nodes) and np.array_equal(a.elements, b.elements)
    assert np.bincount(a.story).tolist() == [296, 296, 296]
    assert len(a.monitored_nodes) == 3


@pytest.mark.parametrize("geometry", [WallGeometry(), reduced_wall_geometry(), UNIT_PANEL])
def test_refinement_quadruples_elements(geometry):
    coarse = build_wall_mesh(geometry)
    fine = build_wall_mesh(geometry.refined(2))
    assert fine.n_elements == 4 * coarse.n_elements


def test_monitored_nodes_at_story_tops():
    mesh = build_wall_mesh()
    np.testing.assert_allclose(mesh.nodes[mesh.monitored_nodes], [[0, 3.5], [0, 7.0], [0, 10.5]])


def test_elements_counterclockwise_and_base_fixed():
    mesh = build_wall_mesh()
    xy = mesh.nodes[mesh.elements]
    area2 = np.sum(xy[..., 0] * np.roll(xy[..., 1], -1, axis=1) - np.roll(xy[..., 0], -1, axis=1) * xy[..., 1], axis=1)
    assert np.all(area2 > 0)
    base = np.flatnonzero(mesh.nodes[:, 1] == 0)
    assert set(mesh.fixed_dofs.tolist()) == set((2 * base).tolist()) | set((2 * base + 1).tolist())


@pytest.mark.parametrize(
    "geometry",
    [
        WallGeometry(openings=(Opening(2.4, 0.0, 1.0, 2.5),)),
        WallGeometry(openings=(Opening(5.5, 0.0, 1.0, 2.5),)),
        WallGeometry(element_size=0.4),
        WallGeometry(openings=(Opening(0.0, 0.0, 6.0, 10.5),)),
    ],
)
def test_nonconforming_geometry_rejected(geometry):
    with pytest.raises(GeometryError):
        build_wall_mesh(geometry)


def test_geometry_dict_round_trip():
    g = WallGeometry()
    assert WallGeometry.from_dict(g.to_dict()) == g


# ---------------------------------------------------------------- assembly


@pytest.mark.parametrize("poisson", [0.0, 0.2, 0.45])
def test_single_element_patch_test(poisson):
    E, sigma, t = 30e9, 1e6, 1.0
    mesh = build_wall_mesh(UNIT_PANEL)
    # nodes: 0 (0,0), 1 (1,0), 2 (0,1), 3 (1,1); restrain only rigid-body motion
    mesh = replace(mesh, fixed_dofs=np.array([0, 1, 4]))
    params = ElasticityParams(E_per_story=(E,), poisson=poisson, thickness=t)
    system = assemble_system(mesh, params)
    f = np.zeros(8)
    f[[2, 6]] = sigma * t * 0.5  # traction on the edge x = 1
    u = expand(mesh, spsolve(sp.csc_matrix(system.K), f[mesh.free_dofs]))
    strains = element_strains(mesh, u, 0)
    expected = np.array([sigma / E, -poisson * sigma / E, 0.0])
    assert np.max(np.abs(strains - expected)) <= 1e-10 * (sigma / E)


def test_distorted_patch_reproduces_linear_field():
    nodes = np.array(
        [[0, 0], [1, 0], [2, 0], [0, 1], [1.15, 0.9], [2, 1], [0, 2], [1, 2], [2, 2]], dtype=float
    )
    elements = np.array([[0, 1, 4, 3], [1, 2, 5, 4], [3, 4, 7, 6], [4, 5, 8, 7]])
    boundary = np.array([0, 1, 2, 3, 5, 6, 7, 8])
    fixed = np.sort(np.concatenate([2 * boundary, 2 * boundary + 1]))
    mesh = WallMesh(nodes, elements, np.zeros(4, dtype=int), fixed, np.array([0]))
    K, _ = assemble_full(mesh, ElasticityParams(E_per_story=(1.0,), poisson=0.3))
    K = K.toarray()
    A = np.array([[1e-3, 2e-3], [-5e-4, 7e-4]])
    exact = (nodes @ A.T).ravel()
    free = mesh.free_dofs
    u = exact.copy()
    u[free] = np.linalg.solve(K[np.ix_(free, free)], -K[np.ix_(free, fixed)] @ exact[fixed])
    assert np.max(np.abs(u - exact)) <= 1e-10 * np.max(np.abs(exact))
    eps = np.array([A[0, 0], A[1, 1], A[0, 1] + A[1, 0]])
    for e in range(4):
        assert np.max(np.abs(element_strains(mesh, u, e) - eps)) <= 1e-10 * np.max(np.abs(eps))


def test_stiffness_symmetric_and_positive_definite(reduced):
    _, system = reduced
    K = system.K
    assert abs(K - K.T).max() == 0.0
    np.linalg.cholesky(K.toarray())
    assert np.all(system.M > 0)


def test_linearity_in_youngs_modulus():
    mesh = build_wall_mesh(reduced_wall_geometry())
    p = ElasticityParams(E_per_story=(20e9, 30e9, 40e9))
    base = assemble_system(mesh, p)
    doubled = assemble_system(mesh, p.with_moduli([2 * e for e in p.E_per_story]))
    assert abs(doubled.K - 2 * base.K).max() == 0.0
    assert np.array_equal(doubled.M, base.M)
    tripled = assemble_system(mesh, p.with_moduli([3 * e for e in p.E_per_story]))
    assert abs(tripled.K - 3 * base.K).max() <= 1e-15 * abs(base.K).max() * 3


def test_lumped_mass_total():
    mesh = build_wall_mesh()
    p = ElasticityParams()
    _, mass = assemble_full(mesh, p)
    area = 6.0 * 10.5 - 3 * 2.5
    assert mass[0::2].sum() == pytest.approx(p.density * p.thickness * area, rel=1e-12)


def test_unconstrained_stiffness_is_singular():
    mesh = replace(build_wall_mesh(UNIT_PANEL), fixed_dofs=np.array([], dtype=int))
    with pytest.raises(AssemblyError):
        assemble_system(mesh, ElasticityParams(E_per_story=(1e9,)))


def test_story_moduli_must_cover_mesh():
    with pytest.raises(ConfigurationError):
        assemble_system(build_wall_mesh(), ElasticityParams(E_per_story=(30e9,)))


def test_plane_stress_matrix_hand_values():
    D = plane_stress_matrix(1.0, 0.25)
    c = 1 / (1 - 0.0625)
    np.testing.assert_allclose(D, c * np.array([[1, 0.25, 0], [0.25, 1, 0], [0, 0, 0.375]]), rtol=1e-15)


# ---------------------------------------------------------------- dynamics


def zero_crossing_period(t, u):
    s = np.flatnonzero(np.sign(u[:-1]) * np.sign(u[1:]) < 0)
    crossings = t[s] - u[s] * (t[s + 1] - t[s]) / (u[s + 1] - u[s])
    return 2 * np.mean(np.diff(crossings))


def test_zero_motion_zero_response(reduced):
    mesh, system = reduced
    U = newmark_integrate(system.K, system.M, GroundMotion(np.zeros(50)), iota=mesh.horizontal_influence())
    assert U.shape == (mesh.d, 50) and np.all(U == 0.0)


def test_sdof_pulse_matches_analytic_period():
    m, k, F = 1.0, 4 * np.pi**2, 1.0  # period T = 1 s
    T, dt, n = 1.0, 0.01, 1001
    t = dt * np.arange(n)
    pulse_end = 20
    load = np.zeros((1, n))
    load[0, : pulse_end + 1] = F
    hist = newmark_history(np.array([[k]]), np.array([m]), load, NewmarkConfig(dt=dt))
    u = hist.u[0]
    # while the load is on, the response is (F/k)(1 - cos wt)
    analytic = F / k * (1 - np.cos(2 * np.pi * t[: pulse_end + 1]))
    assert np.max(np.abs(u[: pulse_end + 1] - analytic)) <= 0.01 * F / k
    period = zero_crossing_period(t[pulse_end + 1 :], u[pulse_end + 1 :])
    assert abs(period - T) / T <= 0.01


def test_undamped_energy_conserved(reduced):
    mesh, system = reduced
    f = np.zeros(mesh.d)
    f[monitored_rows(mesh)] = 1e6
    u0 = spsolve(sp.csc_matrix(system.K), f)
    hist = newmark_history(system.K, system.M, np.zeros((mesh.d, 600)), NewmarkConfig(dt=0.01), u0=u0)
    kinetic = 0.5 * np.einsum("in,i,in->n", hist.v, system.M, hist.v)
    strain = 0.5 * np.einsum("in,in->n", hist.u, system.K @ hist.u)
    energy = kinetic + strain
    assert np.max(np.abs(energy - energy[0])) / energy[0] <= 1e-6
    assert kinetic.max() > 0.1 * energy[0]  # the system really oscillates


def test_response_linear_in_ground_motion(reduced):
    mesh, system = reduced
    motion = synthetic_accelerogram(150, seed=3)
    iota = mesh.horizontal_influence()
    U1 = newmark_integrate(system.K, system.M, motion, iota=iota)
    Uc = newmark_integrate(system.K, system.M, motion.scaled(-2.5), iota=iota)
    assert np.max(np.abs(Uc + 2.5 * U1)) <= 1e-10 * np.max(np.abs(Uc))


def test_solve_wall_deterministic_and_shaped():
    mesh = build_wall_mesh(reduced_wall_geometry())
    motion = synthetic_accelerogram(150, seed=1)
    p = ElasticityParams(E_per_story=(28e9, 31e9, 33e9))
    a = solve_wall(mesh, p, motion)
    b = solve_wall(mesh, p, motion)
    assert a.values.shape == (204, 150) and a.values.tobytes() == b.values.tobytes()
    assert np.all(a.values[:, 0] == 0.0)
    assert len(a.dof_labels) == 204


def test_heavily_damped_step_load_reaches_static_solution(reduced):
    mesh, system = reduced
    f = np.zeros(mesh.d)
    f[monitored_rows(mesh)] = 1e6
    load = np.repeat(f[:, None], 600, axis=1)
    C = rayleigh_damping(system.M, system.K, 400.0, 1e-3)
    hist = newmark_history(system.K, system.M, load, NewmarkConfig(dt=0.01), C=C)
    static = spsolve(sp.csc_matrix(system.K), f)
    assert np.linalg.norm(hist.u[:, -1] - static) <= 0.01 * np.linalg.norm(static)


def test_newmark_config_validation():
    with pytest.raises(ConfigurationError):
        NewmarkConfig(beta=0.0)
    with pytest.raises(ConfigurationError):
        NewmarkConfig(gamma=0.4)


def test_integrator_dt_must_match_record(reduced):
    _, system = reduced
    with pytest.raises(ConfigurationError):
        newmark_integrate(system.K, system.M, GroundMotion(np.zeros(5), dt=0.02), NewmarkConfig(dt=0.01))


# ---------------------------------------------------------------- ground motion


def test_synthetic_accelerogram_properties():
    m = synthetic_accelerogram(600, dt=0.01, seed=0, pga=3.0)
    assert m.n_steps == 600 and m.t[-1] == pytest.approx(5.99)
    assert np.max(np.abs(m.accel)) == pytest.approx(3.0)
    assert m.accel[0] == 0.0
    assert np.array_equal(m.accel, synthetic_accelerogram(600, dt=0.01, seed=0, pga=3.0).accel)


def test_csv_round_trip(tmp_path):
    m = synthetic_accelerogram(100, seed=5)
    path = tmp_path / "gm.csv"
    save_ground_motion_csv(m, path)
    back = load_ground_motion_csv(path)
    assert np.array_equal(back.accel, m.accel)
    assert back.dt == pytest.approx(m.dt, rel=1e-12)


def test_csv_rejects_nonuniform_and_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,accel\n0,0\n0.01,1\n0.03,2\n")
    with pytest.raises(FormatError):
        load_ground_motion_csv(p)
    p.write_text("time,a\n0,0\n0.01,1\n0.02,2\n")
    with pytest.raises(FormatError):
        load_ground_motion_csv(p)
    with pytest.raises(FormatError):
        load_ground_motion_csv(tmp_path / "missing.csv")
