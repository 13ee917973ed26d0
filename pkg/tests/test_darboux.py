import numpy as np
import pytest

from positonkit import darboux as dbx
from positonkit import scattering as sct
from positonkit import wvn_example as wvn
from positonkit.errors import (
    OrthonormalityError,
    PoleEvaluationError,
    TailDivergenceError,
    ValidationError,
)
from positonkit.schrodinger import Grid, WaveField
from positonkit.tails import fit_oscillatory_tail

RHO = 2.0


def test_state_spec_validation():
    with pytest.raises(ValidationError):
        dbx.EmbeddedStateSpec(1.0, 1.0, 0.5 + 0.1j)  # not unimodular
    with pytest.raises(ValidationError):
        dbx.EmbeddedStateSpec(-1.0, 1.0, -1.0)
    st = dbx.EmbeddedStateSpec(1.0, 1.0, -1.0 + 1e-10j)
    assert st.r_at_omega == -1.0
    assert st.root_r == 1j


def test_phi_n_right_tail_and_left_branch(wvn_spec, inserted_std):
    phi = inserted_std.phi_fields[0]
    g = inserted_std.grid
    i5 = g.index_of(5.0)
    assert abs(np.real(phi.values[i5]) - 2 * np.sin(5.0)) < 1e-9
    im5 = g.index_of(-5.0)
    assert abs(np.real(phi.values[im5]) - wvn.phi_closed(RHO, -5.0)) < 1e-7


def test_phi_n_tail_amplitude_fit(wvn_spec):
    state = dbx.EmbeddedStateSpec.for_wvn_example(RHO, 1.0)
    g = Grid(0.0, 100.0, 4001)
    phi = dbx.phi_n(wvn_spec, state, g)
    win = g.x >= 10.0
    x, v = g.x[win], np.real(phi.values[win])
    basis = np.column_stack([np.sin(x), np.cos(x)])
    coef, *_ = np.linalg.lstsq(basis, v, rcond=None)
    assert abs(np.hypot(*coef) - 2.0) < 1e-3


def test_gram_single_state_matches_closed(wvn_spec, inserted_std):
    g = inserted_std.grid
    gram = inserted_std.gram
    i0 = g.index_of(0.0)
    assert abs(gram.entries[i0, 0, 0] - 2.0 / RHO) < 1e-7
    im = g.index_of(-12.0)
    assert abs(gram.entries[im, 0, 0] - wvn.big_i_closed(RHO, -12.0)) < 1e-7
    # leftward the Gram entry tracks the decaying closed form toward zero
    assert abs(gram.entries[0, 0, 0] - wvn.big_i_closed(RHO, -20.0)) < 1e-7
    assert gram.entries[0, 0, 0] < 0.05


def test_gram_monotone_and_det_bound(inserted_std):
    g11 = inserted_std.gram.entries[:, 0, 0]
    assert np.all(np.diff(g11) >= -1e-12)
    assert np.all(inserted_std.log_det >= -1e-12)
    assert np.all(np.diff(inserted_std.log_det) >= -1e-12)


def test_insert_no_states_is_identity(wvn_spec):
    grid = Grid(-5.0, 5.0, 201)
    res = dbx.insert_embedded(wvn_spec, [], grid)
    assert np.array_equal(res.q_new, res.q_seed)
    assert np.all(res.log_det == 0.0)


@pytest.mark.parametrize("alpha", [1.0, 0.5, np.sqrt(RHO / 2.0)])
def test_insert_matches_closed_form(wvn_spec, grid_std, alpha):
    state = dbx.EmbeddedStateSpec.for_wvn_example(RHO, alpha)
    res = dbx.insert_embedded(wvn_spec, [state], grid_std, check_preconditions=False)
    qc = wvn.q_plus1(RHO, alpha, grid_std.x)
    assert np.max(np.abs(res.q_new - qc)) < 1e-6


def test_insert_precondition_rejects_nonresonant(wvn_spec):
    grid = Grid(-10.0, 5.0, 601)
    bad = dbx.EmbeddedStateSpec(1.5, 1.0, -1.0)  # claims |R|=1 at a regular momentum
    with pytest.raises(ValidationError):
        dbx.insert_embedded(wvn_spec, [bad], grid)


def test_insert_duplicate_omegas_rejected(wvn_spec):
    grid = Grid(-5.0, 5.0, 201)
    s1 = dbx.EmbeddedStateSpec.for_wvn_example(RHO, 1.0)
    s2 = dbx.EmbeddedStateSpec.for_wvn_example(RHO, 0.5)
    with pytest.raises(ValidationError):
        dbx.insert_embedded(wvn_spec, [s1, s2], grid)


def test_symmetry_iff_matched_norming(wvn_spec, grid_std):
    odd_norms = []
    for alpha in (1.0, 1.2, 1.5):
        st = dbx.EmbeddedStateSpec.for_wvn_example(RHO, alpha)
        res = dbx.insert_embedded(wvn_spec, [st], grid_std, check_preconditions=False)
        q = res.q_new
        odd_norms.append(float(np.max(np.abs(q - q[::-1]))))
    assert odd_norms[0] < 1e-8          # alpha^2 = rho/2 exactly
    assert odd_norms[0] < odd_norms[1] < odd_norms[2]


def test_jacobi_identity(inserted_std):
    # phit (I+G)^{-1} phit = d/dx log det(I+G)
    g = inserted_std.grid
    alpha = inserted_std.states[0].alpha
    phi = alpha * np.real(inserted_std.phi_fields[0].values)
    gram = inserted_std.gram.entries[:, 0, 0]
    jay = phi**2 / (1.0 + gram)
    ld = inserted_std.log_det
    h = g.spacing
    d_ld = (ld[:-4] - 8 * ld[1:-3] + 8 * ld[3:-1] - ld[4:]) / (12 * h)
    assert np.max(np.abs(jay[2:-2] - d_ld)) < 1e-6


def test_eigenfunction_residual(inserted_std):
    y = inserted_std.y_fields[0]
    g = inserted_std.grid
    v = np.real(y.values)
    h = g.spacing
    # fourth-order centered second difference
    ypp = (-v[:-4] + 16 * v[1:-3] - 30 * v[2:-2] + 16 * v[3:-1] - v[4:]) / (12 * h**2)
    res = -ypp + (inserted_std.q_new[2:-2] - 1.0) * v[2:-2]
    # centered stencils are invalid across the potential's kink at x = 0
    keep = np.abs(g.x[2:-2]) > 3 * h
    assert np.max(np.abs(res[keep])) < 1e-4


def test_eigenfunction_norms(inserted_std):
    assert abs(inserted_std.eigenfunction_norms()[0] - 1.0) < 1e-6


def test_transformed_solutions_closed_match(wvn_spec, inserted_std):
    k = 1.7
    phiN, psiN = dbx.transformed_solutions(inserted_std, k)
    g = inserted_std.grid
    pos = g.x >= 0
    closed = wvn.psi_plus1_closed(RHO, 1.0, g.x[pos], k)
    assert np.max(np.abs(psiN.values[pos] - closed)) < 1e-6
    assert abs(psiN.wronskian_with(phiN, 2.3) + 2j * k) < 1e-8
    # near +infinity the transformed solution reverts to a plane wave
    i = g.index_of(19.0)
    assert abs(psiN.values[i] / np.exp(1j * k * 19.0) - 1.0) < 0.3


def test_transformed_solutions_pole_error(inserted_std):
    with pytest.raises(PoleEvaluationError):
        dbx.transformed_solutions(inserted_std, 1.0)


def test_residue_is_norming_constant(inserted_std, l2_with_tails):
    def fam(k):
        return dbx.transformed_solutions(inserted_std, k)[1]
    res = sct.residue_at(1.0, fam, delta0=1e-2)
    assert res.classification == "simple"
    norm = l2_with_tails(inserted_std.grid, res.residue.values, res.residue.derivs)
    assert abs(norm - 1.0) < 1e-4


def test_embedded_pole_condition(inserted_std):
    # Res_{k=omega} psi_+N = (i alpha^2 / R(omega)) phi_+N(., omega)
    def fam(k):
        return dbx.transformed_solutions(inserted_std, k)[1]
    res = sct.residue_at(1.0, fam, delta0=1e-2)
    st = inserted_std.states[0]
    target = (1j * st.alpha**2 / st.r_at_omega) * dbx.phi_plus_at_omega(inserted_std, 0).values
    got = res.residue.values
    scale = np.max(np.abs(target))
    assert np.max(np.abs(got - target)) < 1e-4 * scale


def test_chain_single_state_equals_direct(wvn_spec, grid_std, inserted_std):
    state = dbx.EmbeddedStateSpec.for_wvn_example(RHO, 1.0)
    chain = dbx.chain_insert(wvn_spec, [state], grid_std, check_preconditions=False)
    assert np.max(np.abs(chain.q_new - inserted_std.q_new)) < 1e-9
    assert np.max(np.abs(chain.q_new - wvn.q_plus1(RHO, 1.0, grid_std.x))) < 1e-6


def _synthetic_fields(grid, freq, center):
    x = grid.x
    env = np.exp(-((x - center) / 3.0) ** 2)
    v = env * np.sin(freq * x)
    d = env * (freq * np.cos(freq * x)) - 2 * (x - center) / 9.0 * v
    return WaveField(grid, freq, v, d)


def test_chain_matches_direct_determinant_synthetic():
    grid = Grid(-30.0, 30.0, 3001)
    f1 = _synthetic_fields(grid, 1.1, -6.0)
    f2 = _synthetic_fields(grid, 1.7, -2.0)
    alphas = np.array([0.8, 1.3])
    h = grid.spacing
    vals = [np.real(f.values) for f in (f1, f2)]
    ders = [np.real(f.derivs) for f in (f1, f2)]

    cums = {}
    for a in range(2):
        for b in range(a, 2):
            prod = vals[a] * vals[b]
            dprod = ders[a] * vals[b] + vals[a] * ders[b]
            cums[a, b] = dbx.cumulative_corrected_trapezoid(prod, dprod, h)

    # direct 2x2 determinant
    det_direct = ((1 + alphas[0] ** 2 * cums[0, 0]) * (1 + alphas[1] ** 2 * cums[1, 1])
                  - (alphas[0] * alphas[1] * cums[0, 1]) ** 2)

    # chain: scalar step then transformed second function
    u1 = 1.0 + alphas[0] ** 2 * cums[0, 0]
    y1 = -alphas[0] * vals[0] / u1
    phi2_new = vals[1] + alphas[0] * y1 * cums[0, 1]
    y1d = -alphas[0] * ders[0] / u1 + alphas[0] ** 3 * vals[0] ** 3 / u1**2
    dphi2_new = ders[1] + alphas[0] * (y1d * cums[0, 1] + y1 * vals[0] * vals[1])
    cum2 = dbx.cumulative_corrected_trapezoid(
        phi2_new**2, 2 * phi2_new * dphi2_new, h)
    det_chain = u1 * (1.0 + alphas[1] ** 2 * cum2)
    assert np.max(np.abs(det_chain - det_direct)) < 1e-8


def test_chain_empty(wvn_spec):
    grid = Grid(-5.0, 5.0, 201)
    res = dbx.chain_insert(wvn_spec, [], grid)
    assert np.array_equal(res.q_new, res.q_seed)


def test_remove_round_trip(wvn_spec, grid_std):
    state = dbx.EmbeddedStateSpec.for_wvn_example(RHO, 0.7)
    res = dbx.insert_embedded(wvn_spec, [state], grid_std, check_preconditions=False)
    rem = dbx.remove_embedded(res.q_new, res.y_fields, grid_std, omegas=[1.0])
    assert np.max(np.abs(rem.q_minus - res.q_seed)) < 1e-6


def test_remove_symmetric_case_recovers_seed(grid_std):
    alpha = np.sqrt(RHO / 2.0)
    y = WaveField(grid_std, 1.0, wvn.y_closed(RHO, alpha, grid_std.x),
                  wvn.y_x_closed(RHO, alpha, grid_std.x))
    q_sym = wvn.q_sym(RHO, grid_std.x)
    rem = dbx.remove_embedded(q_sym, [y], grid_std, omegas=[1.0])
    assert np.max(np.abs(rem.q_minus - wvn.q_seed(RHO, grid_std.x))) < 1e-6


def test_remove_nothing(wvn_spec):
    grid = Grid(-5.0, 5.0, 201)
    q = np.asarray(wvn_spec.evaluate(grid.x))
    rem = dbx.remove_embedded(q, [], grid)
    assert np.array_equal(rem.q_minus, q)


def test_remove_rejects_non_orthonormal(grid_std):
    alpha = np.sqrt(RHO / 2.0)
    y = WaveField(grid_std, 1.0, 1.1 * wvn.y_closed(RHO, alpha, grid_std.x),
                  1.1 * wvn.y_x_closed(RHO, alpha, grid_std.x))
    with pytest.raises(OrthonormalityError):
        dbx.remove_embedded(wvn.q_sym(RHO, grid_std.x), [y], grid_std, omegas=[1.0])


def test_tail_divergence_detected():
    x = np.linspace(-40.0, -20.0, 800)
    phi = np.sin(1.3 * x) * np.exp(-0.1 * (x - x[0]))   # grows outward (leftward)
    with pytest.raises(TailDivergenceError):
        fit_oscillatory_tail(x, phi, 1.3, "left")


def _soliton_pair(grid, kappa):
    x = grid.x
    th = np.tanh(kappa * x)
    sech2 = 1.0 / np.cosh(kappa * x) ** 2

    def phi_family(k):
        v = np.exp(-1j * k * x) * (k - 1j * kappa * th) / (k - 1j * kappa)
        d = (-1j * k * v
             + np.exp(-1j * k * x) * (-1j * kappa**2 * sech2) / (k - 1j * kappa))
        return WaveField(grid, k, v, d)

    def psi_family(k):
        v = np.exp(1j * k * x) * (k + 1j * kappa * th) / (k + 1j * kappa)
        d = (1j * k * v
             + np.exp(1j * k * x) * (1j * kappa**2 * sech2) / (k + 1j * kappa))
        return WaveField(grid, k, v, d)

    return phi_family, psi_family


def test_isolated_pole_preservation():
    grid = Grid(-12.0, 12.0, 1201)
    kappa = 1.0
    phi_fam, psi_fam = _soliton_pair(grid, kappa)
    # synthetic gauge data: one fabricated real "state" with its y from the 1x1 solve
    f = _synthetic_fields(grid, 1.3, 0.0)
    alpha = 0.8
    cum = dbx.cumulative_corrected_trapezoid(
        np.real(f.values) ** 2, 2 * np.real(f.values) * np.real(f.derivs), grid.spacing)
    u = 1.0 + alpha**2 * cum
    y = WaveField(grid, 1.3, -alpha * np.real(f.values) / u,
                  -alpha * np.real(f.derivs) / u + alpha**3 * np.real(f.values) ** 3 / u**2)

    class FakeResult:
        states = [dbx.EmbeddedStateSpec(1.3, alpha, -1.0)]
        y_fields = [y]
        phi_fields = [f]

    report = dbx.check_isolated_pole_preservation(phi_fam, psi_fam, FakeResult(),
                                                  (kappa, 2 * kappa))
    assert report.passed
    assert report.max_deviation < 1e-4
    bad = dbx.check_isolated_pole_preservation(phi_fam, psi_fam, FakeResult(),
                                               (kappa, 2.2 * kappa))
    assert not bad.passed
    vac = dbx.check_isolated_pole_preservation(phi_fam, psi_fam, FakeResult(), None)
    assert vac.passed and vac.vacuous


def test_transform_result_csv_and_meta(tmp_path, inserted_std):
    path = tmp_path / "out.csv"
    inserted_std.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "x,q_seed,q_new,log_det,y_1"
    meta = inserted_std.meta()
    assert meta["states"][0]["omega"] == 1.0
    assert len(meta["tail_fits"]) == 1
