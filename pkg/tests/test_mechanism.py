import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from csbp_height.errors import ConfigurationError, DomainError
from csbp_height.mechanism import (
    BranchingMechanism,
    JumpMeasure,
    TruncationSchedule,
    default_schedule,
    mechanism_from_json,
    mechanism_hash,
    mechanism_to_json,
    offspring_law,
    psi,
    psi_delta,
    psi_delta_prime,
    psi_inverse,
    psi_prime,
    u_flow,
)

# Values below were computed once with mpmath quadrature at 40 digits and frozen.
STABLE_JUMP_INTEGRAL = {2.0: 6.6843420656826680064, 1e-3: 7.4733216218639049324e-05, 100.0: 2363.2718012073547031}
TEMPERED_JUMP_INTEGRAL = {2.0: 2.8268332905284430495, 1e-3: 8.8607927632668694815e-07, 100.0: 2041.9553117823505851}
STABLE_TRUNC_01_LAM10 = 46.163598197409957859
STABLE_CUTOFF5_TRUNC_01_LAM10 = 37.278954766810793465
STABLE_PSI_PRIME_2 = 9.0132565492620010048
TEMPERED_MASS_01 = 16.8078014631359345
TEMPERED_MOMENT_01 = 3.4017693366916152574
# (1/N) int (Nz)^k/k! e^{-Nz} mu(dz) over [10^(-1/3), cutoff], N = 10
RATES_CUTOFF5 = {2: 0.0064812722512164281413, 3: 0.012028990426261518544, 10: 0.011385720794574135834}
RATES_TEMPERED = {2: 0.0037293600713657697416, 3: 0.0068224173901187712744, 10: 0.0048660578671867810118}


def rel(a, b):
    return abs(a - b) / abs(b)


class TestPsiExamples:
    def test_polynomial_case(self):
        assert psi(BranchingMechanism(1.0, 1.0), 2.0) == 6.0

    @pytest.mark.parametrize("variant", ["none", "atoms", "power_law", "tempered"])
    def test_zero_at_origin(self, variant, feller, atom_mech, stable_mech, tempered_mech):
        m = {"none": feller, "atoms": atom_mech, "power_law": stable_mech, "tempered": tempered_mech}[variant]
        assert psi(m, 0.0) == 0.0

    def test_single_atom(self, atom_mech):
        assert psi(atom_mech, 1.0) == pytest.approx(1 + math.exp(-1), rel=1e-15)
        assert psi(atom_mech, 1.0) == pytest.approx(1.367879, abs=1e-6)

    @pytest.mark.parametrize("lam", sorted(STABLE_JUMP_INTEGRAL))
    def test_stable_against_oracle(self, stable_mech, lam):
        assert rel(psi(stable_mech, lam) - lam * lam, STABLE_JUMP_INTEGRAL[lam]) <= 1e-10

    @pytest.mark.parametrize("lam", sorted(TEMPERED_JUMP_INTEGRAL))
    def test_tempered_against_oracle(self, tempered_mech, lam):
        assert rel(tempered_mech.mu.laplace_integral(lam), TEMPERED_JUMP_INTEGRAL[lam]) <= 1e-10

    def test_stable_closed_form(self, stable_mech):
        for lam in np.geomspace(1e-4, 1e4, 17):
            assert rel(stable_mech.mu.laplace_integral(lam), math.gamma(-1.5) * lam**1.5) <= 1e-10

    def test_truncated_and_cutoff_integrals(self, stable_mech):
        assert rel(stable_mech.mu.laplace_integral(10.0, 0.1), STABLE_TRUNC_01_LAM10) <= 1e-10
        mu = JumpMeasure.power_law(1.0, 1.5, cutoff=5.0)
        assert rel(mu.laplace_integral(10.0, 0.1), STABLE_CUTOFF5_TRUNC_01_LAM10) <= 1e-10

    def test_tempered_mass_and_moment(self, tempered_mech):
        assert rel(tempered_mech.mu.mass(0.1), TEMPERED_MASS_01) <= 1e-10
        assert rel(tempered_mech.mu.first_moment(0.1), TEMPERED_MOMENT_01) <= 1e-10

    def test_negative_lambda(self, feller):
        with pytest.raises(DomainError):
            psi(feller, -1.0)


class TestPsiDelta:
    def test_no_jumps(self):
        m = BranchingMechanism(3.0, 2.0)
        assert psi_delta(m, 0.3, 1.5) == 2.0 * 1.5**2

    def test_atom_below_cutoff_removed(self, atom_mech):
        assert psi_delta(atom_mech, 2.0, 3.0) == 9.0

    def test_atom_kept_without_diffusion(self):
        m = BranchingMechanism(0.0, 0.0, JumpMeasure.atomic([(1.0, 1.0)]), unchecked=True)
        assert psi_delta(m, 0.5, 1.0) == pytest.approx(math.exp(-1), rel=1e-15)

    def test_delta_must_be_positive(self, feller):
        with pytest.raises(DomainError):
            psi_delta(feller, 0.0, 1.0)


class TestDerivatives:
    def test_feller(self, feller):
        assert psi_prime(feller, 3.0) == 6.0
        assert psi_prime(feller, 0.0) == 0.0

    @pytest.mark.parametrize("lam", [0.1, 1.0, 7.0])
    def test_atom(self, lam):
        m = BranchingMechanism(0.0, 0.0, JumpMeasure.atomic([(1.0, 1.0)]), unchecked=True)
        assert psi_delta_prime(m, 0.5, lam) == pytest.approx(1 - math.exp(-lam), rel=1e-14)

    def test_stable_against_oracle(self, stable_mech):
        assert rel(psi_prime(stable_mech, 2.0), STABLE_PSI_PRIME_2) <= 1e-10

    @pytest.mark.parametrize("mech_name", ["stable_mech", "tempered_mech", "atom_mech"])
    def test_matches_finite_difference(self, mech_name, request):
        m = request.getfixturevalue(mech_name)
        for lam in [0.5, 3.0, 40.0]:
            h = 1e-5 * lam
            fd = (psi(m, lam + h) - psi(m, lam - h)) / (2 * h)
            assert rel(psi_prime(m, lam), fd) < 1e-7


class TestInverse:
    def test_feller(self, feller):
        assert psi_inverse(feller, 4.0) == pytest.approx(2.0, rel=1e-14)

    def test_zero(self, feller):
        assert psi_inverse(BranchingMechanism(0.5, 1.0), 0.0) == 0.0
        assert psi_inverse(feller, 0.0) == 0.0

    def test_round_trip_atom(self, atom_mech):
        assert psi_inverse(atom_mech, psi(atom_mech, 1.5)) == pytest.approx(1.5, abs=1e-8)

    def test_negative_drift_takes_increasing_branch(self):
        m = BranchingMechanism(-2.0, 1.0)
        # psi = l^2 - 2l has roots 0 and 2; the increasing branch gives 2
        assert psi_inverse(m, 0.0) == pytest.approx(2.0, rel=1e-14)
        with pytest.raises(DomainError):
            psi_inverse(m, -1.5)

    def test_truncated_inverse(self, stable_mech):
        sch = default_schedule(stable_mech)
        for N in [10, 1000]:
            d = sch.delta(N)
            assert rel(psi_inverse(stable_mech, psi_delta(stable_mech, d, N), delta=d), N) <= 1e-8


class TestUFlow:
    def test_initial_condition(self, stable_mech):
        assert u_flow(stable_mech, 2.5, 0.0) == 2.5

    def test_feller_closed_form(self, feller):
        assert u_flow(feller, 1.0, 1.0) == pytest.approx(0.5, abs=1e-8)
        ts = np.array([0.0, 0.1, 1.0, 10.0])
        for lam in [0.1, 1.0, 10.0]:
            np.testing.assert_allclose(u_flow(feller, lam, ts), lam / (1 + lam * ts), atol=1e-8)

    def test_zero_is_fixed(self, stable_mech):
        assert u_flow(stable_mech, 0.0, 5.0) == 0.0

    def test_nonincreasing(self, stable_mech):
        u = u_flow(stable_mech, 3.0, np.linspace(0, 2, 9))
        assert np.all(np.diff(u) <= 0) and np.all(u >= 0)

    def test_bad_time(self, feller):
        with pytest.raises(DomainError):
            u_flow(feller, 1.0, -1.0)


class TestOffspring:
    def test_no_jumps_is_binary_split(self, feller):
        law = offspring_law(feller, default_schedule(feller), 50)
        np.testing.assert_allclose(law.pmf[:3], [0.5, 0.0, 0.5], rtol=1e-15)
        assert law.total_rate == pytest.approx(100.0)

    @pytest.mark.parametrize("mu_name", ["atom_mech", "tempered_mech"])
    @pytest.mark.parametrize("N", [10, 100, 1000])
    def test_pmf_normalized(self, mu_name, N, request):
        m = request.getfixturevalue(mu_name)
        law = offspring_law(m, default_schedule(m), N)
        assert abs(law.pmf.sum() - 1) <= 1e-9
        assert law.pmf[1] == 0.0
        assert law.residual < 1e-9

    def test_rate_zero_two_ways(self, stable_mech, tempered_mech, atom_mech):
        for m in (stable_mech, tempered_mech, atom_mech):
            sch = default_schedule(m)
            for N in [100, 1000, 10000]:
                d = sch.delta(N)
                direct = psi_delta(m, d, N) / N
                expanded = m.c * N + m.mu.first_moment(d) - m.mu.loss_integral(N, d) / N
                assert rel(expanded, direct) <= 1e-9

    def test_rates_against_oracle(self):
        sch = TruncationSchedule(1.0 / 3.0)
        for mu, ref in [(JumpMeasure.power_law(1.0, 1.5, cutoff=5.0), RATES_CUTOFF5), (JumpMeasure.tempered(1.0, 1.5, 1.0), RATES_TEMPERED)]:
            r = mu.poisson_rates(10, sch.delta(10), list(ref))
            for got, k in zip(r, ref):
                assert rel(got, ref[k]) <= 1e-10

    def test_power_law_tail_needs_cutoff(self, stable_mech):
        with pytest.raises(ConfigurationError) as exc:
            offspring_law(stable_mech, default_schedule(stable_mech), 100)
        assert "offspring_cutoff" in exc.value.violations

    def test_mean_offspring_is_one_when_critical(self):
        # b = 0: psi_delta'(N) and psi_delta(N)/N balance so that sum l p_l = 1 + (stuff lost to delta)
        m = BranchingMechanism(0.0, 1.0, JumpMeasure.atomic([(0.5, 1.0)]))
        law = offspring_law(m, default_schedule(m), 100)
        assert law.mean() == pytest.approx(1.0, abs=1e-9)


class TestValidation:
    def test_c_must_be_positive(self):
        with pytest.raises(ConfigurationError) as exc:
            BranchingMechanism(0.0, 0.0)
        assert "H" in exc.value.violations
        BranchingMechanism(0.0, 0.0, unchecked=True)

    def test_negative_c_always_rejected(self):
        with pytest.raises(ConfigurationError):
            BranchingMechanism(0.0, -1.0, unchecked=True)

    @pytest.mark.parametrize("alpha", [1.0, 2.0, 0.5, 2.5])
    def test_alpha_range(self, alpha):
        with pytest.raises(ConfigurationError):
            JumpMeasure.power_law(1.0, alpha)

    def test_assumption_a(self, stable_mech):
        good = default_schedule(stable_mech)
        vals = good.assumption_a(stable_mech, [10, 100, 1000])
        assert vals[0] > vals[1] > vals[2]
        with pytest.raises(ConfigurationError) as exc:
            TruncationSchedule(1.0).assumption_a(stable_mech, [10, 100, 1000])
        assert exc.value.violations == ["A"]

    def test_default_theta(self, stable_mech, feller):
        assert default_schedule(stable_mech).theta == pytest.approx(1 / 3)
        assert default_schedule(feller).theta == 0.5


class TestSerialization:
    @pytest.mark.parametrize(
        "mu",
        [
            JumpMeasure.none(),
            JumpMeasure.atomic([(0.1, 2.0), (3.0, 0.25)]),
            JumpMeasure.power_law(0.7, 1.3, cutoff=4.0),
            JumpMeasure.power_law(0.7, 1.9),
            JumpMeasure.tempered(2.0, 1.5, 0.3),
        ],
    )
    def test_round_trip_bit_exact(self, mu):
        m = BranchingMechanism(-0.1, 1.0 / 3.0, mu)
        sch = TruncationSchedule(0.123456789)
        text = mechanism_to_json(m, sch)
        m2, sch2 = mechanism_from_json(text)
        assert m2 == m and sch2 == sch
        assert mechanism_to_json(m2, sch2) == text
        assert mechanism_hash(m2, sch2) == mechanism_hash(m, sch)

    def test_theta_defaults(self):
        m, sch = mechanism_from_json(json.dumps({"b": 0, "c": 1, "mu": {"variant": "power_law", "C": 1, "alpha": 1.25}}))
        assert sch.theta == pytest.approx(0.4)

    def test_malformed(self):
        with pytest.raises(ConfigurationError):
            mechanism_from_json('{"b": 0}')
        with pytest.raises(ConfigurationError):
            mechanism_from_json("not json")


mechs = st.builds(
    lambda b, c, C, a, kind: BranchingMechanism(
        b, c, {"pl": JumpMeasure.power_law(C, a), "tm": JumpMeasure.tempered(C, a, 1.0), "at": JumpMeasure.atomic([(C, a)])}[kind]
    ),
    st.floats(-2, 2),
    st.floats(0.05, 3),
    st.floats(0.1, 3),
    st.floats(1.05, 1.95),
    st.sampled_from(["pl", "tm", "at"]),
)


@given(mechs, st.floats(1e-3, 1e3))
def test_convexity(m, lam):
    h = 1e-3 * lam
    second = psi(m, lam + h) - 2 * psi(m, lam) + psi(m, lam - h)
    assert second >= -1e-8 * max(1.0, abs(psi(m, lam)))


@given(mechs, st.floats(0, 1e3), st.floats(1e-3, 10))
def test_truncation_drops_mass(m, lam, delta):
    assert psi_delta(m, delta, lam) <= psi(m, lam) - m.b * lam + 1e-9 * max(1.0, psi(m, lam))


@given(mechs, st.floats(0.1, 1e3))
def test_inverse_round_trip(m, lam):
    f0 = psi_inverse(m, max(psi(m, 0.0), 0.0))  # bottom of the increasing branch
    if lam <= f0:
        return
    assert psi_inverse(m, psi(m, lam)) == pytest.approx(lam, rel=1e-8)


@given(st.floats(0.05, 3), st.floats(0.1, 5), st.floats(0, 2), st.floats(0, 2))
def test_semigroup(c, lam, t, s):
    # closed-form psi keeps each example cheap
    m = BranchingMechanism(0.0, c, JumpMeasure.power_law(1.0, 1.5))
    lhs = u_flow(m, lam, t + s)
    rhs = u_flow(m, u_flow(m, lam, s), t)
    assert lhs == pytest.approx(rhs, abs=1e-6)


def test_psi_ratio_approach(stable_mech):
    sch = default_schedule(stable_mech)
    r = [psi_delta(stable_mech, sch.delta(N), N) / N**2 for N in [10, 100, 1000, 10000]]
    assert all(b < a for a, b in zip(r, r[1:]))
    assert 0.98 <= r[-1] <= 1.02
