import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chartbundle.stability import (
    RegularityBounds,
    det_lipschitz,
    effective_differential_error,
    nondegeneracy_lower_bound,
    perturbation_magnitude,
    perturbation_within_margin,
    recon_jacobian_lipschitz,
    simplified_det_perturbation,
    stability_check,
)


def bounds(
    enc_lip=1.0, enc_dlip=0.0, dec_lip=1.0, dec_dlip=0.0,
    recon_err=0.0, diff_err=0.0, gap=0.0, dim=2,
):
    return RegularityBounds(
        enc_lip=enc_lip, enc_dlip=enc_dlip, dec_lip=dec_lip, dec_dlip=dec_dlip,
        recon_err=recon_err, diff_err=diff_err, gap=gap, dim=dim,
    )


class TestEffectiveDifferentialError:
    def test_zero_errors(self):
        assert effective_differential_error(bounds()) == 0.0

    def test_hand_value_from_diff_err(self):
        # (1*1 + 2) * 0.1 / 0.9 = 1/3
        b = bounds(diff_err=0.1)
        assert effective_differential_error(b) == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_hand_value_from_recon_err(self):
        # L_Phi' = 1*1^2 + 1*1 = 2, so value = 2 * 0.05 = 0.1
        b = bounds(enc_dlip=1.0, dec_dlip=1.0, recon_err=0.05)
        assert recon_jacobian_lipschitz(b) == pytest.approx(2.0)
        assert effective_differential_error(b) == pytest.approx(0.1, abs=1e-15)

    def test_domain_error_at_eta_one(self):
        with pytest.raises(ValueError):
            effective_differential_error(bounds(diff_err=1.0))


class TestPerturbationMagnitude:
    def test_zero(self):
        assert perturbation_magnitude(bounds()) == 0.0

    def test_hand_value_pinned_eta_eff(self):
        # with enc_dlip = 0 only the first term survives: 1 * (1/3) * 1
        b = bounds()
        assert perturbation_magnitude(b, eta_eff=1.0 / 3.0) == pytest.approx(
            1.0 / 3.0, abs=1e-15
        )

    def test_hand_value_eps_tilde_term(self):
        # eta treated as exactly zero: Gamma = enc_dlip * (3 eps) * 1 * dec_lip
        eps = 0.02
        b = bounds(enc_dlip=1.0, recon_err=eps)
        assert perturbation_magnitude(b, eta_eff=0.0) == pytest.approx(
            3.0 * eps, abs=1e-15
        )

    def test_consistent_with_computed_eta_eff(self):
        b = bounds(enc_dlip=0.5, dec_dlip=0.3, recon_err=0.01, diff_err=0.05)
        auto = perturbation_magnitude(b)
        manual = perturbation_magnitude(
            b, eta_eff=effective_differential_error(b)
        )
        assert auto == manual


class TestDetLipschitz:
    def test_zero_when_derivatives_flat(self):
        assert det_lipschitz(bounds()) == 0.0

    def test_hand_value(self):
        # d=2: 2 * (1*1)^1 * 1 * (1*1 + 0*1) = 2
        b = bounds(dec_dlip=1.0)
        assert det_lipschitz(b) == pytest.approx(2.0, abs=1e-15)

    def test_dim_one_collapses_exponent(self):
        b = bounds(enc_lip=3.0, enc_dlip=0.7, dec_lip=2.0, dec_dlip=0.2, dim=1)
        want = 3.0 * (3.0 * 0.2 + 0.7 * 4.0)
        assert det_lipschitz(b) == pytest.approx(want, abs=1e-12)


class TestStabilityCheck:
    def test_exact_atlas_holds_for_any_positive_gap(self):
        for gap in (1e-9, 0.1, 5.0):
            chk = stability_check(bounds(gap=gap))
            assert chk.holds and chk.margin == pytest.approx(gap)

    def test_zero_gap_fails_strictly(self):
        assert not stability_check(bounds(gap=0.0)).holds

    def test_hand_value_both_branches(self):
        # Gamma = 0.1 and det-lipschitz branch = 0.01 against gap 0.3:
        # branch1 = 2 * 0.1 * (1 + 0.1) = 0.22 < 0.3
        eps = 0.01
        eta = 0.095 / 3.095  # makes 3*eta/(1-eta) + L_Phi'*eps equal 0.1
        b = bounds(dec_dlip=0.5, recon_err=eps, diff_err=eta, gap=0.3)
        assert effective_differential_error(b) == pytest.approx(0.1, abs=1e-15)
        assert perturbation_magnitude(b) == pytest.approx(0.1, abs=1e-15)
        assert det_lipschitz(b) == pytest.approx(1.0, abs=1e-15)
        chk = stability_check(b)
        assert chk.det_perturbation == pytest.approx(0.22, abs=1e-14)
        assert chk.eval_shift == pytest.approx(0.01, abs=1e-15)
        assert chk.holds
        assert chk.margin == pytest.approx(0.3 - 0.22, abs=1e-14)

    def test_eta_above_one_fails(self):
        chk = stability_check(bounds(diff_err=1.5, gap=10.0))
        assert not chk.holds and not chk.eta_ok


class TestNondegeneracyBound:
    def test_unit(self):
        for d in (1, 2, 5):
            assert nondegeneracy_lower_bound(1.0, 1.0, d) == 1.0

    def test_hand_value(self):
        assert nondegeneracy_lower_bound(0.5, 0.5, 2) == pytest.approx(0.0625)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            nondegeneracy_lower_bound(-0.1, 1.0, 2)


class TestPerturbationWithinMargin:
    def test_zero_mu(self):
        assert perturbation_within_margin(0.0, 0.2, 1.0)

    def test_boundary_is_strict(self):
        assert not perturbation_within_margin(0.1, 0.2, 1.0)

    def test_hand_value(self):
        assert perturbation_within_margin(0.05, 0.2, 1.0)

    def test_c0_positive_required(self):
        with pytest.raises(ValueError):
            perturbation_within_margin(0.1, 0.2, 0.0)


const = st.floats(min_value=0.0, max_value=3.0, allow_nan=False)
small = st.floats(min_value=0.0, max_value=0.5, allow_nan=False)
bump = st.floats(min_value=1e-6, max_value=0.5, allow_nan=False)
FIELDS = ("recon_err", "diff_err", "enc_lip", "dec_lip", "enc_dlip", "dec_dlip")


@settings(max_examples=1000, deadline=None)
@given(
    enc_lip=const, dec_lip=const, enc_dlip=const, dec_dlip=const,
    recon_err=small, diff_err=small, delta=bump,
    field=st.sampled_from(FIELDS),
)
def test_monotonicity_in_every_argument(
    enc_lip, dec_lip, enc_dlip, dec_dlip, recon_err, diff_err, delta, field
):
    b = bounds(
        enc_lip=enc_lip, dec_lip=dec_lip, enc_dlip=enc_dlip, dec_dlip=dec_dlip,
        recon_err=recon_err, diff_err=diff_err, gap=1.0,
    )
    kwargs = {f: getattr(b, f) for f in
              ("enc_lip", "dec_lip", "enc_dlip", "dec_dlip", "recon_err", "diff_err")}
    kwargs[field] = kwargs[field] + delta
    b2 = bounds(gap=1.0, **kwargs)
    assert effective_differential_error(b2) >= effective_differential_error(b)
    assert perturbation_magnitude(b2) >= perturbation_magnitude(b)
    assert det_lipschitz(b2) >= det_lipschitz(b)
    assert stability_check(b2).det_perturbation >= stability_check(b).det_perturbation


@settings(max_examples=300, deadline=None)
@given(
    enc_lip=st.floats(min_value=0.5, max_value=1.5),
    dec_lip=st.floats(min_value=0.5, max_value=1.5),
    dec_dlip=st.floats(min_value=0.0, max_value=1.5),
    recon_err=st.floats(min_value=1e-7, max_value=5e-4),
    diff_err=st.floats(min_value=1e-7, max_value=5e-4),
)
def test_leading_order_agreement_small_errors(
    enc_lip, dec_lip, dec_dlip, recon_err, diff_err
):
    # the printed leading-order formula drops the off-manifold inflation of
    # eps, which multiplies the enc_dlip term; restrict to enc_dlip = 0 where
    # the comparison is a genuine small-error expansion
    b = bounds(
        enc_lip=enc_lip, dec_lip=dec_lip, enc_dlip=0.0, dec_dlip=dec_dlip,
        recon_err=recon_err, diff_err=diff_err, gap=1.0,
    )
    exact = stability_check(b).det_perturbation
    approx = simplified_det_perturbation(b)
    if approx > 0:
        assert abs(exact - approx) / approx < 0.01
