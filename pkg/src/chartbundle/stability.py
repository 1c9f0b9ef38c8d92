"""Calculators for the explicit sign-cocycle stability bounds.

These evaluate the sufficient conditions under which the determinant signs
of learned transition Jacobians are provably trustworthy, as functions of
user-supplied regularity constants. They are calculators, not estimators:
measuring true Lipschitz constants of trained networks is out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class RegularityBounds:
    """Uniform regularity constants of an approximate atlas.

    enc_lip / dec_lip bound the encoder / decoder Jacobian operator norms;
    enc_dlip / dec_dlip are the Lipschitz constants of those Jacobians.
    recon_err and diff_err are the C^0 and (tangent-restricted) C^1
    reconstruction errors; gap is the non-degeneracy gap (min |det| of the
    transition Jacobians); dim is the latent dimension.
    """

    enc_lip: float  # L_E
    enc_dlip: float  # L_E'
    dec_lip: float  # L_D
    dec_dlip: float  # L_D'
    recon_err: float  # eps
    diff_err: float  # eta, must be < 1 for the bounds to apply
    gap: float = 0.0
    dim: int = 2

    def __post_init__(self) -> None:
        for name in ("enc_lip", "enc_dlip", "dec_lip", "dec_dlip",
                     "recon_err", "diff_err"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def recon_jacobian_lipschitz(b: RegularityBounds) -> float:
    """Lipschitz constant of the reconstruction-map Jacobian p -> d(D o E)_p,
    from the product rule: dec_dlip * enc_lip^2 + dec_lip * enc_dlip."""
    return b.dec_dlip * b.enc_lip**2 + b.dec_lip * b.enc_dlip


def effective_differential_error(b: RegularityBounds) -> float:
    """Differential reconstruction error after accounting for normal-direction
    amplification and off-manifold evaluation:

        (enc_lip*dec_lip + 2) * eta / (1 - eta)  +  L_Phi' * eps.
    """
    if b.diff_err >= 1.0:
        raise ValueError(
            f"differential error must be < 1, got {b.diff_err}"
        )
    amp = (b.enc_lip * b.dec_lip + 2.0) * b.diff_err / (1.0 - b.diff_err)
    return amp + recon_jacobian_lipschitz(b) * b.recon_err


def perturbation_magnitude(
    b: RegularityBounds, eta_eff: float | None = None
) -> float:
    """Operator-norm bound on the difference between the direct and composed
    transition Jacobians:

        Gamma = L_E * eta_eff * L_D + L_E' * eps_tilde * (1 + eta_eff) * L_D,

    with eps_tilde = (L_E*L_D + 2) * eps the off-manifold reconstruction
    bound. eta_eff defaults to effective_differential_error(b); passing it
    explicitly supports evaluating the formula at a pinned value.
    """
    if eta_eff is None:
        eta_eff = effective_differential_error(b)
    eps_tilde = (b.enc_lip * b.dec_lip + 2.0) * b.recon_err
    return (
        b.enc_lip * eta_eff * b.dec_lip
        + b.enc_dlip * eps_tilde * (1.0 + eta_eff) * b.dec_lip
    )


def det_lipschitz(b: RegularityBounds) -> float:
    """Lipschitz constant of the determinant of the transition Jacobian as a
    function of the base point:

        d * (L_E*L_D)^(d-1) * L_E * (L_E*L_D' + L_E'*L_D^2).
    """
    return (
        b.dim
        * (b.enc_lip * b.dec_lip) ** (b.dim - 1)
        * b.enc_lip
        * (b.enc_lip * b.dec_dlip + b.enc_dlip * b.dec_lip**2)
    )


@dataclass
class StabilityCheck:
    holds: bool
    det_perturbation: float  # d * Gamma * (L_E*L_D + Gamma)^(d-1)
    eval_shift: float  # L_det * eps
    margin: float  # gap - max(branches)
    eta_ok: bool


def stability_check(b: RegularityBounds) -> StabilityCheck:
    """Sufficient condition for the sign cocycle to satisfy the Cech cocycle
    condition: eta < 1 and max(branches) strictly below the gap. Branch one
    bounds the determinant perturbation from composing transitions; branch
    two bounds the drift from moving the evaluation point by eps."""
    eta_ok = b.diff_err < 1.0
    if eta_ok:
        gamma = perturbation_magnitude(b)
        branch1 = (
            b.dim * gamma * (b.enc_lip * b.dec_lip + gamma) ** (b.dim - 1)
        )
    else:
        branch1 = float("inf")
    branch2 = det_lipschitz(b) * b.recon_err
    worst = max(branch1, branch2)
    return StabilityCheck(
        holds=bool(eta_ok and worst < b.gap),
        det_perturbation=branch1,
        eval_shift=branch2,
        margin=b.gap - worst,
        eta_ok=eta_ok,
    )


def simplified_det_perturbation(b: RegularityBounds) -> float:
    """Leading-order form of the determinant-perturbation branch for small
    eps and eta (taking eps_tilde ~ eps):

        d * L_E^(d-1) * L_D^d * [(L_E*L_D + 2)*L_E*eta + (L_Phi'*L_E + L_E')*eps].
    """
    lphi = recon_jacobian_lipschitz(b)
    return (
        b.dim
        * b.enc_lip ** (b.dim - 1)
        * b.dec_lip**b.dim
        * (
            (b.enc_lip * b.dec_lip + 2.0) * b.enc_lip * b.diff_err
            + (lphi * b.enc_lip + b.enc_dlip) * b.recon_err
        )
    )


def nondegeneracy_lower_bound(s_enc: float, s_dec: float, dim: int) -> float:
    """Lower bound (s_enc * s_dec)^dim on |det| of any transition Jacobian of
    an exact atlas whose encoder/decoder differentials have smallest singular
    values at least s_enc / s_dec."""
    if s_enc < 0 or s_dec < 0:
        raise ValueError("singular value bounds must be nonnegative")
    return (s_enc * s_dec) ** dim


def perturbation_within_margin(mu: float, gap_exact: float, c0: float) -> bool:
    """True when a C^1 perturbation of size mu of an exact atlas stays within
    the margin gap_exact / (2 * c0), so the learned sign cocycle inherits the
    exact atlas's cohomology class. c0 is problem-dependent and user-supplied
    (it depends on chart count and second derivatives and has no default)."""
    if c0 <= 0:
        raise ValueError(f"c0 must be > 0, got {c0}")
    return mu < gap_exact / (2.0 * c0)
