"""Characteristic foliation and null-frame diagnostics for simulated flows.

The characteristic function u is transported as a level-set field solving

    du/dt + v . grad(u) - c |grad(u)| = 0,

so its level curves are the discrete rarefaction fronts.  From u we build
the front-adapted frame (unit normal, unit tangent, foliation densities
kappa = 1/|grad u| and mu = c*kappa, expansion chi, torsions zeta and eta)
and, from Cartesian stencils alone, the transverse-speed gradients of the
fixed second frame together with their commutation and propagation
residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .euler2d import FlowField, Grid, _d1, _d2

__all__ = [
    "Foliation",
    "SecondFrame",
    "DeformationComponents",
    "DegenerateFoliationError",
    "evolve_u",
    "frame_fields",
    "second_frame",
    "advective_derivative",
    "semi_lagrangian",
    "commutation_residual_y",
    "commutation_residual_z",
    "deformation_components",
    "structure_residuals",
    "sign_monitors",
    "band_mask",
    "kslash",
    "chibar",
    "trace_characteristics",
]

GRAD_FLOOR = 1e-8


class DegenerateFoliationError(RuntimeError):
    """The level-set gradient collapsed inside the tracked band."""


@dataclass
class Foliation:
    """Front-adapted frame data derived from u on one time slice."""

    time: float
    grid: Grid
    u: np.ndarray
    kappa: np.ndarray
    mu: np.ndarray
    that1: np.ndarray
    that2: np.ndarray
    xhat1: np.ndarray
    xhat2: np.ndarray
    chi: np.ndarray
    zeta: np.ndarray
    eta: np.ndarray
    theta: np.ndarray


@dataclass
class SecondFrame:
    """Cartesian-frame transverse gradients of the flow at one time.

    y  = d(v1+c)/dx2,            yt = y / t
    z  = 1 - t * d(v1+c)/dx1,    zt = z / t
    chi = d(v2)/dx2,             eta = -t * d(v2)/dx1
    """

    time: float
    y: np.ndarray
    z: np.ndarray
    yt: np.ndarray
    zt: np.ndarray
    chi: np.ndarray
    eta: np.ndarray


@dataclass
class DeformationComponents:
    """Null components of the deformation tensor of one commutator field."""

    commutator: str  # "X" or "T"
    pi_ll: np.ndarray
    pi_lbarlbar: np.ndarray
    pi_llbar: np.ndarray
    pi_lx: np.ndarray
    pi_lbarx: np.ndarray
    pi_xx: np.ndarray


def band_mask(u: np.ndarray, u_lo: float, u_hi: float) -> np.ndarray:
    return (u >= u_lo) & (u <= u_hi)


def _minmod(a, b):
    return np.where(a * b > 0.0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _one_sided(u, dx, axis, grid_periodic):
    """Second-order ENO one-sided differences (backward, forward)."""
    if grid_periodic:
        up1 = np.roll(u, -1, axis=axis)
        um1 = np.roll(u, 1, axis=axis)
        up2 = np.roll(u, -2, axis=axis)
        um2 = np.roll(u, 2, axis=axis)
    else:
        # linear extrapolation ghosts preserve linear profiles exactly
        pad = [(0, 0)] * u.ndim
        pad[axis] = (2, 2)
        up = np.pad(u, pad, mode="reflect", reflect_type="odd")
        sl = [slice(None)] * u.ndim

        def shifted(k):
            s = list(sl)
            s[axis] = slice(2 + k, 2 + k + u.shape[axis])
            return up[tuple(s)]

        up1, um1, up2, um2 = shifted(1), shifted(-1), shifted(2), shifted(-2)
    d2c = (up1 - 2.0 * u + um1) / dx ** 2
    d2m = (u - 2.0 * um1 + um2) / dx ** 2
    d2p = (up2 - 2.0 * up1 + u) / dx ** 2
    back = (u - um1) / dx + 0.5 * dx * _minmod(d2m, d2c)
    fwd = (up1 - u) / dx - 0.5 * dx * _minmod(d2c, d2p)
    return back, fwd


def _hamiltonian(u, v1, v2, c, grid):
    """Godunov upwind discretization of v.grad(u) - c|grad(u)|."""
    bx, fx = _one_sided(u, grid.dx1, 0, grid_periodic=False)
    by, fy = _one_sided(u, grid.dx2, 1, grid_periodic=True)
    adv = np.maximum(v1, 0.0) * bx + np.minimum(v1, 0.0) * fx \
        + np.maximum(v2, 0.0) * by + np.minimum(v2, 0.0) * fy
    # contracting-front branch of the Godunov Hamiltonian (speed -c < 0)
    grad_minus = np.sqrt(np.minimum(bx, 0.0) ** 2 + np.maximum(fx, 0.0) ** 2
                         + np.minimum(by, 0.0) ** 2 + np.maximum(fy, 0.0) ** 2)
    return adv - c * grad_minus


def evolve_u(snapshots: Sequence[FlowField], u_init: np.ndarray,
             cfl: float = 0.45) -> List[np.ndarray]:
    """Transport the characteristic function through the snapshot sequence.

    Between consecutive snapshots the velocity and sound-speed fields are
    interpolated linearly in time and u is advanced with forward-Euler
    substeps at the given CFL number.  Returns u at every snapshot time.
    """
    if len(snapshots) < 1:
        raise ValueError("need at least one snapshot")
    grid = snapshots[0].grid
    if u_init.shape != (grid.n1, grid.n2):
        raise ValueError("u_init shape does not match the grid")
    out = [u_init.copy()]
    u = u_init.copy()
    for k in range(len(snapshots) - 1):
        s0, s1 = snapshots[k], snapshots[k + 1]
        t0, t1 = s0.time, s1.time
        v10, v20, c0 = s0.v1, s0.v2, s0.c
        v11, v21, c1 = s1.v1, s1.v2, s1.c
        speed = max(np.max(np.abs(v10) + c0), np.max(np.abs(v11) + c1))
        speed2 = max(np.max(np.abs(v20) + c0), np.max(np.abs(v21) + c1))
        dt_max = cfl / (speed / grid.dx1 + speed2 / grid.dx2)
        nsub = max(1, int(math.ceil((t1 - t0) / dt_max)))
        dt = (t1 - t0) / nsub
        for m in range(nsub):
            w = (m + 0.5) / nsub
            v1 = (1.0 - w) * v10 + w * v11
            v2 = (1.0 - w) * v20 + w * v21
            c = (1.0 - w) * c0 + w * c1
            u = u - dt * _hamiltonian(u, v1, v2, c, grid)
        out.append(u.copy())
    return out


def frame_fields(field: FlowField, u: np.ndarray, check_band: Optional[Tuple[float, float]] = None) -> Foliation:
    """Frame quantities on one slice from the flow field and u.

    kappa = 1/|grad u|, mu = c*kappa, unit normal along grad(u), unit
    tangent its rotation, and the expansion/torsion scalars from centered
    tangential stencils.
    """
    grid = field.grid
    du1 = _d1(u, grid.dx1)
    du2 = _d2(u, grid.dx2)
    gnorm = np.hypot(du1, du2)
    if check_band is not None:
        m = band_mask(u, *check_band)
        if np.any(gnorm[m] < GRAD_FLOOR):
            raise DegenerateFoliationError(
                f"|grad u| < {GRAD_FLOOR} inside the tracked band at t={field.time}")
    safe = np.maximum(gnorm, GRAD_FLOOR)
    kappa = 1.0 / safe
    that1, that2 = du1 / safe, du2 / safe
    xhat1, xhat2 = that2, -that1
    c = field.c
    mu = c * kappa

    def xhat_d(a):
        return xhat1 * _d1(a, grid.dx1) + xhat2 * _d2(a, grid.dx2)

    # psi_i = -v^i, so Xhat(psi_i) = -Xhat(v^i)
    xv1, xv2 = xhat_d(field.v1), xhat_d(field.v2)
    xc = xhat_d(c)
    xx1, xx2 = xhat_d(xhat1), xhat_d(xhat2)
    chi = (xhat1 * xv1 + xhat2 * xv2) - c * xhat2 * xx1 + c * xhat1 * xx2
    theta = xhat2 * xx1 - xhat1 * xx2
    zeta = -kappa * (-(that1 * xv1 + that2 * xv2) + xc)
    eta = zeta + xhat_d(mu)
    return Foliation(field.time, grid, u.copy(), kappa, mu, that1, that2,
                     xhat1, xhat2, chi, zeta, eta, theta)


def second_frame(field: FlowField) -> SecondFrame:
    """Transverse gradients of the maximal characteristic speed and of v2."""
    t = field.time
    if t <= 0.0:
        raise ValueError("second frame requires t > 0")
    grid = field.grid
    speed = field.v1 + field.c
    y = _d2(speed, grid.dx2)
    z = 1.0 - t * _d1(speed, grid.dx1)
    chi = _d2(field.v2, grid.dx2)
    eta = -t * _d1(field.v2, grid.dx1)
    return SecondFrame(t, y, z, y / t, z / t, chi, eta)


def advective_derivative(f0: np.ndarray, f1: np.ndarray, a1, a2, t0: float, t1: float,
                         grid: Grid) -> np.ndarray:
    """d/dt + a1 d1 + a2 d2 of a field pair, centered at the midpoint time."""
    dt = t1 - t0
    fm = 0.5 * (f0 + f1)
    return (f1 - f0) / dt + a1 * _d1(fm, grid.dx1) + a2 * _d2(fm, grid.dx2)


def semi_lagrangian(f0: np.ndarray, f1: np.ndarray, a1, a2, t0: float, t1: float,
                    grid: Grid) -> Tuple[np.ndarray, np.ndarray]:
    """Derivative of f along the flow of (a1, a2) by two-time differencing.

    Follows the forward integral curve from each cell center and reads f1
    there by bilinear interpolation (periodic in x2).  Returns (derivative,
    valid mask); cells whose curve leaves the x1 range are masked out.
    """
    dt = t1 - t0
    x1 = grid.x1[:, None] + np.broadcast_to(a1, f0.shape) * dt
    x2 = grid.x2[None, :] + np.broadcast_to(a2, f0.shape) * dt

    s = (x1 - grid.x1[0]) / grid.dx1
    i0 = np.floor(s).astype(int)
    fi = s - i0
    valid = (i0 >= 0) & (i0 <= grid.n1 - 2)
    i0c = np.clip(i0, 0, grid.n1 - 2)

    r = (x2 / grid.dx2) - 0.5
    j0 = np.floor(r).astype(int)
    fj = r - j0
    j0 = np.mod(j0, grid.n2)
    j1 = np.mod(j0 + 1, grid.n2)

    f_up = (f1[i0c, j0] * (1 - fi) * (1 - fj) + f1[i0c + 1, j0] * fi * (1 - fj)
            + f1[i0c, j1] * (1 - fi) * fj + f1[i0c + 1, j1] * fi * fj)
    return (f_up - f0) / dt, valid


def _mid_fields(s0: FlowField, s1: FlowField):
    wbar0, w0, psi20 = s0.invariants()
    wbar1, w1, psi21 = s1.invariants()
    return {
        "t": 0.5 * (s0.time + s1.time),
        "c": 0.5 * (s0.c + s1.c),
        "v1": 0.5 * (s0.v1 + s1.v1),
        "v2": 0.5 * (s0.v2 + s1.v2),
        "wbar": (wbar0, wbar1),
        "psi2": (psi20, psi21),
    }


def commutation_residual_y(s0: FlowField, s1: FlowField, use_euler_rhs: bool = True) -> np.ndarray:
    """Residual of the transverse commutation identity for y/t.

    yt * T(wbar) = L(X(wbar)) - X(L(wbar)) + chi * X(wbar), with the frame
    operators T = -t d1, X = d2 and L the advective derivative along
    (v1+c, v2).  With use_euler_rhs the inner L(wbar) is replaced by its
    Euler-equation value c*X(psi2)/2, which needs no time differencing.
    """
    grid = s0.grid
    mid = _mid_fields(s0, s1)
    t, c, v1, v2 = mid["t"], mid["c"], mid["v1"], mid["v2"]
    wbar0, wbar1 = mid["wbar"]
    psi20, psi21 = mid["psi2"]
    wbar_m = 0.5 * (wbar0 + wbar1)
    psi2_m = 0.5 * (psi20 + psi21)
    speed = v1 + c

    xwbar0 = _d2(wbar0, grid.dx2)
    xwbar1 = _d2(wbar1, grid.dx2)
    l_xwbar = advective_derivative(xwbar0, xwbar1, speed, v2, s0.time, s1.time, grid)

    if use_euler_rhs:
        x_lwbar = _d2(0.5 * c * _d2(psi2_m, grid.dx2), grid.dx2)
    else:
        lwbar0 = advective_derivative(wbar0, wbar1, speed, v2, s0.time, s1.time, grid)
        x_lwbar = _d2(lwbar0, grid.dx2)

    frame = second_frame_mid(s0, s1)
    xwbar_m = 0.5 * (xwbar0 + xwbar1)
    twbar = -t * _d1(wbar_m, grid.dx1)
    return frame.yt * twbar - (l_xwbar - x_lwbar + frame.chi * xwbar_m)


def commutation_residual_z(s0: FlowField, s1: FlowField, use_euler_rhs: bool = True) -> np.ndarray:
    """Residual of the normal commutation identity for z/t.

    zt * T(wbar) = L(T(wbar)) - T(L(wbar)) + eta * X(wbar); with
    use_euler_rhs the inner L(wbar) is the Euler value c*X(psi2)/2.
    """
    grid = s0.grid
    mid = _mid_fields(s0, s1)
    t, c, v1, v2 = mid["t"], mid["c"], mid["v1"], mid["v2"]
    wbar0, wbar1 = mid["wbar"]
    psi20, psi21 = mid["psi2"]
    wbar_m = 0.5 * (wbar0 + wbar1)
    psi2_m = 0.5 * (psi20 + psi21)
    speed = v1 + c

    twbar0 = -s0.time * _d1(wbar0, grid.dx1)
    twbar1 = -s1.time * _d1(wbar1, grid.dx1)
    l_twbar = advective_derivative(twbar0, twbar1, speed, v2, s0.time, s1.time, grid)

    if use_euler_rhs:
        t_lwbar = -t * _d1(0.5 * c * _d2(psi2_m, grid.dx2), grid.dx1)
    else:
        lwbar = advective_derivative(wbar0, wbar1, speed, v2, s0.time, s1.time, grid)
        t_lwbar = -t * _d1(lwbar, grid.dx1)

    frame = second_frame_mid(s0, s1)
    xwbar_m = 0.5 * (_d2(wbar0, grid.dx2) + _d2(wbar1, grid.dx2))
    twbar_m = 0.5 * (twbar0 + twbar1)
    return frame.zt * twbar_m - (l_twbar - t_lwbar + frame.eta * xwbar_m)


def second_frame_mid(s0: FlowField, s1: FlowField) -> SecondFrame:
    """Second-frame gradients evaluated at the midpoint of a snapshot pair."""
    grid = s0.grid
    t = 0.5 * (s0.time + s1.time)
    speed = 0.5 * (s0.v1 + s0.c + s1.v1 + s1.c)
    v2 = 0.5 * (s0.v2 + s1.v2)
    y = _d2(speed, grid.dx2)
    z = 1.0 - t * _d1(speed, grid.dx1)
    chi = _d2(v2, grid.dx2)
    eta = -t * _d1(v2, grid.dx1)
    return SecondFrame(t, y, z, y / t, z / t, chi, eta)


def deformation_components(frame: SecondFrame, field: FlowField, commutator: str) -> DeformationComponents:
    """Deformation-tensor null components of the tangential or normal commutator.

    commutator "X" (tangential, d2) or "T" (normal, -t d1).
    """
    grid = field.grid
    t = frame.time
    c = field.c
    if commutator == "X":
        zc = _d2(c, grid.dx2)
        lead, mixed = frame.y, frame.chi
    elif commutator == "T":
        zc = -t * _d1(c, grid.dx1)
        lead, mixed = frame.z, frame.eta
    else:
        raise ValueError("commutator must be 'X' or 'T'")
    zero = np.zeros_like(c)
    return DeformationComponents(
        commutator=commutator,
        pi_ll=-2.0 * c * lead,
        pi_lbarlbar=2.0 * t * t / c * (lead - 2.0 * zc),
        pi_llbar=-2.0 * t * zc,
        pi_lx=-mixed,
        pi_lbarx=-t / c * mixed,
        pi_xx=zero,
    )


def structure_residuals(s0: FlowField, s1: FlowField, fol0: Foliation, fol1: Foliation,
                        include_chi: bool = True):
    """Propagation-equation residuals along the front generator.

    Derivatives along the generator (velocity v - c*normal) are formed by
    two-time semi-Lagrangian differencing.  Returns a dict of
    (residual, valid-mask) pairs:

        kappa:  L(kappa) - (m + e*kappa),
                m = -(gamma+1)/(gamma-1) * T(c),  e = -c^{-1} That^i L(v^i)
        that1, that2:  L(That^k) - (That^j Xhat(psi_j) + Xhat(c)) Xhat^k
        chi (optional, leading order):  L(chi) + (gamma+1)/2 * Xhat(Xhat(h))
    """
    gas, grid = s0.gas, s0.grid
    g = gas.gamma
    a1 = s0.v1 - s0.c * fol0.that1
    a2 = s0.v2 - s0.c * fol0.that2
    t0, t1 = s0.time, s1.time

    def ld(f0, f1):
        return semi_lagrangian(f0, f1, a1, a2, t0, t1, grid)

    out = {}
    c0 = s0.c

    def that_d(a):
        return fol0.that1 * _d1(a, grid.dx1) + fol0.that2 * _d2(a, grid.dx2)

    def xhat_d(a):
        return fol0.xhat1 * _d1(a, grid.dx1) + fol0.xhat2 * _d2(a, grid.dx2)

    l_kappa, m_k = ld(fol0.kappa, fol1.kappa)
    lv1, m1 = ld(s0.v1, s1.v1)
    lv2, m2 = ld(s0.v2, s1.v2)
    tc = fol0.kappa * that_d(c0)
    m_coef = -(g + 1.0) / (g - 1.0) * tc
    e_coef = -(fol0.that1 * lv1 + fol0.that2 * lv2) / c0
    out["kappa"] = (l_kappa - (m_coef + e_coef * fol0.kappa), m_k & m1 & m2)

    xpsi = -(fol0.that1 * xhat_d(s0.v1) + fol0.that2 * xhat_d(s0.v2))
    drive = xpsi + xhat_d(c0)
    for k, (th0, th1, xh) in enumerate(
            [(fol0.that1, fol1.that1, fol0.xhat1), (fol0.that2, fol1.that2, fol0.xhat2)], start=1):
        l_th, m_t = ld(th0, th1)
        out[f"that{k}"] = (l_th - drive * xh, m_t)

    if include_chi:
        h0 = c0 * c0 / (g - 1.0)
        l_chi, m_c = ld(fol0.chi, fol1.chi)
        out["chi"] = (l_chi + 0.5 * (g + 1.0) * xhat_d(xhat_d(h0)), m_c)
    return out


def kslash(fol: Foliation, field: FlowField) -> np.ndarray:
    """Tangential component of the flow's second fundamental form,
    k(Xhat, Xhat) = Xhat^j Xhat(v^j) / c."""
    grid = field.grid

    def xhat_d(a):
        return fol.xhat1 * _d1(a, grid.dx1) + fol.xhat2 * _d2(a, grid.dx2)

    return (fol.xhat1 * xhat_d(field.v1) + fol.xhat2 * xhat_d(field.v2)) / field.c


def chibar(fol: Foliation, field: FlowField) -> np.ndarray:
    """Incoming-null expansion, (kappa/c) * (2 Xhat^j Xhat(v^j) - chi)."""
    return fol.kappa / field.c * (2.0 * field.c * kslash(fol, field) - fol.chi)


def trace_characteristics(snapshots: Sequence[FlowField], foliations: Sequence[Foliation],
                          x1_start: np.ndarray, x2_start: np.ndarray,
                          substeps: int = 8) -> Tuple[np.ndarray, np.ndarray]:
    """Integrate sample rays of the front generator v - c*normal.

    Cross-validation for the level-set transport: the characteristic value u
    interpolated along each ray should stay constant.  Returns the ray
    positions (n_times, n_rays, 2) and u sampled along them.
    """
    from .energies import bilinear_sample  # local import to avoid a cycle

    grid = snapshots[0].grid
    n_rays = len(x1_start)
    x1 = np.asarray(x1_start, dtype=float).copy()
    x2 = np.asarray(x2_start, dtype=float).copy()
    pos = np.zeros((len(snapshots), n_rays, 2))
    u_along = np.zeros((len(snapshots), n_rays))
    pos[0] = np.stack([x1, x2], axis=-1)
    u_along[0] = bilinear_sample(foliations[0].u, x1, x2, grid)
    for k in range(len(snapshots) - 1):
        s0, s1 = snapshots[k], snapshots[k + 1]
        f0, f1 = foliations[k], foliations[k + 1]
        a10 = s0.v1 - s0.c * f0.that1
        a20 = s0.v2 - s0.c * f0.that2
        a11 = s1.v1 - s1.c * f1.that1
        a21 = s1.v2 - s1.c * f1.that2
        dt = (s1.time - s0.time) / substeps
        for m in range(substeps):
            w = (m + 0.5) / substeps
            v1 = (1.0 - w) * bilinear_sample(a10, x1, x2, grid) \
                + w * bilinear_sample(a11, x1, x2, grid)
            v2 = (1.0 - w) * bilinear_sample(a20, x1, x2, grid) \
                + w * bilinear_sample(a21, x1, x2, grid)
            x1 = x1 + dt * v1
            x2 = np.mod(x2 + dt * v2, 2.0 * math.pi)
        pos[k + 1] = np.stack([x1, x2], axis=-1)
        u_along[k + 1] = bilinear_sample(f1.u, x1, x2, grid)
    return pos, u_along


def sign_monitors(s0: FlowField, s1: FlowField, fol0: Foliation, fol1: Foliation,
                  mask: np.ndarray) -> dict:
    """Extrema of the coercivity quantities over the tracked band.

    Reports min/max of L(mu) along the generator, of T(wbar) = -t d1(wbar),
    and of the incoming-null derivative 2*T(wbar) + (t/c) L(wbar).
    """
    grid = s0.grid
    a1 = s0.v1 - s0.c * fol0.that1
    a2 = s0.v2 - s0.c * fol0.that2
    l_mu, m_mu = semi_lagrangian(fol0.mu, fol1.mu, a1, a2, s0.time, s1.time, grid)

    wbar0, _, _ = s0.invariants()
    wbar1, _, _ = s1.invariants()
    twbar = -s0.time * _d1(wbar0, grid.dx1)
    speed = s0.v1 + s0.c
    l_wbar, m_w = semi_lagrangian(wbar0, wbar1, speed, s0.v2, s0.time, s1.time, grid)
    lbar_wbar = 2.0 * twbar + s0.time / s0.c * l_wbar

    def mm(a, valid):
        sel = a[mask & valid]
        if sel.size == 0:
            raise ValueError("tracked band is empty")
        return float(sel.min()), float(sel.max())

    full = np.ones_like(mask)
    report = {}
    report["L_mu"] = mm(l_mu, m_mu)
    report["T_wbar"] = mm(twbar, full)
    report["Lbar_wbar"] = mm(lbar_wbar, m_w)
    return report
