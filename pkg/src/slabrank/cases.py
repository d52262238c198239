"""Benchmark problems for the even-parity slab transport solver.

Each case fixes the optical coefficients, the interior source q(z, mu), and
the Robin boundary data g at z = 0 and z = Z.  For the manufactured cases the
exact even-parity solution u(z, mu) and its z-derivative are available in
closed form; all closures accept complex z so that derivatives can be checked
with complex-step differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .assembly import CoefficientFunction, analytic, piecewise

CASE_IDS = ("TC1", "TC2_ALG", "TC2_EXP", "TC3")

#: number of retained modes for the infinite-rank separable solution
TC2_MODES = 200


@dataclass(frozen=True)
class ManufacturedCase:
    case_id: str
    Z: float
    sigma_t: CoefficientFunction
    sigma_s: CoefficientFunction
    c0: float
    q: Callable          # q(z, mu), broadcastable
    g0: Callable         # g(0, mu)
    gZ: Callable         # g(Z, mu)
    eps_default: float
    u: Optional[Callable] = None      # exact even-parity solution
    u_z: Optional[Callable] = None    # its z-derivative


def _tc1() -> ManufacturedCase:
    # sigma_a = 3, sigma_s = 1 + sin(pi z)/2, u = mu cosh(mu) exp(-z(1-z))
    sig_t = analytic(lambda z: 4.0 + 0.5 * np.sin(np.pi * z))
    sig_s = analytic(lambda z: 1.0 + 0.5 * np.sin(np.pi * z))

    def u(z, mu):
        return mu * np.cosh(mu) * np.exp(-z * (1.0 - z))

    def u_z(z, mu):
        return -(1.0 - 2.0 * z) * u(z, mu)

    # integral of mu' cosh(mu') over (0, 1)
    angular_mean = 1.0 - np.exp(-1.0)

    def q(z, mu):
        st = 4.0 + 0.5 * np.sin(np.pi * z)
        st_p = 0.5 * np.pi * np.cos(np.pi * z)
        ss = 1.0 + 0.5 * np.sin(np.pi * z)
        e = np.exp(-z * (1.0 - z))
        base = mu * np.cosh(mu) * e
        uzz = ((1.0 - 2.0 * z) ** 2 + 2.0) * base
        uz = -(1.0 - 2.0 * z) * base
        diff = -(mu ** 2) * (uzz / st - uz * st_p / st ** 2)
        return diff + st * base - ss * angular_mean * e

    def g_either(mu):
        return mu * np.cosh(mu) * (1.0 + mu / 4.0)

    return ManufacturedCase("TC1", 1.0, sig_t, sig_s, 3.0, q,
                            g_either, g_either, 1e-7, u, u_z)


def _tc2(case_id: str) -> ManufacturedCase:
    sig_t = analytic(lambda z: 4.0 + 0.5 * np.sin(np.pi * z))
    sig_s = analytic(lambda z: 1.0 + 0.5 * np.sin(np.pi * z))
    k = np.arange(1, TC2_MODES + 1, dtype=float)
    if case_id == "TC2_ALG":
        sig_k = k ** -3.0
    else:
        sig_k = np.exp(-k ** 2)

    def modes(z, mu):
        """Stack of per-mode values; z and mu broadcast against each other."""
        z = np.asarray(z)
        mu = np.asarray(mu)
        shape = np.broadcast_shapes(z.shape, mu.shape)
        kk = k.reshape((-1,) + (1,) * len(shape))
        return kk, np.broadcast_to(z, shape), np.broadcast_to(mu, shape)

    def u(z, mu):
        kk, zz, mm = modes(z, mu)
        terms = sig_k.reshape(kk.shape) * np.sin(kk * np.pi * zz) \
            * np.cos(kk * np.pi * mm)
        return 2.0 * terms.sum(axis=0)

    def u_z(z, mu):
        kk, zz, mm = modes(z, mu)
        terms = sig_k.reshape(kk.shape) * (kk * np.pi) \
            * np.cos(kk * np.pi * zz) * np.cos(kk * np.pi * mm)
        return 2.0 * terms.sum(axis=0)

    def u_zz(z, mu):
        kk, zz, mm = modes(z, mu)
        terms = sig_k.reshape(kk.shape) * (kk * np.pi) ** 2 \
            * np.sin(kk * np.pi * zz) * np.cos(kk * np.pi * mm)
        return -2.0 * terms.sum(axis=0)

    def q(z, mu):
        # the angular average of cos(k pi mu') over (0, 1) vanishes, so the
        # scattering term drops out of the source
        st = 4.0 + 0.5 * np.sin(np.pi * z)
        st_p = 0.5 * np.pi * np.cos(np.pi * z)
        return (-(mu ** 2) * (u_zz(z, mu) / st - u_z(z, mu) * st_p / st ** 2)
                + st * u(z, mu))

    def g0(mu):
        # u vanishes at z = 0; the outward normal derivative is -u_z
        return -(mu / 4.0) * u_z(0.0, mu)

    def gZ(mu):
        return (mu / 4.0) * u_z(1.0, mu)

    return ManufacturedCase(case_id, 1.0, sig_t, sig_s, 3.0, q,
                            g0, gZ, 1e-7, u, u_z)


def _tc3() -> ManufacturedCase:
    # three-layer medium (skin / blood / muscle), Gaussian-like inflow at z=0
    breaks = (0.75, 0.875)
    ss_vals = (36.52, 32.27, 5.20)
    sa_vals = (0.52, 8.31, 0.60)
    st_vals = tuple(a + s for a, s in zip(sa_vals, ss_vals))
    sig_s = piecewise(breaks, ss_vals)
    sig_t = piecewise(breaks, st_vals)
    c0 = min(sa_vals)

    def q(z, mu):
        return np.zeros(np.broadcast_shapes(np.shape(z), np.shape(mu)))

    def g0(mu):
        return 2.4 * np.exp(-(1.0 - mu) ** 2 / 2500.0)

    def gZ(mu):
        return np.zeros_like(np.asarray(mu, dtype=float))

    return ManufacturedCase("TC3", 1.0, sig_t, sig_s, c0, q, g0, gZ, 1e-4)


def manufactured_case(case_id: str) -> ManufacturedCase:
    """Return one of the benchmark cases by identifier."""
    if case_id == "TC1":
        return _tc1()
    if case_id in ("TC2_ALG", "TC2_EXP"):
        return _tc2(case_id)
    if case_id == "TC3":
        return _tc3()
    raise ValueError(f"unknown case {case_id!r}; choose from {CASE_IDS}")
