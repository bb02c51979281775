"""Measurements for the five mollifier properties, shared by the unit and acceptance tests."""


import numpy as np

from mhd2d import Grid, SpectralField, differentiate, mollify, norm
from mhd2d.spectral import bump_fourier


def slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def field_with_spectrum(grid, power, seed=0):
    """Real field with random phases and |c|^2 = power (an array on the grid)."""
    rng = np.random.default_rng(seed)
    c = grid.fft(rng.standard_normal((grid.n, grid.n)))
    mag = np.abs(c)
    phase = np.where(mag > 0, c / np.where(mag > 0, mag, 1), 0)
    out = phase * np.sqrt(power)
    out[0, 0] = 0
    return SpectralField(grid, out)


def smooth_field(grid, seed=0):
    power = np.exp(-grid.xi_sq / 8.0)
    return field_with_spectrum(grid, power, seed)


def decay_slopes(q_edges=(5, 10, 20, 40, 80, 160, 320, 640)):
    """Property (i): local log-log slopes of the envelope of |rho_hat(q)| between windows.

    A C-infinity kernel has a transform that decays faster than any power, so the slopes
    keep steepening; a finitely smooth kernel would level off at a fixed exponent.
    """
    env = []
    for lo, hi in zip(q_edges, q_edges[1:]):
        q = np.linspace(lo, hi, 400)
        env.append((np.sqrt(lo * hi), float(np.max(np.abs(bump_fourier(q))))))
    return [
        float(np.log(b[1] / a[1]) / np.log(b[0] / a[0])) for a, b in zip(env, env[1:])
    ]


def uniform_convergence(seed=0, eps_values=(0.4, 0.2, 0.1, 0.05), n=128):
    """Property (ii), first half: sup |J_eps u - u| for a continuous u, as eps decreases."""
    g = Grid(n)
    u = smooth_field(g, seed)
    return [float(np.max(np.abs(mollify(u, e).to_physical() - u.to_physical()))) for e in eps_values]


def fine_sup(f, factor=4):
    """Sup of a trigonometric polynomial estimated on a refined grid."""
    g = f.grid
    m = g.n * factor
    c = np.zeros((m, m), complex)
    k = np.fft.fftfreq(g.n, 1 / g.n).astype(int)
    c[np.ix_(k % m, k % m)] = f.coeffs
    return float(np.max(np.abs(np.fft.ifft2(c) * m * m)))


def linf_bound_ratios(n_fields=40, eps_values=(0.3, 0.05), n=64, seed=0):
    """Property (ii), second half: ||J_eps u||_inf / ||u||_inf over rough and smooth fields.

    The sup of u is taken on a refined grid, since the grid values can miss the true peak.
    """
    g = Grid(n)
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_fields):
        if i % 2:
            u = smooth_field(g, seed + i)
        else:
            u = SpectralField(g, g.fft(rng.standard_normal((n, n))) * g.dealias_mask)
        for e in eps_values:
            out.append(norm(mollify(u, e), "Linf") / fine_sup(u))
    return out


def commutation_error(seed=0, eps=0.1, n=64):
    """Property (iii): max over axes and orders of |D J u - J D u| relative to |D u|."""
    g = Grid(n)
    u = field_with_spectrum(g, (1 + g.xi_sq) ** -2.0 * g.dealias_mask, seed)
    worst = 0.0
    for axis in (1, 2):
        for order in (1, 2, 3):
            a = differentiate(mollify(u, eps), axis, order)
            b = mollify(differentiate(u, axis, order), eps)
            worst = max(worst, float(np.max(np.abs(a.coeffs - b.coeffs)) / np.max(np.abs(b.coeffs))))
    return worst


def convergence_rate(eps_values=(0.1, 0.05, 0.025), n=1024, m=2, seed=0):
    """Property (iv): ||J_eps f - f||_{H^{m-1}} and ||J_eps f - f||_{H^m} for borderline H^m data.

    |f_hat|^2 ~ (1+|xi|^2)^-(m+1) keeps the H^m norm only logarithmically finite, so the
    H^{m-1} error is dominated by the shells |xi| ~ 1/eps and scales like eps.
    """
    g = Grid(n)
    f = field_with_spectrum(g, (1 + g.xi_sq) ** -(m + 1.0), seed)
    low = [norm(mollify(f, e) - f, "Hs", s=m - 1) for e in eps_values]
    top = [norm(mollify(f, e) - f, "Hs", s=m) for e in eps_values]
    return low, top, norm(f, "Hs", s=m)


def smoothing_exponents(m=1, ks=(1, 2), eps_values=(0.4, 0.2, 0.1), n=512, delta=0.1, seed=0):
    """Property (v): fitted exponent p in ||J_eps u||_{H^{m+k}} ~ eps^-p for borderline H^m data."""
    g = Grid(n)
    nz = g.ksq > 0
    power = np.zeros_like(g.xi_sq)
    power[nz] = (1 + g.xi_sq[nz]) ** -m * g.xi_sq[nz] ** (-1 - delta / 2)
    u = field_with_spectrum(g, power, seed)
    out = {}
    for k in ks:
        vals = [norm(mollify(u, e), "Hs", s=m + k) / norm(u, "Hs", s=m) for e in eps_values]
        out[k] = -slope(eps_values, vals)
    return out


def sup_from_l2_constants(eps_values=(0.4, 0.2, 0.1), n=256, seed=0):
    """Property (v), sup form in 2-D: eps ||J_eps u||_inf / ||u||_L2 stays bounded."""
    g = Grid(n)
    rng = np.random.default_rng(seed)
    u = SpectralField(g, g.fft(rng.standard_normal((n, n))))
    return [e * norm(mollify(u, e), "Linf") / norm(u) for e in eps_values]


def all_properties():
    """Summary used by the acceptance suite: {name: (passed, detail)}."""
    res = {}
    sl = decay_slopes()
    ok = all(a > b for a, b in zip(sl, sl[1:])) and sl[-1] < -8
    res["(i) smoothness"] = (ok, f"envelope slopes {['%.2f' % x for x in sl]}")
    sup = uniform_convergence()
    ratios = linf_bound_ratios()
    ok = all(a > b for a, b in zip(sup, sup[1:])) and sup[-1] < 0.05 * sup[0] and max(ratios) <= 1 + 1e-10
    res["(ii) uniform convergence + Linf bound"] = (ok, f"sup errors {['%.1e' % s for s in sup]}, max ratio {max(ratios):.6f}")
    err = commutation_error()
    res["(iii) commutes with derivatives"] = (err < 1e-12, f"max rel error {err:.1e}")
    low, top, _ = convergence_rate()
    sl = slope((0.1, 0.05, 0.025), low)
    ok = abs(sl - 1.0) <= 0.1 and all(a > b for a, b in zip(top, top[1:]))
    res["(iv) linear rate in H^{m-1}"] = (ok, f"slope {sl:.3f}")
    ex = smoothing_exponents()
    ok = all(abs(ex[k] - k) <= 0.2 for k in ex)
    res["(v) smoothing exponents"] = (ok, ", ".join(f"k={k}: {v:.3f}" for k, v in ex.items()))
    return res
