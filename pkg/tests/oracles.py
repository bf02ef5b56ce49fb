"""Independent reference implementations used as test oracles."""

from fractions import Fraction

import numpy as np

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, tol=1e-13, max_iter=400):
    """Minimizer of a unimodal scalar function on [lo, hi]."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def prox_radial_oracle(w0, R2, gamma, upsilon):
    """Scaling ``c`` minimizing 0.5||w0 - c w0||^2 - gamma upsilon ln(R^2 - c^2 ||w0||^2)."""
    r2 = float(w0 @ w0)
    cmax = np.sqrt(R2 / r2)

    def obj(c):
        # ln(R^2 - c^2 r^2) less the constant ln R^2, so that a large barrier
        # weight does not swamp the curvature in rounding error
        frac = c * c * r2 / R2
        if frac >= 1:
            return np.inf
        return 0.5 * r2 * (1.0 - c) ** 2 - gamma * upsilon * np.log1p(-frac)

    return golden_section(obj, 0.0, min(1.0, cmax * (1 - 1e-15)))


def combined_margin_exact(psi, w, delta, gamma, n0, tan_phi):
    """Combined margin evaluated in rational arithmetic from float inputs."""
    F = Fraction
    psi = [F(float(x)) for x in psi]
    w = [F(float(x)) for x in w]
    t = F(float(tan_phi))
    root = F(float(np.sqrt(gamma * n0)))
    pp = sum(x * x for x in psi)
    ww = sum(x * x for x in w)
    pw = sum(a * b for a, b in zip(psi, w))
    val = (F(float(delta)) ** 2 - pp) * 2 * (1 + t * t) * ww + 4 * t * root * pw - 2 * root**2 * t * t
    return float(val)


def conv2d_naive(x, w, b, padding, dilation):
    """Direct six-loop cross-correlation."""
    B, C, H, W = x.shape
    O, _, kh, kw = w.shape
    Ho = H + 2 * padding - dilation * (kh - 1)
    Wo = W + 2 * padding - dilation * (kw - 1)
    out = np.zeros((B, O, Ho, Wo))
    for n in range(B):
        for o in range(O):
            for i in range(Ho):
                for j in range(Wo):
                    acc = b[o]
                    for c in range(C):
                        for p in range(kh):
                            for q in range(kw):
                                y = i + p * dilation - padding
                                z = j + q * dilation - padding
                                if 0 <= y < H and 0 <= z < W:
                                    acc += w[o, c, p, q] * x[n, c, y, z]
                    out[n, o, i, j] = acc
    return out


def _grid_points(center, half_width, step):
    axis = np.arange(-half_width, half_width + step / 2, step)
    mesh = np.meshgrid(*([axis] * center.size), indexing="ij")
    return center + np.stack([m.ravel() for m in mesh], axis=1)


def _best_on_grid(A, d, c, points, chunk=400_000):
    best_p, best_w = np.inf, None
    for k in range(0, len(points), chunk):
        P = points[k:k + chunk]
        g = P @ A.T + (d * np.linalg.norm(P, axis=1))[:, None] + c
        ok = (g <= 0).all(axis=1)
        if ok.any():
            pw = np.einsum("ij,ij->i", P[ok], P[ok])
            i = int(np.argmin(pw))
            if pw[i] < best_p:
                best_p, best_w = pw[i], P[ok][i]
    return best_p, best_w


def grid_search_power(A, d, c, box=4.0, coarse=0.2, fine=0.01, finest=0.001):
    """Exhaustive grid minimum of ||w||^2 under a_j'w + d||w|| + c <= 0.

    A coarse grid over the box brackets the optimum (box and step double
    while nothing feasible is found, up to 64x); local grids of step
    ``fine`` and then ``finest`` are re-centred on the incumbent until it
    stops improving.  Returns ``(inf, None)`` when no grid point is feasible.
    """
    n = A.shape[1]
    for _ in range(7):
        best_p, best_w = _best_on_grid(A, d, c, _grid_points(np.zeros(n), box, coarse))
        if best_w is not None:
            break
        box, coarse = 2 * box, 2 * coarse
    else:
        return np.inf, None
    for step in (fine, finest):
        while True:
            p, w = _best_on_grid(A, d, c, _grid_points(best_w, 5 * step, step))
            if not p < best_p:
                break
            best_p, best_w = p, w
    return best_p, best_w


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def fd_layer_errors(layer, x, rng, train=False, h=1e-5):
    """Max relative error between analytic and central-difference gradients.

    The scalar probed is ``sum(R * layer(x))`` with a fixed random ``R``;
    returns a dict mapping ``"input"`` and each parameter name to its error.
    """
    out = layer.forward(x, train)
    R = rng.standard_normal(out.shape)
    dx = layer.backward(R)
    analytic = {p.name: p.grad.copy() for p in layer.params() if p.trainable}

    def loss():
        return float(np.sum(R * layer.forward(x, train)))

    errors = {}
    num = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        up = loss()
        x[idx] = old - h
        down = loss()
        x[idx] = old
        num[idx] = (up - down) / (2 * h)
    errors["input"] = rel_err(dx, num)
    for p in layer.params():
        if not p.trainable:
            continue
        num = np.zeros_like(p.values)
        for idx in np.ndindex(p.values.shape):
            old = p.values[idx]
            p.values[idx] = old + h
            up = loss()
            p.values[idx] = old - h
            down = loss()
            p.values[idx] = old
            num[idx] = (up - down) / (2 * h)
        errors[p.name] = rel_err(analytic[p.name], num)
    return errors
