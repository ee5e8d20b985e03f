"""Eigenbasis of the weighted Neumann operator on a box and everything built on it.

The forward noising process has generator div(f grad .) with zero conormal
derivative on the box boundary.  Its transition density admits the series
q_t(x,y) = sum_j exp(-t lam_j) e_j(x) e_j(y); on boxes the eigenpairs either
have closed cosine form (constant f) or tensorize from per-axis 1-D
Sturm-Liouville problems (separable f).  Marginals, scores and truncations
are all partial sums of that series.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal

from .domain import BoxDomain, Diffusivity, QUAD_TOL, quad_rule
from .errors import (
    ConfigurationError,
    EigensolverError,
    EnvelopeError,
    TruncationUnreliableError,
)

DEFAULT_T_FLOOR = 1e-3
TAIL_TOL = 1e-10
FD_NODES = 2048


# ---------------------------------------------------------------------------
# per-axis eigendecompositions


class _CosineAxis:
    """Closed-form Neumann eigenpairs of -c d^2/dx^2 on (lo, hi)."""

    def __init__(self, lo, hi, c, n_modes):
        self.lo, self.hi, self.c = float(lo), float(hi), float(c)
        self.length = self.hi - self.lo
        self.n_modes = int(n_modes)
        k = np.arange(self.n_modes)
        self.eigenvalues = self.c * (k * np.pi / self.length) ** 2
        self.eigenvalues[0] = 0.0

    def values(self, x, idx):
        x = np.asarray(x, dtype=float)
        k = np.asarray(idx)
        arg = np.outer(x - self.lo, k) * (np.pi / self.length)
        out = np.sqrt(2.0 / self.length) * np.cos(arg)
        out[:, k == 0] = 1.0 / np.sqrt(self.length)
        return out

    def derivs(self, x, idx):
        x = np.asarray(x, dtype=float)
        k = np.asarray(idx)
        freq = k * (np.pi / self.length)
        arg = np.outer(x - self.lo, k) * (np.pi / self.length)
        return -np.sqrt(2.0 / self.length) * np.sin(arg) * freq


class _SturmLiouvilleAxis:
    """Finite-difference Neumann eigenpairs of -(f u')' on (lo, hi).

    Conservative cell-centered second-order scheme; boundary fluxes vanish,
    which encodes the Neumann condition without ghost unknowns.  Retained
    eigenvectors are interpolated by clamped cubic splines so that values and
    first derivatives are available anywhere in the closed interval.
    """

    def __init__(self, lo, hi, n_modes, nodes=None, vectors=None, eigenvalues=None,
                 f=None, axis_index=0, n_fd=FD_NODES):
        self.lo, self.hi = float(lo), float(hi)
        self.length = self.hi - self.lo
        self.n_modes = int(n_modes)
        if nodes is None:
            nodes, vectors, eigenvalues = self._solve(f, axis_index, n_fd)
        self.nodes = nodes
        self.vectors = vectors  # (n_fd, n_modes), L2-normalized
        self.eigenvalues = eigenvalues
        self._splines = [
            CubicSpline(self.nodes, self.vectors[:, j], bc_type=((1, 0.0), (1, 0.0)))
            for j in range(self.n_modes)
        ]

    def _solve(self, f, axis_index, n_fd):
        h = self.length / n_fd
        centers = self.lo + (np.arange(n_fd) + 0.5) * h
        faces = self.lo + np.arange(1, n_fd) * h
        f_face = np.asarray(f(faces), dtype=float)
        diag = np.zeros(n_fd)
        diag[:-1] += f_face
        diag[1:] += f_face
        diag /= h * h
        off = -f_face / (h * h)
        try:
            vals, vecs = eigh_tridiagonal(
                diag, off, select="i", select_range=(0, self.n_modes - 1)
            )
        except Exception as exc:  # pragma: no cover - scipy failure path
            raise EigensolverError(axis_index, np.nan, str(exc))
        # residual of the worst retained pair, relative to its eigenvalue scale
        a_dense = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        r = a_dense @ vecs[:, -1] - vals[-1] * vecs[:, -1]
        residual = float(np.linalg.norm(r) / max(vals[-1], 1.0))
        if residual > 1e-8 or not np.all(np.isfinite(vals)):
            raise EigensolverError(axis_index, residual)
        vecs = vecs / np.sqrt(h)  # unit discrete L2 norm -> unit integral norm
        signs = np.where(vecs[0, :] < 0, -1.0, 1.0)
        vecs = vecs * signs
        vals = np.clip(vals, 0.0, None)
        vals[0] = 0.0
        vecs[:, 0] = 1.0 / np.sqrt(self.length)
        return centers, vecs, vals

    def values(self, x, idx):
        x = np.asarray(x, dtype=float)
        out = np.empty((x.size, len(idx)))
        for col, j in enumerate(np.asarray(idx)):
            out[:, col] = self._splines[j](x)
        return out

    def derivs(self, x, idx):
        x = np.asarray(x, dtype=float)
        out = np.empty((x.size, len(idx)))
        for col, j in enumerate(np.asarray(idx)):
            out[:, col] = self._splines[j](x, 1)
        return out


# ---------------------------------------------------------------------------
# basis


class SpectralBasis:
    """First J+1 eigenpairs of the weighted Neumann operator, tensorized.

    eigenvalues are ascending with eigenvalues[0] == 0; multi_indices[j]
    gives the per-axis 1-D mode numbers composing e_j.
    """

    def __init__(self, domain: BoxDomain, diffusivity: Diffusivity, axes, multi_indices,
                 eigenvalues, t_floor_default=DEFAULT_T_FLOOR):
        self.domain = domain
        self.diffusivity = diffusivity
        self.axes = axes
        self.multi_indices = np.asarray(multi_indices, dtype=np.int64)
        self.eigenvalues = np.asarray(eigenvalues, dtype=float)
        self.J = len(self.eigenvalues) - 1
        lam_max = self.eigenvalues[-1]
        implied = np.log(1.0 / TAIL_TOL) / lam_max if lam_max > 0 else np.inf
        self.t_floor = max(t_floor_default, implied)
        self._axis_cache = {}

    # -- evaluation ---------------------------------------------------------

    def _axis_tables(self, x, want_derivs=False):
        vals, ders = [], []
        for i, axis in enumerate(self.axes):
            idx = self.multi_indices[:, i]
            uniq, inv = np.unique(idx, return_inverse=True)
            v = axis.values(x[:, i], uniq)[:, inv]
            vals.append(v)
            if want_derivs:
                ders.append(axis.derivs(x[:, i], uniq)[:, inv])
        return vals, ders

    def eigfun_values(self, x) -> np.ndarray:
        """All e_j at batched points; shape (n, J+1)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        vals, _ = self._axis_tables(x)
        out = vals[0].copy()
        for v in vals[1:]:
            out *= v
        return out

    def eigfun_grads(self, x) -> np.ndarray:
        """Gradients of all e_j; shape (n, J+1, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        vals, ders = self._axis_tables(x, want_derivs=True)
        n, d = x.shape
        out = np.empty((n, self.J + 1, d))
        for axis in range(d):
            acc = ders[axis].copy()
            for i, v in enumerate(vals):
                if i != axis:
                    acc *= v
            out[:, :, axis] = acc
        return out

    def heat_weights(self, t: float) -> np.ndarray:
        return np.exp(-t * self.eigenvalues)

    def require_reliable(self, t: float):
        if t < self.t_floor:
            raise TruncationUnreliableError(
                f"t={t:.3e} below t_floor={self.t_floor:.3e}; series truncation at "
                f"J={self.J} is unreliable here"
            )

    def tail_bound(self, t: float) -> float:
        """Crude magnitude proxy for the dropped series tail at time t."""
        return float(np.exp(-t * self.eigenvalues[-1]))

    def weyl_slope(self) -> float:
        """Log-log slope of eigenvalue growth over the top half of the spectrum."""
        j = np.arange(1, self.J + 1)
        keep = j >= max(2, (self.J + 1) // 2)
        coeffs = np.polyfit(np.log(j[keep]), np.log(self.eigenvalues[1:][keep]), 1)
        return float(coeffs[0])


def build_basis(domain: BoxDomain, diffusivity: Diffusivity, J: int,
                n_fd_nodes: int = FD_NODES) -> SpectralBasis:
    """Compute the J+1 lowest eigenpairs, sorted ascending."""
    if J < 1:
        raise ConfigurationError("J must be >= 1")
    d = domain.dim

    def make_axes(n_modes):
        axes = []
        for i in range(d):
            lo, hi = domain.lows[i], domain.highs[i]
            if diffusivity.kind == "constant":
                axes.append(_CosineAxis(lo, hi, diffusivity.const, n_modes))
            else:
                axes.append(
                    _SturmLiouvilleAxis(
                        lo, hi, n_modes, f=diffusivity.axis_funcs[i],
                        axis_index=i, n_fd=n_fd_nodes,
                    )
                )
        return axes

    if d == 1:
        axes = make_axes(J + 1)
        multi = np.arange(J + 1, dtype=np.int64)[:, None]
        eigenvalues = axes[0].eigenvalues.copy()
        return SpectralBasis(domain, diffusivity, axes, multi, eigenvalues)

    # tensor case: enlarge the per-axis count until the selection provably
    # contains the J+1 smallest sums
    n_modes = max(4, int(np.ceil(2 * (J + 1) ** (1.0 / d))) + 1)
    while True:
        axes = make_axes(n_modes)
        grids = np.meshgrid(*[ax.eigenvalues for ax in axes], indexing="ij")
        sums = np.zeros_like(grids[0])
        for g in grids:
            sums = sums + g
        flat = sums.ravel()
        order = np.argsort(flat, kind="stable")[: J + 1]
        cut = flat[order[-1]]
        safe = min(ax.eigenvalues[-1] for ax in axes)
        if cut < safe or n_modes > 4096:
            idx = np.stack(np.unravel_index(order, sums.shape), axis=1)
            return SpectralBasis(domain, diffusivity, axes, idx, flat[order])
        n_modes *= 2


# ---------------------------------------------------------------------------
# initial densities


def default_beta(s: int, d: int) -> float | None:
    if s > d / 2 + 1:
        return 1.0
    if d / 2 < s < d / 2 + 1:
        return s - d / 2
    return None  # borderline case: caller must choose in (0, 1)


@dataclass
class InitialDensity:
    """Data density p0 = tilde_p0 + alpha with spectral coefficients attached.

    band_limited marks densities assembled directly in coefficient space;
    for those the marginal series is exact at every t >= 0, so marginal and
    score evaluations skip the truncation-reliability floor.
    """

    basis: SpectralBasis
    coefficients: np.ndarray  # <p0, e_j>, length J+1
    alpha: float
    s: int
    beta: float
    c_beta: float
    evaluator: object = None  # callable (n,d) -> (n,), defaults to the series
    band_limited: bool = True

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.basis.J + 1,):
            raise ConfigurationError("coefficient vector must have length J+1")
        if self.alpha <= 0:
            raise ConfigurationError("alpha must be positive (density bounded below)")
        if self.evaluator is None:
            self.evaluator = lambda x: self.basis.eigfun_values(x) @ self.coefficients

    def density(self, x) -> np.ndarray:
        return np.asarray(self.evaluator(np.atleast_2d(np.asarray(x, dtype=float))))

    def norm_l2(self) -> float:
        return float(np.sqrt(np.sum(self.coefficients**2)))

    def norm_hs(self, s=None) -> float:
        """Homogeneous Sobolev seminorm of order s through the eigenvalues."""
        s = self.s if s is None else s
        lam = self.basis.eigenvalues[1:]
        return float(np.sqrt(np.sum(lam**s * self.coefficients[1:] ** 2)))

    def sup_norm(self, per_axis=256) -> float:
        return float(np.max(self.density(self.basis.domain.grid(per_axis))))


def uniform_density(basis: SpectralBasis, s: int = 2) -> InitialDensity:
    coeffs = np.zeros(basis.J + 1)
    vol = basis.domain.volume()
    coeffs[0] = 1.0 / np.sqrt(vol)
    beta = default_beta(s, basis.domain.dim) or 0.5
    return InitialDensity(basis, coeffs, alpha=1.0 / vol, s=s, beta=beta, c_beta=0.0)


def density_from_coefficients(basis: SpectralBasis, tail, s: int,
                              beta: float | None = None, c_beta: float = 1.0,
                              min_floor: float = 0.0, grid: int = 1024) -> InitialDensity:
    """Synthesize p0 directly in coefficient space.

    tail holds <p0, e_j> for j >= 1; the j = 0 coefficient is pinned by unit
    mass.  The pointwise minimum over a fine grid becomes alpha, so the
    result is exactly band-limited and exactly normalized.
    """
    tail = np.asarray(tail, dtype=float)
    if tail.size > basis.J:
        raise ConfigurationError("tail longer than available spectrum")
    coeffs = np.zeros(basis.J + 1)
    coeffs[0] = 1.0 / np.sqrt(basis.domain.volume())
    coeffs[1 : 1 + tail.size] = tail
    vals = basis.eigfun_values(basis.domain.grid(grid) if basis.domain.dim == 1
                               else basis.domain.grid(64)) @ coeffs
    lo = float(vals.min())
    if lo <= min_floor:
        raise ConfigurationError(
            f"coefficients give min p0 = {lo:.3e} <= {min_floor}; rescale the tail"
        )
    if beta is None:
        beta = default_beta(s, basis.domain.dim)
        if beta is None:
            raise ConfigurationError("borderline smoothness: pass beta in (0,1) explicitly")
    return InitialDensity(basis, coeffs, alpha=lo, s=s, beta=beta, c_beta=c_beta)


def density_from_function(basis: SpectralBasis, tilde_p0, alpha: float, s: int,
                          beta: float | None = None, c_beta: float = 1.0,
                          normalize: bool = False, order: int = 64,
                          max_mode: int | None = None) -> InitialDensity:
    """Project p0 = tilde_p0 + alpha onto the basis by quadrature.

    Coefficients are kept only for per-axis mode numbers the quadrature rule
    resolves (roughly order/3 oscillations per axis); faster modes would
    alias and are zeroed instead.
    """
    if max_mode is None:
        max_mode = order // 3
    pts, w = quad_rule(basis.domain, order)
    tilde_vals = np.asarray(tilde_p0(pts), dtype=float)
    if np.any(tilde_vals < -QUAD_TOL):
        raise ConfigurationError("tilde_p0 must be nonnegative")
    vol = basis.domain.volume()
    mass = float(np.dot(w, tilde_vals)) + alpha * vol
    scale = 1.0
    if normalize:
        target = 1.0 - alpha * vol
        if target <= 0:
            raise ConfigurationError("alpha * volume >= 1 leaves no mass for tilde_p0")
        scale = target / float(np.dot(w, tilde_vals))
        tilde_vals = tilde_vals * scale
    elif abs(mass - 1.0) > 100 * QUAD_TOL:
        raise ConfigurationError(f"p0 integrates to {mass:.10f}, not 1")
    vals = tilde_vals + alpha
    coeffs = basis.eigfun_values(pts).T @ (w * vals)
    coeffs[np.any(basis.multi_indices > max_mode, axis=1)] = 0.0
    coeffs[0] = 1.0 / np.sqrt(vol)
    if beta is None:
        beta = default_beta(s, basis.domain.dim)
        if beta is None:
            raise ConfigurationError("borderline smoothness: pass beta in (0,1) explicitly")
    fn = tilde_p0 if scale == 1.0 else (lambda x: scale * np.asarray(tilde_p0(x)))
    return InitialDensity(
        basis, coeffs, alpha=alpha, s=s, beta=beta, c_beta=c_beta,
        evaluator=lambda x: np.asarray(fn(x), dtype=float) + alpha,
        band_limited=False,
    )


# ---------------------------------------------------------------------------
# series evaluations


def transition_density(basis: SpectralBasis, t: float, x, y, with_info: bool = False):
    """q_t(x, y) for paired batches; clamped below at zero.

    The summand is symmetric in (x, y) term by term, so symmetry holds
    bit-exactly.  The clamp guards the microscopic negative dips a truncated
    series can produce; with_info additionally returns the most negative
    pre-clamp value seen.
    """
    basis.require_reliable(t)
    w = basis.heat_weights(t)
    ex = basis.eigfun_values(x)
    ey = basis.eigfun_values(y)
    raw = (ex * ey) @ w
    worst = float(min(raw.min(), 0.0)) if raw.size else 0.0
    vals = np.maximum(raw, 0.0)
    return (vals, worst) if with_info else vals


def transition_kernel(basis: SpectralBasis, t: float, x0, ys, with_info=False):
    """q_t(x0, y) for one source point against many targets."""
    basis.require_reliable(t)
    w = basis.heat_weights(t)
    e0 = basis.eigfun_values(np.atleast_2d(x0))[0]
    raw = basis.eigfun_values(ys) @ (w * e0)
    worst = float(min(raw.min(), 0.0)) if raw.size else 0.0
    vals = np.maximum(raw, 0.0)
    return (vals, worst) if with_info else vals


def transition_log_gradient(basis: SpectralBasis, t: float, x0, ys):
    """grad_y log q_t(x0, y), the denoising regression target."""
    basis.require_reliable(t)
    w = basis.heat_weights(t)
    e0 = basis.eigfun_values(np.atleast_2d(x0))[0]
    coeff = w * e0
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    dens = basis.eigfun_values(ys) @ coeff
    grads = np.einsum("njd,j->nd", basis.eigfun_grads(ys), coeff)
    if np.any(dens <= 0):
        raise TruncationUnreliableError("transition density vanished under truncation")
    return grads / dens[:, None]


def forward_marginal(basis: SpectralBasis, p0: InitialDensity, t: float, x,
                     with_tail_bound: bool = False):
    """p_t(x) = sum_j exp(-t lam_j) <p0, e_j> e_j(x)."""
    if not p0.band_limited:
        basis.require_reliable(t)
    w = basis.heat_weights(t) * p0.coefficients
    vals = basis.eigfun_values(x) @ w
    if with_tail_bound:
        return vals, basis.tail_bound(t) * p0.norm_l2()
    return vals


def forward_marginal_gradient(basis: SpectralBasis, p0: InitialDensity, t: float, x):
    if not p0.band_limited:
        basis.require_reliable(t)
    w = basis.heat_weights(t) * p0.coefficients
    return np.einsum("njd,j->nd", basis.eigfun_grads(x), w)


def exact_score(basis: SpectralBasis, p0: InitialDensity, t: float, x) -> np.ndarray:
    """grad log p_t(x); raises when the truncated denominator dips below alpha/2."""
    if not p0.band_limited:
        basis.require_reliable(t)
    den = forward_marginal(basis, p0, t, x)
    if np.any(den < 0.5 * p0.alpha):
        raise TruncationUnreliableError(
            f"marginal {den.min():.3e} below alpha/2 = {0.5 * p0.alpha:.3e}"
        )
    num = forward_marginal_gradient(basis, p0, t, x)
    return num / den[:, None]


def truncated_marginal(basis: SpectralBasis, p0: InitialDensity, N: int, t: float, x):
    """Partial sum of the marginal through mode N (inclusive)."""
    if N > basis.J:
        raise ConfigurationError(f"N={N} exceeds computed spectrum J={basis.J}")
    w = basis.heat_weights(t) * p0.coefficients
    w[N + 1 :] = 0.0
    return basis.eigfun_values(x) @ w


def truncated_marginal_gradient(basis, p0, N: int, t: float, x):
    if N > basis.J:
        raise ConfigurationError(f"N={N} exceeds computed spectrum J={basis.J}")
    w = basis.heat_weights(t) * p0.coefficients
    w[N + 1 :] = 0.0
    return np.einsum("njd,j->nd", basis.eigfun_grads(x), w)


def truncated_score(basis, p0, N: int, t: float, x, alpha: float | None = None):
    """Floored truncated score grad h_N / (h_N v alpha)."""
    a = p0.alpha if alpha is None else alpha
    h = truncated_marginal(basis, p0, N, t, x)
    g = truncated_marginal_gradient(basis, p0, N, t, x)
    return g / np.maximum(h, a)[:, None]


def sample_transition(basis: SpectralBasis, t: float, x0, rng: np.random.Generator,
                      n_samples: int = 1, envelope_grid: int = 512,
                      return_info: bool = False):
    """Draw y ~ q_t(x0, .) by rejection against the uniform proposal."""
    basis.require_reliable(t)
    dom = basis.domain
    probe = dom.grid(envelope_grid if dom.dim == 1 else 64)
    dens = transition_kernel(basis, t, x0, probe)
    sup = float(dens.max())
    if not np.isfinite(sup) or sup <= 0:
        raise EnvelopeError(f"envelope estimate {sup} is unusable at t={t}")
    envelope = 1.05 * sup + 1e-12
    out = np.empty((n_samples, dom.dim))
    filled, proposed, accepted = 0, 0, 0
    while filled < n_samples:
        chunk = max(64, int(1.5 * (n_samples - filled) * envelope * dom.volume()))
        ys = dom.sample_uniform(rng, chunk)
        u = rng.random(chunk)
        acc = u * envelope < transition_kernel(basis, t, x0, ys)
        take = min(int(acc.sum()), n_samples - filled)
        out[filled : filled + take] = ys[acc][:take]
        filled += take
        proposed += chunk
        accepted += int(acc.sum())
    if return_info:
        return out, {"acceptance_rate": accepted / proposed, "envelope": envelope}
    return out


def sample_initial(basis: SpectralBasis, p0: InitialDensity, rng, n_samples: int):
    """Draw from p0 by rejection with the uniform proposal and sup envelope."""
    dom = basis.domain
    sup = p0.sup_norm() * 1.05 + 1e-12
    out = np.empty((n_samples, dom.dim))
    filled = 0
    while filled < n_samples:
        chunk = max(64, 2 * (n_samples - filled))
        ys = dom.sample_uniform(rng, chunk)
        acc = rng.random(chunk) * sup < p0.density(ys)
        take = min(int(acc.sum()), n_samples - filled)
        out[filled : filled + take] = ys[acc][:take]
        filled += take
    return out


# ---------------------------------------------------------------------------
# truncation error functionals


def h1_truncation_error(basis, p0, N: int, t_lo: float, t_hi: float) -> float:
    """Time-integrated squared homogeneous-H1 distance between p_t and its
    N-truncation, evaluated exactly through the eigen expansion."""
    if N > basis.J:
        raise ConfigurationError("N exceeds computed spectrum")
    lam = basis.eigenvalues[N + 1 :]
    a = p0.coefficients[N + 1 :]
    return float(0.5 * np.sum(a**2 * (np.exp(-2 * lam * t_lo) - np.exp(-2 * lam * t_hi))))


def log_time_nodes(t_lo: float, t_hi: float, n: int) -> np.ndarray:
    return np.exp(np.linspace(np.log(t_lo), np.log(t_hi), n))


def truncated_score_gap(basis, p0, N: int, t_lo: float, t_hi: float,
                        alpha: float | None = None, n_x: int = 4096,
                        n_time: int = 32) -> float:
    """Weighted L2(p_t dx dt) gap between the exact and floored truncated score.

    Spatial integration uses a midpoint grid rather than Gauss-Legendre: at
    small t the integrand carries the full spectral bandwidth of the basis and
    a fine uniform grid resolves those oscillations.
    """
    pts = basis.domain.grid(n_x if basis.domain.dim == 1 else 64)
    w = np.full(len(pts), basis.domain.volume() / len(pts))
    ts = log_time_nodes(t_lo, t_hi, n_time)
    vals = np.empty(n_time)
    for i, t in enumerate(ts):
        sc = exact_score(basis, p0, t, pts)
        tr = truncated_score(basis, p0, N, t, pts, alpha)
        pt = forward_marginal(basis, p0, t, pts)
        vals[i] = np.dot(w, np.sum((sc - tr) ** 2, axis=1) * pt)
    return float(np.trapezoid(vals, ts))


# ---------------------------------------------------------------------------
# serialization

_MAGIC = b"RFLKB1\x00"


def _f_descriptor(basis: SpectralBasis):
    f = basis.diffusivity
    if f.kind == "constant":
        return {"kind": "constant", "const": f.const}
    desc = {"kind": "separable1d", "f_min": f.f_min, "f_max": f.f_max, "axes": []}
    for i, ax in enumerate(basis.axes):
        desc["axes"].append(
            {
                "f_nodes": list(map(float, ax.nodes)),
                "f_values": list(map(float, f.axis_funcs[i](ax.nodes))),
                "f_derivs": list(map(float, f.axis_derivs[i](ax.nodes))),
            }
        )
    return desc


def basis_to_json(basis: SpectralBasis) -> str:
    doc = {
        "format": "reflekt-basis",
        "version": 1,
        "d": basis.domain.dim,
        "J": basis.J,
        "lows": list(basis.domain.lows),
        "highs": list(basis.domain.highs),
        "f": _f_descriptor(basis),
        "eigenvalues": [float(v) for v in basis.eigenvalues],
        "multi_indices": basis.multi_indices.tolist(),
    }
    if basis.diffusivity.kind != "constant":
        doc["axis_tables"] = [
            {
                "nodes": list(map(float, ax.nodes)),
                "eigenvalues": list(map(float, ax.eigenvalues)),
                "vectors": ax.vectors.tolist(),
            }
            for ax in basis.axes
        ]
    return json.dumps(doc)


def _interp_diffusivity(desc, domain):
    funcs, derivs = [], []
    for ax in desc["axes"]:
        nodes = np.asarray(ax["f_nodes"])
        fv = np.asarray(ax["f_values"])
        dv = np.asarray(ax["f_derivs"])
        funcs.append(lambda x, n=nodes, v=fv: np.interp(x, n, v))
        derivs.append(lambda x, n=nodes, v=dv: np.interp(x, n, v))
    return Diffusivity(
        kind="separable1d", axis_funcs=tuple(funcs), axis_derivs=tuple(derivs),
        f_min=desc["f_min"], f_max=desc["f_max"],
    )


def basis_from_json(text: str) -> SpectralBasis:
    doc = json.loads(text)
    if doc.get("format") != "reflekt-basis":
        raise ConfigurationError("not a basis file")
    domain = BoxDomain(tuple(doc["lows"]), tuple(doc["highs"]))
    if doc["f"]["kind"] == "constant":
        diffusivity = Diffusivity.constant(doc["f"]["const"])
        n_modes = int(np.max(doc["multi_indices"])) + 1
        axes = [
            _CosineAxis(lo, hi, diffusivity.const, n_modes)
            for lo, hi in zip(domain.lows, domain.highs)
        ]
    else:
        diffusivity = _interp_diffusivity(doc["f"], domain)
        axes = []
        for i, tab in enumerate(doc["axis_tables"]):
            axes.append(
                _SturmLiouvilleAxis(
                    domain.lows[i], domain.highs[i],
                    n_modes=len(tab["eigenvalues"]),
                    nodes=np.asarray(tab["nodes"]),
                    vectors=np.asarray(tab["vectors"]),
                    eigenvalues=np.asarray(tab["eigenvalues"]),
                )
            )
    return SpectralBasis(domain, diffusivity, axes, doc["multi_indices"], doc["eigenvalues"])


def basis_to_binary(basis: SpectralBasis) -> bytes:
    """Flat little-endian container: header, eigenvalues, indices, axis tables."""
    buf = io.BytesIO()
    buf.write(_MAGIC)
    d, J = basis.domain.dim, basis.J
    kind = 0 if basis.diffusivity.kind == "constant" else 1
    buf.write(struct.pack("<qqq", d, J, kind))
    buf.write(np.asarray(basis.domain.lows, dtype="<f8").tobytes())
    buf.write(np.asarray(basis.domain.highs, dtype="<f8").tobytes())
    if kind == 0:
        buf.write(struct.pack("<d", basis.diffusivity.const))
    else:
        buf.write(struct.pack("<dd", basis.diffusivity.f_min, basis.diffusivity.f_max))
    buf.write(basis.eigenvalues.astype("<f8").tobytes())
    buf.write(basis.multi_indices.astype("<q").tobytes())
    if kind == 1:
        for i, ax in enumerate(basis.axes):
            n_fd, n_modes = ax.vectors.shape
            buf.write(struct.pack("<qq", n_fd, n_modes))
            buf.write(np.asarray(ax.nodes, dtype="<f8").tobytes())
            buf.write(np.asarray(ax.eigenvalues, dtype="<f8").tobytes())
            buf.write(np.asarray(ax.vectors, dtype="<f8").tobytes())
            f = basis.diffusivity
            buf.write(np.asarray(f.axis_funcs[i](ax.nodes), dtype="<f8").tobytes())
            buf.write(np.asarray(f.axis_derivs[i](ax.nodes), dtype="<f8").tobytes())
    return buf.getvalue()


def basis_from_binary(data: bytes) -> SpectralBasis:
    buf = io.BytesIO(data)
    if buf.read(len(_MAGIC)) != _MAGIC:
        raise ConfigurationError("bad magic; not a binary basis file")
    d, J, kind = struct.unpack("<qqq", buf.read(24))
    lows = np.frombuffer(buf.read(8 * d), dtype="<f8")
    highs = np.frombuffer(buf.read(8 * d), dtype="<f8")
    domain = BoxDomain(tuple(lows), tuple(highs))
    if kind == 0:
        (const,) = struct.unpack("<d", buf.read(8))
        diffusivity = Diffusivity.constant(const)
    else:
        f_min, f_max = struct.unpack("<dd", buf.read(16))
    eigenvalues = np.frombuffer(buf.read(8 * (J + 1)), dtype="<f8").copy()
    multi = np.frombuffer(buf.read(8 * (J + 1) * d), dtype="<q").reshape(J + 1, d).copy()
    if kind == 0:
        n_modes = int(multi.max()) + 1
        axes = [
            _CosineAxis(lo, hi, diffusivity.const, n_modes)
            for lo, hi in zip(domain.lows, domain.highs)
        ]
        return SpectralBasis(domain, diffusivity, axes, multi, eigenvalues)
    axes, funcs, derivs = [], [], []
    for i in range(d):
        n_fd, n_modes = struct.unpack("<qq", buf.read(16))
        nodes = np.frombuffer(buf.read(8 * n_fd), dtype="<f8").copy()
        ax_eigs = np.frombuffer(buf.read(8 * n_modes), dtype="<f8").copy()
        vecs = np.frombuffer(buf.read(8 * n_fd * n_modes), dtype="<f8").reshape(n_fd, n_modes).copy()
        fv = np.frombuffer(buf.read(8 * n_fd), dtype="<f8").copy()
        dv = np.frombuffer(buf.read(8 * n_fd), dtype="<f8").copy()
        axes.append(
            _SturmLiouvilleAxis(domain.lows[i], domain.highs[i], n_modes,
                                nodes=nodes, vectors=vecs, eigenvalues=ax_eigs)
        )
        funcs.append(lambda x, n=nodes, v=fv: np.interp(x, n, v))
        derivs.append(lambda x, n=nodes, v=dv: np.interp(x, n, v))
    diffusivity = Diffusivity(kind="separable1d", axis_funcs=tuple(funcs),
                              axis_derivs=tuple(derivs), f_min=f_min, f_max=f_max)
    return SpectralBasis(domain, diffusivity, axes, multi, eigenvalues)
