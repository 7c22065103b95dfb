"""Exact finite-volume spectral analysis of the reversible generator.

The full configuration space of a small region is enumerated with a
mixed-radix codec (one digit per site), the generator assembled as a sparse
rate matrix, and the spectral gap computed on the symmetrized operator
D_mu^{1/2} L D_mu^{-1/2}.  A zero gap flags a non-ergodic chain (degenerate
kernel), detected at a relative threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lattice import (
    NEUTRAL,
    Configuration,
    SpecError,
    constraint_code,
)
from .dynamics import constraint_table, enumerate_state_space
from .reachability import verify_legal_path

ZERO_EIG_REL_TOL = 1e-9
DENSE_CUTOFF = 2 ** 14


class NumericError(RuntimeError):
    """Eigensolver or other numeric failure."""


@dataclass
class GeneratorMatrix:
    """Sparse rate matrix over the full state space, with its codec."""

    spec: object
    region: object
    boundary: object
    matrix: sp.csr_matrix       # L: off-diagonal rates, diagonal -row sums
    mu: np.ndarray              # stationary product weights, sums to 1

    @property
    def n_states(self):
        return self.matrix.shape[0]

    def index_of(self, cfg):
        base = self.spec.n_states
        strides = base ** np.arange(self.region.size, dtype=np.int64)
        return int(np.dot(cfg.states.astype(np.int64), strides))

    def config_of(self, index):
        base = self.spec.n_states
        n = self.region.size
        digits = (index // base ** np.arange(n, dtype=np.int64)) % base
        return Configuration(self.region, digits.astype(np.uint8), self.boundary)

    def row_sum_residual(self):
        return float(np.max(np.abs(self.matrix.sum(axis=1))))

    def reversibility_residual(self):
        """max |mu_i L_ij - mu_j L_ji| over stored off-diagonal pairs."""
        coo = self.matrix.tocoo()
        mask = coo.row != coo.col
        rows, cols, vals = coo.row[mask], coo.col[mask], coo.data[mask]
        flux = self.mu[rows] * vals
        back = np.asarray(self.matrix[cols, rows]).ravel()
        return float(np.max(np.abs(flux - self.mu[cols] * back))) if len(vals) else 0.0


def build_generator(spec, region, boundary, cap=2 * 10 ** 6):
    """Assemble the generator over S(G)^region under the boundary condition.

    Off-diagonal entries are exactly the q_h (neutral to vacancy) and p
    (vacancy to neutral) of facilitated flips; rows sum to zero and the
    matrix is reversible for the product measure.
    """
    states = enumerate_state_space(spec, region, cap=cap)
    n_cfg, n_sites = states.shape
    probs = spec.state_probs()
    mu = np.prod(probs[states], axis=1)
    cx = constraint_table(spec, region, boundary, states)
    base = spec.n_states
    strides = base ** np.arange(n_sites, dtype=np.int64)
    idx = np.arange(n_cfg, dtype=np.int64)
    rows, cols, vals = [], [], []
    for si in range(n_sites):
        here = states[:, si].astype(np.int64)
        for code in range(1, base):
            c = cx[:, si, code - 1]
            up = c & (here == NEUTRAL)
            if np.any(up):
                r = idx[up]
                rows.append(r)
                cols.append(r + code * strides[si])
                vals.append(np.full(r.shape, spec.q_of(code)))
            down = c & (here == code)
            if np.any(down):
                r = idx[down]
                rows.append(r)
                cols.append(r - code * strides[si])
                vals.append(np.full(r.shape, spec.p))
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n_cfg, n_cfg)).tocsr()
    diag = -np.asarray(mat.sum(axis=1)).ravel()
    mat = mat + sp.diags(diag)
    return GeneratorMatrix(spec, region, boundary, mat.tocsr(), mu)


def dirichlet_form(gen, f):
    """D(f) from its explicit transition-term sum.

    For each facilitated flip pair {star.w, h.w} the contribution is
    p q_h mu(w) (f(star.w) - f(h.w))^2 with mu(w) the weight of the exterior
    spins (equivalently q_h mu(star.w)); this makes the sum agree with the
    defining quadratic form mu(-f L f) to rounding.  The gradient square
    never depends on the flipping site, so averaging the indicator of
    {star, h} over that site would only rescale each term by p + q_h.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (gen.n_states,):
        raise SpecError("function vector sized differently from the generator")
    spec, region = gen.spec, gen.region
    states = enumerate_state_space(spec, region, cap=gen.n_states)
    cx = constraint_table(spec, region, gen.boundary, states)
    base = spec.n_states
    strides = base ** np.arange(region.size, dtype=np.int64)
    idx = np.arange(gen.n_states, dtype=np.int64)
    total = 0.0
    for si in range(region.size):
        here = states[:, si].astype(np.int64)
        for code in range(1, base):
            c = cx[:, si, code - 1]
            sel = c & (here == NEUTRAL)
            if not np.any(sel):
                continue
            lo = idx[sel]
            hi = lo + code * strides[si]
            diff2 = (f[lo] - f[hi]) ** 2
            total += spec.q_of(code) * float(np.dot(gen.mu[lo], diff2))
    return total


def dirichlet_via_generator(gen, f):
    """mu(-f L f), the cross-check evaluation of the Dirichlet form."""
    f = np.asarray(f, dtype=float)
    return float(-np.dot(gen.mu * f, gen.matrix @ f))


def variance(gen, f):
    f = np.asarray(f, dtype=float)
    m = float(np.dot(gen.mu, f))
    return float(np.dot(gen.mu, (f - m) ** 2))


def symmetrized_operator(gen):
    """S = D^{1/2} L D^{-1/2}; symmetric by reversibility."""
    root = np.sqrt(gen.mu)
    s = sp.diags(root) @ gen.matrix @ sp.diags(1.0 / root)
    return s


def spectral_gap_exact(gen, dense_cutoff=DENSE_CUTOFF, k=8):
    """Smallest nonzero eigenvalue of -L on the complement of constants.

    Returns 0 when the zero eigenvalue is degenerate (non-ergodic chain),
    decided at a relative threshold on the symmetrized spectrum.
    """
    n = gen.n_states
    s = symmetrized_operator(gen)
    if n <= dense_cutoff:
        t = -(s.toarray())
        t = (t + t.T) / 2.0
        try:
            eigs = scipy.linalg.eigvalsh(t)
        except scipy.linalg.LinAlgError as exc:
            raise NumericError(f"dense eigensolver failed: {exc}") from exc
        return _gap_from_eigs(eigs, float(eigs[-1]))
    t = (-(s + s.T) / 2.0).tocsc()
    kk = min(k, n - 2)
    try:
        lam_max = float(
            spla.eigsh(t, k=1, which="LA", return_eigenvectors=False)[0]
        )
        shift = max(lam_max, 1.0) * 1e-8
        low = spla.eigsh(t, k=kk, sigma=-shift, which="LM", return_eigenvectors=False)
    except Exception as exc:
        raise NumericError(f"sparse eigensolver failed: {exc}") from exc
    eigs = np.sort(low)
    return _gap_from_eigs(eigs, lam_max)


def _gap_from_eigs(eigs, lam_max):
    thresh = ZERO_EIG_REL_TOL * max(lam_max, 1.0)
    nonzero = eigs[eigs > thresh]
    zeros = np.count_nonzero(eigs <= thresh)
    if zeros != 1 or nonzero.size == 0:
        return 0.0
    return float(nonzero[0])


def spectral_gap_variational(gen, trials):
    """min over trial functions of D(f)/Var(f); upper-bounds the exact gap."""
    best = math.inf
    for f in trials:
        f = np.asarray(f, dtype=float)
        var = variance(gen, f)
        scale = float(np.max(np.abs(f))) or 1.0
        if var <= (1e-14 * scale) ** 2:
            raise SpecError("constant trial function rejected")
        best = min(best, dirichlet_form(gen, f) / var)
    if not trials:
        raise SpecError("need at least one trial function")
    return best


def project_config(spec, sub_types, cfg):
    """Collapse states outside G' to neutral; G' keeps its identities.

    Returns (sub_spec, projected configuration); idempotent on its image.
    """
    sub_types = sorted(tuple(h) for h in sub_types)
    for h in sub_types:
        if tuple(h) not in spec.types:
            raise SpecError(f"{h} is not in the vacancy set")
    from .lattice import validate_params

    sub_q = [spec.q[spec.types.index(h)] for h in sub_types]
    sub = validate_params(spec.d, sub_types, sub_q)
    mapping = np.zeros(spec.n_states, dtype=np.uint8)
    for code in range(1, spec.n_states):
        h = spec.type_of(code)
        if h in sub.types:
            mapping[code] = sub.code(h)
    out = Configuration(cfg.region, mapping[cfg.states], cfg.boundary)
    return sub, out


def gap_monotonicity_report(spec, sub_types, region, boundary, cap=2 * 10 ** 6):
    """Exact gaps of the full and restricted models on the same geometry.

    The restricted model keeps the shared densities verbatim (the neutral
    density changes implicitly).  Passing means gap(G) <= gap(G') + 1e-9.
    """
    from .lattice import validate_params

    sub_types = sorted(tuple(h) for h in sub_types)
    sub_q = []
    for h in sub_types:
        if h not in spec.types:
            raise SpecError(f"{h} not in the vacancy set")
        sub_q.append(spec.q[spec.types.index(h)])
    sub = validate_params(spec.d, sub_types, sub_q)
    gap_full = spectral_gap_exact(build_generator(spec, region, boundary, cap=cap))
    gap_sub = spectral_gap_exact(build_generator(sub, region, boundary, cap=cap))
    return gap_full, gap_sub, gap_full <= gap_sub + 1e-9


def east_gap_asymptotic(q, d):
    """Leading-order East gap 2^(-theta^2 / 2d); an asymptotic reference only,
    not a finite-volume prediction."""
    if not 0 < q < 1:
        raise SpecError("q must lie in (0,1)")
    theta = abs(math.log2(q))
    return 2.0 ** (-(theta ** 2) / (2 * d))


def var_transition_bound_check(spec, f, tol=1e-12):
    """Single-site variance against twice the sum of neutral-anchored terms.

    ``f`` is a vector over S(G) indexed by state code.  The bound compares
    Var_nu(f) with 2 sum_h q_h (f(h) - f(star))^2, the gradients evaluated
    from the neutral state (the form a Cauchy-Schwarz split yields; at a
    vacancy state the gradient terms may vanish while the variance does not).
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (spec.n_states,):
        raise SpecError("f must assign a value to every single-site state")
    probs = spec.state_probs()
    mean = float(np.dot(probs, f))
    lhs = float(np.dot(probs, (f - mean) ** 2))
    rhs = 2.0 * float(
        np.dot(np.asarray(spec.q), (f[1:] - f[NEUTRAL]) ** 2)
    )
    return lhs, rhs, lhs <= rhs + tol


def path_method_bound(spec, path, f, tol=1e-10):
    """Both sides of the telescoping path bound, evaluated exactly.

    Lambda is the set of sites the path touches; ``f`` is a vector over
    S(G)^Lambda (mixed radix over the touched sites in sorted order) with the
    exterior frozen to the path's configurations.  The right-hand side is
    n / min(q, p) times the worst weight ratio along the path times the local
    Dirichlet form at the start state.
    """
    report = verify_legal_path(spec, path)
    if not report.valid:
        raise SpecError(f"invalid path at step {report.first_bad_index}")
    omega, eta = path.configs[0], path.configs[-1]
    lam = sorted(report.touched_sites)
    if not lam:
        return 0.0, 0.0, True
    f = np.asarray(f, dtype=float)
    base = spec.n_states
    if f.shape != (base ** len(lam),):
        raise SpecError("f must be defined over the touched-site state space")
    probs = spec.state_probs()

    def mu_lam(cfg):
        w = 1.0
        for x in lam:
            w *= probs[cfg.get(x)]
        return w

    # D_Lambda(f) evaluated at omega: the mu_Lambda-average of the transition
    # terms with the exterior spins frozen to omega's values.
    d_lam = 0.0
    for local in np.ndindex(*((base,) * len(lam))):
        work = omega.copy()
        w = 1.0
        for x, c in zip(lam, local):
            work.set(x, c)
            w *= probs[c]
        for x in lam:
            if work.get(x) != NEUTRAL:
                continue     # count each flip pair once, from its neutral member
            for code in range(1, base):
                if not constraint_code(spec, work, x, code):
                    continue
                hi = work.copy()
                hi.set(x, code)
                diff2 = (f[_sub_index(work, lam, base)] - f[_sub_index(hi, lam, base)]) ** 2
                d_lam += spec.q_of(code) * w * diff2

    n = path.length
    min_rate = min(min(spec.q), spec.p)
    ratio = max(mu_lam(omega) / mu_lam(c) for c in path.configs)
    lhs = mu_lam(omega) * (f[_sub_index(omega, lam, base)] - f[_sub_index(eta, lam, base)]) ** 2
    rhs = (n / min_rate) * ratio * d_lam
    return lhs, rhs, lhs <= rhs + tol * max(rhs, 1.0)


def _sub_index(cfg, lam, base):
    code = 0
    for j, x in enumerate(lam):
        code += cfg.get(x) * base ** j
    return code


def block_relax_check(nu1, nu2, event, f, tol=1e-10):
    """Two-block variance decomposition with a conditioning event.

    Var_nu(f) <= 2/nu1(A) * nu( Var_block1(f) + 1_A Var_block2(f) ), with f a
    matrix indexed (block1 state, block2 state) and A an event on block 1.
    """
    nu1 = np.asarray(nu1, dtype=float)
    nu2 = np.asarray(nu2, dtype=float)
    f = np.asarray(f, dtype=float)
    event = np.asarray(event, dtype=bool)
    if f.shape != (nu1.size, nu2.size) or event.shape != (nu1.size,):
        raise SpecError("shape mismatch between measures, event and f")
    pa = float(np.dot(nu1, event))
    if pa <= 0:
        raise SpecError("the conditioning event has zero measure")
    w = np.outer(nu1, nu2)
    mean = float(np.sum(w * f))
    lhs = float(np.sum(w * (f - mean) ** 2))
    m1 = nu1 @ f                       # mean over block 1, per block-2 state
    var1 = nu1 @ (f - m1[None, :]) ** 2
    m2 = f @ nu2
    var2 = ((f - m2[:, None]) ** 2) @ nu2
    rhs = (2.0 / pa) * (float(np.dot(nu2, var1)) + float(np.dot(nu1, event * var2)))
    return lhs, rhs, lhs <= rhs + tol
