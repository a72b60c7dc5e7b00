"""Property batteries for every module, run by ``misscov verify``.

Each battery returns a :class:`BatteryResult` with the number of individual
checks and failures. :func:`run_invariant_suite` runs them all with one seed.
"""
import itertools
import math
from typing import NamedTuple

import numpy as np

from . import datagen, rng
from .linalg import (
    SymmetricMatrix,
    diag_part,
    eigh,
    off_part,
    operator_norm,
    psd_project,
)
from .net import build_net
from .params import GFunction, estimate_p, pick_lambdas
from .pipeline import EstimatorConfig, estimate_covariance
from .quadform import (
    DIAGONAL,
    OFFDIAGONAL,
    design_matrix,
    fit_diagonal,
    fit_offdiagonal,
    oracle_estimate,
    truncated_form,
)
from .robust import (
    FiniteSupportRV,
    check_lemma3_part1,
    check_lemma3_part2,
    psi,
    random_finite_support,
    robust_mean,
)

__all__ = [
    "BatteryResult",
    "run_invariant_suite",
    "format_suite",
    "brute_force_objective",
    "lemma4_check",
]

STREAM_SUITE = 100  # offset for suite streams, clear of the data generator ids


class BatteryResult(NamedTuple):
    name: str
    checks: int
    failures: int
    detail: str = ""

    @property
    def passed(self):
        return self.failures == 0


class _Tally:
    def __init__(self, name):
        self.name = name
        self.checks = 0
        self.failures = 0
        self.first = ""

    def check(self, ok, what):
        self.checks += 1
        if not ok:
            self.failures += 1
            if not self.first:
                self.first = what

    def result(self):
        return BatteryResult(self.name, self.checks, self.failures, self.first)


def _gen(seed, k):
    return rng.stream(seed, STREAM_SUITE + k)


def _random_sym(gen, d, scale=1.0):
    a = gen.standard_normal((d, d)) * scale
    return SymmetricMatrix.from_dense(0.5 * (a + a.T))


def _random_spec(gen, d):
    kind = int(gen.integers(0, 3))
    if kind == 0:
        spectrum = datagen.Spectrum.identity()
    elif kind == 1:
        spectrum = datagen.Spectrum.geometric(float(gen.uniform(0.3, 0.95)))
    else:
        spectrum = datagen.Spectrum.spiked(float(gen.uniform(2.0, 10.0)), 1.0)
    return datagen.build_covariance(d, spectrum, int(gen.integers(0, 2**31)))


# -- core_linalg -------------------------------------------------------------

def battery_linalg(seed):
    t = _Tally("core_linalg")
    gen = _gen(seed, 1)
    for _ in range(50):
        d = int(gen.integers(1, 12))
        m = _random_sym(gen, d, 10.0 ** gen.uniform(-3, 3))
        t.check(diag_part(m) + off_part(m) == m, "diag_part + off_part != M")
        t.check(operator_norm(off_part(m)) <= 2.0 * operator_norm(m) * (1 + 1e-12),
                "||Off(M)|| > 2 ||M||")
    for d in (2, 5, 10, 20, 35, 50):
        m = _random_sym(gen, d)
        w, v = eigh(m)
        resid = np.linalg.norm((v * w) @ v.T - m.to_dense())
        t.check(resid <= 1e-9 * (1.0 + m.frobenius()), f"eigh round-trip residual {resid:.3g} at d={d}")
        t.check(bool(np.all(np.diff(w) <= 0)), "eigenvalues not descending")
    for d in (2, 3, 5):
        net = build_net(d, seed=seed)
        m = _random_sym(gen, d)
        sup = float(np.max(np.abs(np.einsum("ki,ij,kj->k", net.vectors, m.to_dense(), net.vectors))))
        norm = operator_norm(m)
        t.check(sup <= norm * (1 + 1e-12) and sup >= 0.9 * norm,
                f"net sup {sup:.4g} not within 10% of ||M|| = {norm:.4g} at d={d}")
    return t.result()


# -- data_gen ----------------------------------------------------------------

def battery_datagen(seed):
    t = _Tally("data_gen")
    gen = _gen(seed, 2)
    d = 3
    spec = _random_spec(gen, d)
    p = float(gen.uniform(0.2, 1.0))
    s = int(gen.integers(0, 2**31))
    n = 100_000
    x = datagen.sample_gaussian(spec, n, s)
    y = datagen.sparsify(x, p, s)
    nz = x != 0
    t.check(bool(np.array_equal(y.mask[nz], y.y[nz] != 0)), "mask disagrees with y != 0")
    again = datagen.sparsify(x, p, s)
    t.check(bool(np.array_equal(again.y, y.y)), "sparsify not deterministic")
    frac = y.mask.mean()
    t.check(abs(frac - p) <= 5 * math.sqrt(p * (1 - p) / y.mask.size) + 1e-15, "kept fraction off")

    sigma = spec.sigma.to_dense()
    target = p * p * sigma
    np.fill_diagonal(target, p * np.diag(sigma))
    outer = y.y[:, :, None] * y.y[:, None, :]
    mean = outer.mean(axis=0)
    se = outer.std(axis=0, ddof=1) / math.sqrt(n)
    for i, j in itertools.product(range(d), repeat=2):
        t.check(abs(mean[i, j] - target[i, j]) <= 5 * se[i, j],
                f"second moment ({i},{j}) off by {abs(mean[i, j] - target[i, j]):.3g}")

    bound = 5 * math.sqrt(spec.summary.operator_norm / n)
    for name, data in (("gaussian", x), ("student_t", datagen.sample_student_t(spec, 8.0, n, s))):
        t.check(bool(np.all(np.abs(data.mean(axis=0)) <= bound)), f"{name} sample mean not near zero")

    spec10 = _random_spec(gen, 10)
    k = datagen.audit_kappa(datagen.sample_gaussian(spec10, n, s), build_net(10, 100, seed=seed))
    t.check(1.25 <= k <= 1.40, f"gaussian audit_kappa {k:.4f} outside [1.25, 1.40]")
    return t.result()


# -- robust_scalar -----------------------------------------------------------

def battery_psi(seed, psi_fn=psi):
    t = _Tally("psi")
    grid = np.linspace(-5.0, 5.0, 2001)
    vals = np.array([psi_fn(v) for v in grid])
    neg = np.array([psi_fn(-v) for v in grid])
    t.check(bool(np.all(vals == -neg)), "psi not odd")
    t.check(bool(np.all(np.abs(vals) <= 1.0)), "psi not bounded by 1")
    inside = np.abs(grid) <= 1.0
    t.check(bool(np.all(vals[inside] == grid[inside])), "psi not the identity on [-1, 1]")
    t.check(bool(np.all(np.abs(np.diff(vals)) <= np.diff(grid) * (1 + 1e-12))), "psi not 1-Lipschitz")
    return t.result()


def battery_lemma3(seed, psi_fn=psi, draws=10_000):
    """Both psi inequalities (part 1 in ``statement`` form, part 2 in
    ``proof`` form) on random finite-support variables and a fixed two-atom
    grid."""
    t = _Tally("lemma3")
    gen = _gen(seed, 3)
    for _ in range(draws):
        z = random_finite_support(gen)
        a = float(5.0 * (1.0 - gen.random()))  # (0, 5]
        r1 = check_lemma3_part1(z, "statement", psi_fn)
        t.check(r1.holds, f"part 1: psi(EZ)={r1.lhs:.6g} > {r1.rhs:.6g} for atoms {z.values.tolist()}")
        r2 = check_lemma3_part2(z, a, "proof")
        t.check(r2.holds, f"part 2 (a={a:.3g}): {r2.lhs:.6g} > {r2.rhs:.6g}")
    small = [-1.0, -0.5, -0.1, 0.0, 0.1, 0.5]
    large = [5.0, 10.0, 20.0, 30.0, 50.0, 100.0]
    for lo, hi in itertools.product(small, large):
        for q in (0.01, 0.05, 0.1, 0.2, 0.3):
            z = FiniteSupportRV(np.array([lo, hi]), np.array([1.0 - q, q]))
            r1 = check_lemma3_part1(z, "statement", psi_fn)
            t.check(r1.holds, f"part 1 grid: psi(EZ)={r1.lhs:.6g} > {r1.rhs:.6g} at ({lo}, {hi}, {q})")
    return t.result()


def battery_robust_mean(seed):
    t = _Tally("robust_mean")
    gen = _gen(seed, 4)
    delta = 0.1
    for _ in range(50):
        xs = gen.standard_normal(int(gen.integers(40, 400)))
        base = robust_mean(xs, delta)
        c = float(gen.uniform(-100, 100))
        t.check(abs(robust_mean(xs + c, delta) - (base + c)) <= 1e-12 * (1 + abs(c) + abs(base)),
                "robust_mean not translation-equivariant")
        k = int(gen.integers(-4, 5))
        t.check(robust_mean(xs * 2.0 ** k, delta) == base * 2.0 ** k,
                "robust_mean not scale-equivariant")
    n, trials = 1000, 1000
    sd = math.sqrt(1.0 / 12.0)
    bound = 10.0 * sd * math.sqrt(math.log(1 / delta) / n)
    ok = sum(abs(robust_mean(gen.random(n), delta) - 0.5) <= bound for _ in range(trials))
    t.check(ok >= (1 - delta) * trials, f"deviation bound held in {ok}/{trials} trials")
    return t.result()


# -- direction_net -----------------------------------------------------------

def battery_net(seed):
    t = _Tally("direction_net")
    gen = _gen(seed, 5)
    for d in (1, 2, 3, 5, 8):
        net = build_net(d, seed=seed)
        m = _random_sym(gen, d)
        dense = m.to_dense()
        vals = np.einsum("ki,ij,kj->k", net.vectors, dense, net.vectors)
        rec = np.diag(vals[:d]).astype(float)
        k = d
        for i, j in zip(*np.triu_indices(d, 1)):
            rec[i, j] = rec[j, i] = 0.5 * (vals[k] - vals[k + 1])
            k += 2
        t.check(bool(np.allclose(rec, dense, rtol=0, atol=1e-12)), f"reconstruction failed at d={d}")
        t.check(float(np.max(np.abs(vals))) <= operator_norm(m) * (1 + 1e-12), "net sup exceeds ||M||")
        t.check(bool(np.allclose(np.linalg.norm(net.vectors, axis=1), 1.0, atol=1e-12)), "non-unit vector")
    return t.result()


# -- quadform_est ------------------------------------------------------------

def brute_force_objective(table, step=1e-3):
    """Exhaustive grid minimum of ``max_v |a_v . theta - value(v)|``.

    Every optimal ``theta`` lies in the box ``theta_k in [b_k - B, b_k + B]``
    with ``B = max|value|`` (``b_k`` is the value at ``e_k`` or at
    ``(e_i + e_j)/sqrt 2``, where the form reads off ``theta_k`` alone), so a
    grid over that box is exhaustive at resolution ``step``. The diagonal
    grid is restricted to ``theta >= 0``.
    """
    net = table.net
    d = net.dim
    a = design_matrix(net.vectors, table.part)
    b = table.values
    big = float(np.max(np.abs(b)))
    if table.part == DIAGONAL:
        anchors = b[:d]
    else:
        anchors = b[d::2][: d * (d - 1) // 2]
    axes = []
    for c in anchors:
        lo, hi = c - big, c + big
        if table.part == DIAGONAL:
            lo = max(lo, 0.0)
        axes.append(np.arange(lo, hi + step, step))
    best = math.inf
    first = axes[0]
    for rest in itertools.product(*axes[1:]) if len(axes) > 1 else [()]:
        theta = np.empty((first.size, len(axes)))
        theta[:, 0] = first
        theta[:, 1:] = rest
        obj = np.max(np.abs(theta @ a.T - b), axis=1)
        best = min(best, float(obj.min()))
    return best


def battery_quadform(seed, brute_force_cases=4):
    t = _Tally("quadform_est")
    gen = _gen(seed, 6)
    # table invariants and psi(lam q)/lam monotonicity
    for _ in range(20):
        d = int(gen.integers(1, 6))
        y = gen.standard_t(5, size=(int(gen.integers(5, 60)), d))
        net = build_net(d, 20, seed=seed)
        lam = float(10.0 ** gen.uniform(-3, 1))
        for part in (DIAGONAL, OFFDIAGONAL):
            vals = truncated_form(y, part, lam, net).values
            t.check(bool(np.all(np.abs(vals) <= 1.0 / lam * (1 + 1e-12))), "value outside [-1/lam, 1/lam]")
            if part == DIAGONAL:
                t.check(bool(np.all(vals >= 0)), "negative diagonal form")
    lams = np.geomspace(1e-3, 1e3, 200)
    for q in np.geomspace(1e-3, 1e3, 30):
        r = np.array([psi(l * q) / l for l in lams])
        t.check(bool(np.all(np.diff(r) <= 1e-15 * r[:-1])), f"psi(lam q)/lam increases at q={q:.3g}")

    # brute-force optimality on the structured net
    for case in range(brute_force_cases):
        d = 2 + case % 2
        net = build_net(d, 0)
        y = 0.15 * gen.standard_normal((40, d))
        for part, fit in ((DIAGONAL, fit_diagonal), (OFFDIAGONAL, fit_offdiagonal)):
            table = truncated_form(y, part, 1.0, net)
            solver = fit(table).objective
            grid = brute_force_objective(table)
            t.check(grid >= solver - 2e-3, f"grid beats solver: {grid:.5g} < {solver:.5g} ({part}, d={d})")

    # scale and permutation equivariance of oracle_estimate
    for _ in range(3):
        d = 4
        spec = _random_spec(gen, d)
        y = datagen.sparsify(datagen.sample_gaussian(spec, 300, int(gen.integers(1 << 30))), 0.7, 1).y
        net = build_net(d, 30, seed=seed)
        tr, op = spec.summary.trace, spec.summary.operator_norm
        base, _ = oracle_estimate(y, 0.1, 0.7, tr, op, 3 ** 0.25, net)
        scaled, _ = oracle_estimate(4.0 * y, 0.1, 0.7, 16 * tr, 16 * op, 3 ** 0.25, net)
        err = np.max(np.abs(scaled.to_dense() - 16.0 * base.to_dense()))
        t.check(err <= 1e-10 * np.max(np.abs(base.to_dense())), "scale equivariance broken")
        perm = gen.permutation(d)
        permuted, _ = oracle_estimate(y[:, perm], 0.1, 0.7, tr, op, 3 ** 0.25, net.permuted(np.argsort(perm)))
        expect = base.to_dense()[np.ix_(perm, perm)]
        err = np.max(np.abs(permuted.to_dense() - expect))
        t.check(err <= 1e-9 * (1 + np.max(np.abs(expect))), f"permutation equivariance off by {err:.3g}")
    return t.result()


def lemma4_check(spec, v, p, n, seed, dist="gaussian", dof=None):
    """Monte Carlo second moments of the diagonal and off-diagonal forms at
    ``v`` against ``2 p k^4 ||Diag S||^2`` and ``4 p^2 k^4 ||S||^2``.

    Returns ``[(mean, bound, se), (mean, bound, se)]``.
    """
    x = datagen.sample(spec, n, seed, dist, dof)
    y = datagen.sparsify(x, p, seed).y
    kappa = datagen.gaussian_kappa() if dist == "gaussian" else datagen.student_t_kappa(dof)
    k4 = kappa ** 4
    dq = (y * y) @ (v * v)
    oq = (y @ v) ** 2 - dq
    sigma = spec.sigma
    out = []
    for q, bound in ((dq, 2 * p * k4 * float(np.max(sigma.diagonal())) ** 2),
                     (oq, 4 * p * p * k4 * spec.summary.operator_norm ** 2)):
        sq = q * q
        out.append((float(sq.mean()), bound, float(sq.std(ddof=1) / math.sqrt(n))))
    return out


def battery_lemma4(seed, triples=5, n=100_000):
    t = _Tally("lemma4")
    gen = _gen(seed, 7)
    for k in range(triples):
        d = int(gen.integers(2, 8))
        spec = _random_spec(gen, d)
        v = gen.standard_normal(d)
        v /= np.linalg.norm(v)
        p = float(gen.uniform(0.1, 1.0))
        dist, dof = ("gaussian", None) if k % 2 == 0 else ("student_t", 12.0)
        for name, (mean, bound, se) in zip(("diag", "off"),
                                           lemma4_check(spec, v, p, n, int(gen.integers(1 << 30)), dist, dof)):
            t.check(mean <= bound + 3 * se, f"{name}: {mean:.4g} > {bound:.4g} + 3 SE")
    return t.result()


# -- param_est ---------------------------------------------------------------

def battery_params(seed):
    t = _Tally("param_est")
    gen = _gen(seed, 8)
    for _ in range(5):
        d = int(gen.integers(2, 6))
        spec = _random_spec(gen, d)
        s = int(gen.integers(1 << 30))
        x = datagen.sample_gaussian(spec, 400, s)
        y = datagen.sparsify(x, 0.6, s).y
        net = build_net(d, 30, seed=seed)
        g = GFunction(y, 0.6, net, net.with_zero())
        t.check(g(0.0) == 0.0, "g(0) != 0")
        alphas = np.geomspace(1e-3, 1e2, 40)
        t.check(all(g(a) >= 0.0 for a in alphas), "g negative")
        gs = GFunction(4.0 * y, 0.6, net, net.with_zero())
        t.check(all(gs(a / 4.0) == g(a) for a in alphas), "g not scale invariant")
        t.check(estimate_p(x, 0.1) == 1.0, "p_hat != 1 on dense data")
        ph = estimate_p(y, 0.1)
        t.check(0.0 < ph <= 1.0, "p_hat outside (0, 1]")
    for _ in range(20):
        tr, op = float(gen.uniform(1, 20)), float(gen.uniform(0.5, 5))
        p, n = float(gen.uniform(0.1, 1)), int(gen.integers(10, 10_000))
        c2 = 4.0 ** int(gen.integers(-3, 4))
        l1, l2 = pick_lambdas(tr, op, p, n, 0.1, 1.3)
        m1, m2 = pick_lambdas(c2 * tr, c2 * op, p, n, 0.1, 1.3)
        t.check(m1 == l1 / c2 and m2 == l2 / c2, "pick_lambdas not homogeneous")
    return t.result()


# -- pipeline ----------------------------------------------------------------

def battery_pipeline(seed):
    t = _Tally("pipeline")
    gen = _gen(seed, 9)
    for _ in range(3):
        d = 4
        spec = _random_spec(gen, d)
        s = int(gen.integers(1 << 30))
        y = datagen.sparsify(datagen.sample_gaussian(spec, 800, s), 0.8, s)
        cfg = EstimatorConfig(net_extra_random=40, seed=s)
        a = estimate_covariance(y, cfg, truth=spec)
        b = estimate_covariance(y, cfg, truth=spec)
        t.check(a.sigma_hat == b.sigma_hat and a.opnorm_hat == b.opnorm_hat, "not deterministic")
        proj = psd_project(a.sigma_hat)
        w, _ = eigh(proj)
        t.check(float(w[-1]) >= -1e-9, "psd_project left a negative eigenvalue")
        err = operator_norm(proj - spec.sigma)
        t.check(err <= 2.0 * a.error_opnorm * (1 + 1e-12), "projection more than doubled the error")
        s_ = spec.summary
        ocfg = EstimatorConfig(net_extra_random=40, seed=s, mode="oracle", oracle_p=0.8,
                               oracle_trace=s_.trace, oracle_opnorm=s_.operator_norm)
        rep = estimate_covariance(y, ocfg)
        direct, _ = oracle_estimate(y, 0.1, 0.8, s_.trace, s_.operator_norm, 3 ** 0.25,
                                    build_net(d, 40, seed=s))
        t.check(rep.sigma_hat == direct, "oracle mode differs from oracle_estimate")
    return t.result()


def run_invariant_suite(seed=0, psi_fn=psi, quick=False):
    """Run every battery. ``psi_fn`` replaces the truncation function in the
    psi and lemma3 batteries (for mutation checks)."""
    return [
        battery_linalg(seed),
        battery_datagen(seed),
        battery_psi(seed, psi_fn),
        battery_lemma3(seed, psi_fn, draws=2_000 if quick else 10_000),
        battery_robust_mean(seed),
        battery_net(seed),
        battery_quadform(seed, brute_force_cases=2 if quick else 4),
        battery_lemma4(seed, triples=2 if quick else 5),
        battery_params(seed),
        battery_pipeline(seed),
    ]


def format_suite(results):
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        line = f"{status} {r.name:<14} checks={r.checks} failures={r.failures}"
        if r.detail:
            line += f"  first failure: {r.detail}"
        lines.append(line)
    return "\n".join(lines) + "\n"
