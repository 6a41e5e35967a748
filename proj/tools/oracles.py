"""Reference values frozen into the unit tests. Run: python3 tools/oracles.py"""
import numpy as np
from scipy import special, stats
from statsmodels.stats.multitest import multipletests


def matern(r, nu, ell):
    if r == 0:
        return 1.0
    a = np.sqrt(2 * nu) * r / ell
    return 2 ** (1 - nu) / special.gamma(nu) * a ** nu * special.kv(nu, a)


print("matern")
for nu in (0.5, 1.5, 2.5):
    for r in (0.05, 0.1, 0.3):
        print(f"  nu={nu} r={r} ell=0.2 -> {matern(r, nu, 0.2):.17g}")

print("bh")
p = np.array([0.01, 0.04, 0.03, 0.2, 0.005, 0.5, 0.04])
rej, adj, _, _ = multipletests(p, alpha=0.05, method="fdr_bh")
print("  adjusted", [f"{v:.17g}" for v in adj])
print("  reject", rej.astype(int).tolist())

print("glm")
x = np.array([0.5, -1.2, 0.3, 2.0, -0.7, 1.1])
X = np.column_stack([np.ones(6), x])
Y = np.column_stack([1 + 2 * x + np.array([0.1, -0.2, 0.05, 0.3, -0.1, 0.0]),
                     np.array([0.3, -0.1, 0.2, 0.0, 0.1, -0.4])])
coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
res = Y - X @ coef
s2 = (res ** 2).sum(0) / 4
se = np.sqrt(np.outer(np.diag(np.linalg.inv(X.T @ X)), s2))
t = coef / se
pv = 2 * stats.t.sf(np.abs(t), 4)
print("  coef", [f"{v:.17g}" for v in coef.ravel()])
print("  se", [f"{v:.17g}" for v in se.ravel()])
print("  p", [f"{v:.17g}" for v in pv.ravel()])
print("  tq", f"{stats.t.ppf(0.975, 4):.17g}")


def split_rhat(chains):
    halves = []
    for c in chains:
        n = len(c) // 2
        halves += [c[:n], c[len(c) - n:]]
    h = np.array(halves)
    n = h.shape[1]
    W = h.var(1, ddof=1).mean()
    B = n * h.mean(1).var(ddof=1)
    return np.sqrt(((n - 1) / n * W + B / n) / W)


print("rhat")
k = np.arange(40)
chains = [np.sin(0.7 * k) + 0.01 * k, np.cos(0.3 * k) + 0.5, np.sin(1.3 * k + 0.2) - 0.2]
print("  three", f"{split_rhat(chains):.17g}")
chains = [np.sin(0.7 * np.arange(21)), np.cos(0.9 * np.arange(21))]
print("  odd", f"{split_rhat(chains):.17g}")

print("vi_summary")
for mu, sd in ((0.3, 0.2), (-1.0, 0.5), (0.0, 1.0)):
    pp = stats.norm.sf(0, loc=mu, scale=sd)
    print(f"  mu={mu} sd={sd} p_plus={pp:.17g} e_s={2 * pp - 1:.17g} lo={mu - stats.norm.ppf(0.975) * sd:.17g}")
