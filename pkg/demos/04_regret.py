# # How far from the best switching strategy?
#
# Regret compares the realized utility gains with the best sequence of
# provider choices that switches at most m - 1 times. Computing it needs the
# gain of every provider in every round, which run_market records when
# analysis=True (those extra calls are not charged to the budget).

from datamarket import MarketConfig, compute_regret, run_market
from datamarket.regret import UtilityTrace, theory_tuning
from datamarket.scenarios import gen_mixture_regression

n, K, B, m = 40, 4, 6000, 2
alpha, eta = theory_tuning(n, B, K, m)
print(f"theory tuning: alpha={alpha:.4f} eta={eta:.4f}")

sc = gen_mixture_regression(n, 50, 25, 4, seed=0, holdout_size=500)
cfg = MarketConfig(n=n, B=B, K=K, eta=eta, alpha=alpha, gamma=0.01, seed=0, m=m)
_, _, trace = run_market(cfg, sc.oracles(), sc.utility(5.0), sc.initial_params(), analysis=True)

report = compute_regret(UtilityTrace.from_run(trace), m, K, alpha=alpha, eta=eta)
for key, value in report.to_dict().items():
    print(f"{key:>15}: {value}")

# The bound is loose at this size. Average regret per unit of budget is
# what should shrink as B grows; try B = 1500, 3000, 6000 to see it.

for budget in (1500, 3000, 6000):
    a, e = theory_tuning(n, budget, K, m)
    cfg = MarketConfig(n=n, B=budget, K=K, eta=e, alpha=a, gamma=0.01, seed=0, m=m)
    _, _, tr = run_market(cfg, sc.oracles(), sc.utility(5.0), sc.initial_params(), analysis=True)
    r = compute_regret(UtilityTrace.from_run(tr), m, K, alpha=a, eta=e)
    print(f"B={budget:5d}  regret={r.regret:8.3f}  per unit={r.avg_regret:.5f}  bound={r.bound:.1f}")
