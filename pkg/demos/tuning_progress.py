import numpy as np

from rbs import Dimension, SearchSpace, optimize

# one log-scaled knob with a known sweet spot at 1e-2
space = SearchSpace((Dimension("knob", 1e-4, 1.0),))


def objective(params):
    return float((np.log10(params[0]) + 2.0) ** 2)


best, best_trial, history = optimize(objective, space, n_trials=60, seed=3)
print(f"best knob {best[0]:.6f} after {len(history)} trials "
      f"(objective {best_trial.objective:.2e})")

running = np.minimum.accumulate([t.objective for t in history])
for i in (9, 19, 39, 59):
    print(f"  best after {i + 1:>2} trials: {running[i]:.2e}")

# same budget spent blindly, for contrast
rng = np.random.default_rng(3)
draws = np.exp(rng.uniform(np.log(1e-4), 0.0, size=60))
print(f"plain random search, same budget: {min(objective([v]) for v in draws):.2e}")
