"""How feature influence shifts across diffusion timesteps.

Each timestep has its own tree, so gain importance can be read per step.  The
expected pattern: at the start of the reverse process the mean-estimate column
guides everything; by the final step the noisy response input dominates,
because by then it is already close to the answer.

    python demos/timestep_importance.py
"""

import numpy as np

from diffboost.data import toy_generate
from diffboost.dbt import DbtConfig, train_dbt
from diffboost.tree import TreeParams, gain_importance


def main():
    train = toy_generate("a", 2000, seed=7)
    cfg = DbtConfig(T=200, n_noise=50,
                    tree_params=TreeParams(num_leaves=31, min_samples_leaf=20),
                    seed=7)
    print("training (T=200)...")
    model = train_dbt(train, cfg)
    names = ["noisy_response"] + [c.name for c in model.columns] + ["mean_estimate"]
    print("\nper-timestep share of total split gain:")
    print("    t   " + "  ".join(f"{n:>14}" for n in names))
    for t in (200, 160, 120, 80, 40, 10, 1):
        gains = gain_importance(model.step_trees[t - 1])
        share = gains / gains.sum() if gains.sum() else gains
        print(f"  {t:3d}   " + "  ".join(f"{s:14.3f}" for s in share))
    last = gain_importance(model.step_trees[0])
    print(f"\nat t=1 the dominant feature is {names[int(np.argmax(last))]!r}")


if __name__ == "__main__":
    main()
