"""
Ablating factors and searching for them greedily
================================================

Run the eight-variant factorization ablation on a small dataset, then let
the greedy stepwise search rediscover which modality carries the label.
"""

from fmtnet.data import SyntheticTaskSpec, generate_dataset, split
from fmtnet.experiments import greedy_factor_search, run_ablation_suite
from fmtnet.model import FmtConfig, ModalitySpec
from fmtnet.train import TrainConfig

mods = tuple(ModalitySpec(n, 2, 4) for n in ("L", "V", "A"))
config = FmtConfig(modalities=mods, d_y=1, label_kind="binary",
                   mtl_layers=1, fms_units=1, seed=0)

# 1. the ablation table: full factor set, dropped subsets, single
#    modalities, and summarize-by-addition; the label is the XOR of a pulse
#    sign in L and one in V, so single-modality variants sit at chance
spec = SyntheticTaskSpec("bimodal-product", num_samples=300, seq_len=8,
                         dims=(2, 2, 2), seed=0)
datasets = split(generate_dataset(spec), (0.8, 0.1, 0.1), seed=0)
tc = TrainConfig(learning_rate=0.003, max_epochs=25, batch_size=32,
                 patience=25)
table = run_ablation_suite(config, datasets, tc, seeds=[0])
for row in table.rows:
    print(f"{row['variant']:>4}  factors={row['factors']}  "
          f"Accuracy={row['Accuracy_mean']:.3f}")

# 2. greedy search: the label depends only on modality L, so factors
#    containing L should fit best early
spec = SyntheticTaskSpec("unimodal-sum", num_samples=300, seq_len=8,
                         dims=(2, 2, 2), seed=0)
datasets = split(generate_dataset(spec), (0.8, 0.1, 0.1), seed=0)
tc = TrainConfig(learning_rate=0.003, max_epochs=8, batch_size=32, patience=8)
chosen, trace = greedy_factor_search(config, datasets, tc, budget=2)
for record in trace:
    print(f"round {record['round']}: chose {record['chosen']} "
          f"(val loss {record['val_loss']:.4f})")
print("selected factor masks:", list(chosen.masks()))
