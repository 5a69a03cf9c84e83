"""The six-row ablation ladder on the synthetic set.

Components are added cumulatively: distance graph only, then visibility,
planning, and category graphs, then plan-guided prediction, and finally
category-specific decoders. Desk-scale training, so the WSADE column is a
smoke reading, not a benchmark.
"""

from epg_mgcn.ablation import run_ablation
from epg_mgcn.model import ModelConfig
from epg_mgcn.synthetic import make_synthetic_dataset
from epg_mgcn.training import TrainConfig

samples = make_synthetic_dataset(8)
base = ModelConfig(channels=16, t_obs_points=6, t_pred=6)
schedule = TrainConfig(batch_size=4, max_epochs=40, seed=0)

table = run_ablation(samples, base, schedule,
                     progress=lambda row: print(f"finished {row.label}"))
print()
print(table.format_table())
