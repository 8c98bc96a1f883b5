"""
Fitting cos(x) while the circuit grows
======================================

A single-block identity-initialised student starts as the constant 1 and
gains a feature map every 100 epochs until it has three.
"""
import math

import numpy as np

from qgrow import (
    GrowthSchedule,
    InitSpec,
    TrainConfig,
    ansatz_block,
    build_reuploader,
    feature_map_block,
    reuploader_layout,
    train_regression,
)
from qgrow.training import Dataset

###############################################################################
# Data: 100 evenly spaced training points and 100 random test points.
rng = np.random.default_rng(0)
x_train = np.linspace(0.0, 2 * math.pi, 100)[:, None]
x_test = rng.uniform(0.0, 2 * math.pi, (100, 1))
data = Dataset(x_train, np.cos(x_train[:, 0]), x_test, np.cos(x_test[:, 0]))

###############################################################################
# Student: ``U F U`` with identity pairs, so its initial output is exactly 1.
layout = reuploader_layout(1, ansatz_block(1), feature_map_block(1))
student = build_reuploader(1, layout, InitSpec("identity"), seed=1)

###############################################################################
# Train with a block-growth schedule.
schedule = GrowthSchedule("BLOCK", interval=100, max_feature_map_blocks=3)
report = train_regression(student, data, TrainConfig(epochs=300, lr=0.1, seed=1, schedule=schedule))

for e in report.growth_events:
    print(f"epoch {e.epoch}: grew at block {e.positions}, residual {e.residual:.1e}")
for epoch in (0, 99, 100, 199, 200, 299):
    print(f"epoch {epoch:3d}  blocks {report.n_fm_blocks[epoch]}  test MSE {report.test_losses[epoch]:.2e}")
print("final layout:", report.final_model.layout_signature(), " best test MSE:", f"{report.best_loss:.2e}")
