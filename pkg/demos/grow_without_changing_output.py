"""
Growing a circuit without changing its output
=============================================

A randomly initialised one-qubit reuploader is grown once with each
strategy.  New blocks arrive as identity pairs, so the function is unchanged
while the set of reachable frequencies widens.
"""
import math

import numpy as np

from qgrow import (
    GrowthSchedule,
    GrowthStrategy,
    InitSpec,
    accessible_spectrum,
    ansatz_block,
    build_reuploader,
    feature_map_block,
    grow,
    predict,
)
from qgrow.model import gapped_layout

###############################################################################
# Four ansatz blocks leave three gaps; only the middle one holds a feature
# map, giving ``UUFUU``.
ansatz, fm = ansatz_block(1), feature_map_block(1)
init = InitSpec("uniform", (0.0, math.pi), (0.0, math.pi))
model = build_reuploader(1, gapped_layout(3, [1], ansatz, fm), init, seed=3)
print("start:", model.layout_signature(), accessible_spectrum(model))

###############################################################################
# Grow once per strategy and compare outputs on a dense grid.
x = np.linspace(0.0, 2 * math.pi, 200)[:, None]
before = predict(model, x)
for strategy in GrowthStrategy:
    schedule = GrowthSchedule(strategy, max_feature_map_blocks=model.n_feature_maps + 1)
    grown, event = grow(model, schedule, seed=0)
    drift = np.max(np.abs(predict(grown, x) - before))
    print(
        f"{strategy.value:<7} {grown.layout_signature():<8} "
        f"max |f_new - f_old| = {drift:.1e}  probe residual = {event.residual:.1e}"
    )

###############################################################################
# With all encoding scales set to one, each paired feature map encodes x
# twice and so widens the spectrum by two on either side.
for depth in range(1, 5):
    schedule = GrowthSchedule(GrowthStrategy.BLOCK, max_feature_map_blocks=depth + 1)
    model, _ = grow(model, schedule, seed=depth)
    ones = model.with_params(psi=np.ones(model.params.psi.size))
    print(model.layout_signature(), accessible_spectrum(ones))
