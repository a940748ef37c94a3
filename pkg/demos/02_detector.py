"""
Training a residual leak detector
=================================

Each sensor is predicted from the others by least squares. Large
prediction errors (residuals) raise an alarm.
"""

from lspkit import LeakScenario, generate_demands, load_bundled, measure, train
from lspkit.detector import alarms, residuals

model = load_bundled("hanoi")
day = model.num_steps() // 7
demands = generate_demands(model, seed=7, num_steps=7 * day)
meas = measure(model, demands)
train_part, val_part = meas.slice(0, 5 * day), meas.slice(5 * day, 6 * day)

# %%
# The threshold rule sits 1.5x above the worst training residual, the
# weighted rule is calibrated on the validation day.
for rule in ("max_threshold", "weighted_sum"):
    det = train(train_part, val_part, rule)
    print(rule, "training alarms:", alarms(det, train_part).sum(), "validation alarms:", alarms(det, val_part).sum())

# %%
# A 300 cm2 leak at junction 12 during the last day.
leak = LeakScenario(model.node_ids.index("12"), 300.0, start_step=6 * day + 10, duration_steps=6)
leaky = measure(model, demands, leak).slice(6 * day, 7 * day)
flags = alarms(det, leaky)
print("alarm steps:", flags.nonzero()[0].tolist())
print("residuals at leak onset:", residuals(det, leaky.values[10]).round(3))
