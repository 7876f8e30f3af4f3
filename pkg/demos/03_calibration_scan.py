"""
Calibration scan and training windows
=====================================

The rig presses every grid cell a few times with a little random offset,
rotating the sensor between passes. Samples near each press midpoint are
labeled as contact, and short windows ending at each sample become the
training examples.
"""
import numpy as np

from fbgtouch import calib
from fbgtouch.fbgsim import SimConfig, default_layout
from fbgtouch.geometry import SensorGeometry
from fbgtouch.pipeline import PrepConfig, prepare

geom, layout, sim, plan = SensorGeometry(), default_layout(), SimConfig(), calib.ScanPlan()
stream, events = calib.run_scan(geom, layout, sim, plan, seed=0)
print(f"{len(events)} presses, {len(stream)} samples ({len(stream) / sim.sample_rate_hz:.0f} s)")
print("first press:", events[0])

labels = calib.label_stream(stream, events, w_p=400)
print(f"{labels.contact.mean():.1%} of samples labeled as contact")

prep = PrepConfig()
data = prepare(stream, events, prep, seed=0, baseline=layout.nominal)
print(f"train windows {len(data.train)}, test windows {len(data.test)}")
print(f"held-out presses: {len(data.test_events)}")
print("normalization scale per channel (nm):", np.round(data.scale, 4))

# windows tied to a held-out press never appear in training
assert not set(data.train.event) & set(data.test.event)
w = data.test[int(np.flatnonzero(data.test.contact)[0])]
print("a contact window:", w.signal.shape, w.position)
