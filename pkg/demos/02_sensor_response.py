"""
Simulated grating response
==========================

Eight gratings on two rings. A contact shifts each grating's wavelength by an
amount that falls off with distance, settles with first-order dynamics and
sits on a small noise floor. Wear slowly increases the response gain.
"""
import numpy as np

from fbgtouch.evaluation import (measure_degradation, measure_sensitivity, step_response_times)
from fbgtouch.fbgsim import ContactStimulus, SimConfig, default_layout, simulate_stream, steady_state_shift
from fbgtouch.geometry import NormalizedPoint, SensorGeometry

geom, layout, sim = SensorGeometry(), default_layout(), SimConfig()
for wl, pos in layout.gratings:
    print(f"{wl:.1f} nm at u={pos.u:.3f} v={pos.v:.2f}")

# a 1 N press right on grating 0
press = ContactStimulus(layout.positions[0], 1.0, 0.1, 0.6)
print("settled shifts (nm):", np.round(steady_state_shift(layout, sim, geom, press), 4))

stream = simulate_stream(layout, sim, geom, [press], 1.0, seed=0)
x = stream.wavelengths_nm[:, 0] - layout.nominal[0]
for t_ms in (100, 150, 200, 400, 600, 700, 900):
    print(f"t={t_ms:4d} ms  shift {x[t_ms * 2]:+.4f} nm")

rise, fall = step_response_times(layout, sim, geom)
print(f"rise {rise:.1f} ms, fall {fall:.1f} ms")

g = layout.positions[0]
print(f"smallest detectable force at a grating: {measure_sensitivity(layout, sim, geom, g):.4f} N")
away = NormalizedPoint(g.u, g.v + sim.kernel_sigma_mm / geom.height_mm)
print(f"4 mm away: {measure_sensitivity(layout, sim, geom, away):.4f} N")

print(f"degradation after 1760 cycles: {100 * measure_degradation(layout, sim, geom, g, 1760):.2f}%")
digit = SimConfig.digit_profile()
print(f"camera-based sensor profile, 100 cycles: {100 * measure_degradation(layout, digit, geom, g, 100):.2f}%")
