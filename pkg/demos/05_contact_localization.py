"""
End-to-end contact localization
===============================

Scan, preprocess, train and score one sensor with the default settings. This
takes about three minutes on one CPU core. A second part repeats the run on
three fabrication variants of the sensor and compares their errors.
"""
import sys
import time

from fbgtouch import pipeline
from fbgtouch.evaluation import cross_sensor_consistency
from fbgtouch.fbgsim import default_layout

t0 = time.perf_counter()
run = pipeline.localization_run(seed=0)
rep = run.report
print(f"mean error {rep.mean_error_mm:.2f} mm, median {rep.median_error_mm:.2f} mm")
print(f"contact accuracy {rep.contact_accuracy:.1%}  {rep.confusion}")
print(f"loss by epoch: {[round(x, 4) for x in run.history[::5]]}")
print(f"{time.perf_counter() - t0:.0f} s")

if "--consistency" in sys.argv:
    base = default_layout()
    con = cross_sensor_consistency(base, [1, 2, 3], pipeline.consistency_runner(base_layout=base))
    print(con.table())
