"""
Files and the command line
==========================

Streams are little-endian binary frames, press logs are one JSON record per
line, and checkpoints hold the network weights with the normalization they
were trained under. The ``fbgtouch`` command strings these together.
"""
import subprocess
import sys
import tempfile
from pathlib import Path

from fbgtouch import formats

out = Path(tempfile.mkdtemp())
cfg = out / "quick.toml"
cfg.write_text("""
[geometry]
grid_cols = 2
grid_rows = 2
rotations = 4
[model]
epochs = 3
""")

for cmd in (["gen-calib"], ["train"], ["eval-loc"], ["bench", "sensitivity"], ["bench", "response"]):
    subprocess.run([sys.executable, "-m", "fbgtouch.cli", *cmd, "--config", str(cfg), "--out", str(out)],
                   check=True)

stream = formats.read_stream(out / "calib" / "stream_fiber0.tcap")
print(f"stream: {len(stream)} frames x {stream.channels} gratings at {stream.sample_rate_hz:.0f} Hz")
print("first press record:", (out / "calib" / "events.jsonl").read_text().splitlines()[0])
params, config, baseline, scale = formats.read_checkpoint(out / "model" / "checkpoint.tckp")
print("checkpoint config:", config)
print(sorted(p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file()))
