"""Regenerate the committed synthetic ratings dataset."""
import sys
from pathlib import Path

import numpy as np

from shadowbounds import simlab
from shadowbounds.io import records_to_csv
from shadowbounds.tables import Records

data = simlab.make_uss_like()
rec = Records(np.ones(len(data), dtype=np.int64), data.y, data.f)
out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parents[1] / "src/shadowbounds/data/uss_like.csv"
out.write_text(records_to_csv(rec), encoding="utf-8")
print(out)
