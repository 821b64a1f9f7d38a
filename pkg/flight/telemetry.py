"""
CSV telemetry: one row per simulation step with a fixed column order, and
the thrust-strategy comparison sweep.
"""

import csv
import logging
import math
from pathlib import Path
from typing import Iterator, Optional, Sequence, Tuple, Union

from django.conf import settings

from .controller import ThrustStrategy, thrust_scale

logger = logging.getLogger(__name__)


def _triple(prefix: str) -> list:
    return [f"{prefix}{i}" for i in (1, 2, 3)]


TELEMETRY_COLUMNS = (
    ['t'] + _triple('x') + _triple('v') + _triple('xd')
    + ['ex_norm', 'ealpha_norm'] + _triple('ef')
    + ['f'] + _triple('M')
    + ['psi_R_Rd', 'psi_Rd_Rc', 'eomega_norm']
    + _triple('g1_')
    + ['V2', 'V3', 'V4', 'V', 'e_norm_sq', 'bound_DlamV', 'viol_count']
)

SWEEP_COLUMNS = ['theta_deg', 'lee_ratio', 'kar_ratio', 'proposed_ratio']


class TelemetryWriter:
    """Writes rows of floats under a header; integers are written as is."""

    def __init__(self, path: Union[str, Path], columns: Sequence[str] = TELEMETRY_COLUMNS,
                 float_format: Optional[str] = None):
        self.path = Path(path)
        self.columns = list(columns)
        self.float_format = float_format or settings.WORKBENCH_FLOAT_FORMAT
        self.rows = 0
        self._file = None
        self._writer = None

    def __enter__(self) -> 'TelemetryWriter':
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, 'w', newline='', encoding='utf-8')
        self._writer = csv.writer(self._file, lineterminator='\n')
        self._writer.writerow(self.columns)
        return self

    def __exit__(self, exc_type, exc, tb):
        self._file.close()
        logger.info(f"Wrote {self.rows} rows to {self.path}")
        return False

    def _cell(self, value) -> str:
        if isinstance(value, int) and not isinstance(value, bool):
            return str(value)
        return self.float_format % float(value)

    def write(self, values: Sequence) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"Row has {len(values)} values, expected {len(self.columns)}")
        self._writer.writerow([self._cell(v) for v in values])
        self.rows += 1


def thrust_sweep_rows() -> Iterator[Tuple[int, float, float, float]]:
    """f/|f_d| of each strategy for theta' = 0..180 degrees."""
    for deg in range(181):
        cos_theta = math.cos(math.radians(deg))
        yield (
            deg,
            thrust_scale(cos_theta, ThrustStrategy.LEE2010),
            thrust_scale(cos_theta, ThrustStrategy.KAR),
            thrust_scale(cos_theta, ThrustStrategy.PROPOSED),
        )


def write_thrust_sweep(path: Union[str, Path], float_format: Optional[str] = None) -> int:
    with TelemetryWriter(path, SWEEP_COLUMNS, float_format) as writer:
        for row in thrust_sweep_rows():
            writer.write(row)
    return writer.rows
