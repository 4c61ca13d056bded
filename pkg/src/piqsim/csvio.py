"""Delimited output formats. Floats are written with 17 significant digits."""

from __future__ import annotations

import csv
import io
from typing import Iterable, Sequence

from .dynamics import PulseMetrics, SystemParams, Trajectory
from .spin_algebra import block_list, m_values

TRAJECTORY_COLUMNS = ("t", "intensity", "jz", "trace")
METRICS_COLUMNS = ("N", "gamma", "dgamma", "ddd", "A_I", "t_I", "emitted")
RATES_COLUMNS = ("model", "parameters", "gamma", "delta_dd")
MEANFIELD_COLUMNS = ("t", "p", "theta", "intensity")


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def render(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def population_labels(N: int) -> list[str]:
    return [f"p_J{b.twoJ}_M{tm}" for b in block_list(N) for tm in m_values(b.twoJ)]


def trajectory_csv(traj: Trajectory, with_populations: bool = False) -> str:
    header = list(TRAJECTORY_COLUMNS)
    if with_populations:
        header += population_labels(traj.params.N)
    I, jz, tr = traj.intensity(), traj.jz(), traj.trace()
    rows = []
    for k, t in enumerate(traj.t):
        row = [float(t), float(I[k]), float(jz[k]), float(tr[k])]
        if with_populations:
            row += [float(v) for v in traj.states[k].diagonal_vector()]
        rows.append(row)
    return render(header, rows)


def metrics_row(params: SystemParams, m: PulseMetrics) -> tuple:
    return (params.N, float(params.gamma), float(params.dgamma), float(params.ddd),
            float(m.A_I), float(m.t_I), float(m.emitted))


def metrics_csv(rows: Iterable[tuple]) -> str:
    return render(METRICS_COLUMNS, rows)


def read_csv(path_or_text: str, is_text: bool = False) -> list[dict[str, str]]:
    if is_text:
        return list(csv.DictReader(io.StringIO(path_or_text)))
    with open(path_or_text, newline="") as fh:
        return list(csv.DictReader(fh))
