"""CSV and manifest emission.

All files are written atomically (temp file + rename) and deterministically:
floats carry 17 significant digits and manifests are plain `key: value`
lines with no timestamps, so identical configurations reproduce identical
bytes.
"""

import os
import tempfile

import numpy as np


def format_float(x) -> str:
    if isinstance(x, float) and (np.isnan(x) or np.isinf(x)):
        return "nan" if np.isnan(x) else ("inf" if x > 0 else "-inf")
    return format(float(x), ".17g")


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_cell(cell) for cell in row))
    atomic_write(path, "\n".join(lines) + "\n")


def write_manifest(path: str, entries: dict):
    lines = [f"{key}: {_format_cell(value)}" for key, value in entries.items()]
    atomic_write(path, "\n".join(lines) + "\n")


def kinematics_rows(result):
    """Rows for kinematics.csv: branch, t, fidelity, qfi, velocity, length, completion."""
    rows = []
    for label in sorted(result.branches):
        branch = result.branches[label]
        kin = branch.kinematics
        completion = (kin.completion if kin.completion is not None
                      else np.full(len(kin.times), np.nan))
        for k, t in enumerate(kin.times):
            rows.append((label, float(t), float(kin.fidelity_to_target[k]),
                         float(kin.qfi[k]), float(kin.velocity[k]),
                         float(kin.length[k]), float(completion[k])))
    return rows


KINEMATICS_HEADER = ("branch", "t", "fidelity_to_target", "qfi", "velocity",
                     "length", "completion")
SPECTRUM_HEADER = ("bath_label", "k", "re_lambda", "im_lambda", "abs_overlap")
LINRES_HEADER = ("delta_t", "one_minus_f_heat", "one_minus_f_cool",
                 "fit_coefficient")
EQUIDIST_HEADER = ("t_warm", "t_hot", "t_cold", "residual")


def linres_rows(result):
    return [
        (float(d), float(yh), float(yc), float(result.fit_coefficient))
        for d, yh, yc in zip(result.delta_t, result.one_minus_f_heating,
                             result.one_minus_f_cooling)
    ]
