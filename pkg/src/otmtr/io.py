"""On-disk formats: CSV problem directories and JSON configuration.

A problem directory holds one ``X_<t>.csv`` / ``Y_<t>.csv`` pair per task
(comma-separated, no header, row-major, tasks numbered from 0). Simulated
scenarios additionally write ``truth.csv`` (p x T true coefficients) and
``meta.json`` (scenario echo plus the realized noise variance).
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .core import MtwHyperparams, MultiTaskProblem
from .simulate import GridScenario, GroundTruth

__all__ = ["save_problem", "load_problem", "save_truth", "load_truth",
           "save_hyperparams", "load_hyperparams", "save_matrix_csv",
           "load_matrix_csv"]

_CSV_FMT = "%.17g"


def save_matrix_csv(path, array) -> None:
    np.savetxt(path, np.atleast_2d(np.asarray(array, dtype=float)),
               fmt=_CSV_FMT, delimiter=",")


def load_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def save_problem(directory, problem: MultiTaskProblem) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for t, (X, y) in enumerate(zip(problem.designs, problem.targets)):
        save_matrix_csv(directory / f"X_{t}.csv", X)
        save_matrix_csv(directory / f"Y_{t}.csv", y[:, None])


def load_problem(directory) -> MultiTaskProblem:
    directory = Path(directory)
    pattern = re.compile(r"X_(\d+)\.csv$")
    tasks = sorted(int(m.group(1)) for f in directory.iterdir()
                   if (m := pattern.match(f.name)))
    if not tasks:
        raise FileNotFoundError(f"no X_<t>.csv files in {directory}")
    if tasks != list(range(len(tasks))):
        raise FileNotFoundError(f"task files not contiguous from 0: {tasks}")
    designs, targets = [], []
    for t in tasks:
        designs.append(load_matrix_csv(directory / f"X_{t}.csv"))
        targets.append(load_matrix_csv(directory / f"Y_{t}.csv").ravel())
    return MultiTaskProblem.from_arrays(designs, targets)


def save_truth(directory, truth: GroundTruth) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix_csv(directory / "truth.csv", truth.coefficients)
    meta = {"sigma2": truth.sigma2}
    if truth.scenario is not None:
        meta["scenario"] = truth.scenario.to_dict()
    with open(directory / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_truth(directory) -> Tuple[np.ndarray, Optional[dict]]:
    """Return (true coefficients, meta dict or None)."""
    directory = Path(directory)
    coefficients = load_matrix_csv(directory / "truth.csv")
    meta_path = directory / "meta.json"
    meta = None
    if meta_path.exists():
        with open(meta_path) as fh:
            meta = json.load(fh)
    return coefficients, meta


def save_hyperparams(path, params: MtwHyperparams) -> None:
    with open(path, "w") as fh:
        json.dump(params.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_hyperparams(path) -> MtwHyperparams:
    with open(path) as fh:
        return MtwHyperparams.from_dict(json.load(fh))


def save_scenario_problem(directory, truth: GroundTruth) -> None:
    """Write the full scenario layout: task CSVs plus truth and meta."""
    problem = MultiTaskProblem.from_arrays(
        [truth.design] * truth.scenario.n_tasks, list(truth.targets))
    save_problem(directory, problem)
    save_truth(directory, truth)
