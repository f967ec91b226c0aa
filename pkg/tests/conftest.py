import numpy as np
import pytest

from pddid.panel import PanelDataset

STUDY = 365.0
CUTOFF = 182.0


def cell_dataset(values, reps=1, pre_time=100.0, post_time=300.0):
    """Saturated 2x2 panel; ``values`` maps (arm, period) to the outcome."""
    unit, group, treated, time, y = [], [], [], [], []
    for arm in ("I", "R"):
        for period, t in (("pre", pre_time), ("post", post_time)):
            for k in range(reps):
                unit.append(f"{arm}{period}{k}")
                group.append(f"{arm}1")
                treated.append(arm == "I")
                time.append(t)
                y.append(values[(arm, period)])
    return PanelDataset(unit, group, treated, time, y, study_length=STUDY, cutoff=CUTOFF)


CELL_VALUES = {("R", "pre"): 0.0, ("R", "post"): 1.0, ("I", "pre"): 0.0, ("I", "post"): 3.0}


def linear_dataset(gamma, l, alpha_arm=0.5, days=range(1, 366, 4), groups_per_arm=2,
                   covariates=None, mu=None, slopes=None):
    """Noise-free panel on a regular day grid: arm lines plus gamma after the cutoff.

    ``slopes`` overrides the per-group trend slopes (per study window).
    """
    unit, group, treated, time, y = [], [], [], [], []
    labels = [f"I{k + 1}" for k in range(groups_per_arm)] + [f"R{k + 1}" for k in range(groups_per_arm)]
    for gi, g in enumerate(labels):
        is_int = g.startswith("I")
        sign = 1.0 if is_int else -1.0
        slope = sign * l if slopes is None else slopes[gi]
        for d in days:
            unit.append(f"{g}-{d}")
            group.append(g)
            treated.append(is_int)
            time.append(float(d))
            y.append(sign * alpha_arm + slope * d / STUDY + gamma * (is_int and d > CUTOFF))
    y = np.array(y)
    names = ()
    if covariates is not None:
        covariates = np.asarray(covariates, float)
        y = y + covariates @ np.asarray(mu, float)
        names = tuple(f"c{k}" for k in range(covariates.shape[1]))
    return PanelDataset(unit, group, treated, time, y, covariates,
                        study_length=STUDY, cutoff=CUTOFF, covariate_names=names)


@pytest.fixture
def cell_means_dataset():
    return cell_dataset(CELL_VALUES, reps=10)


@pytest.fixture
def minimal_csv(tmp_path):
    path = tmp_path / "minimal.csv"
    path.write_text(
        "unit_id,group_id,arm,time,outcome\n"
        "a,G1,I,100,0\n"
        "b,G1,I,300,3\n"
        "c,G2,R,100,0\n"
        "d,G2,R,300,1\n"
    )
    return path


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
