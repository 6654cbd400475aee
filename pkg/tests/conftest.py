import sys
from pathlib import Path

import numpy as np
import pytest

# make reference_impls importable from every test module
sys.path.insert(0, str(Path(__file__).parent))

from biasaudit.cohort import Sex, SubjectRecord


def make_record(i: int, age: float, err: float, sex="Female", race="White") -> SubjectRecord:
    return SubjectRecord(
        id=f"T{i:05d}",
        age=age,
        predicted_age=age + err,
        sex=Sex.FEMALE if str(sex).lower().startswith("f") else Sex.MALE,
        race_raw=race,
    )


def make_cohort(per_group: int, seed: int = 0, err_fn=None) -> list[SubjectRecord]:
    """Six audited subgroups with N(0,2) errors unless err_fn overrides."""
    rng = np.random.default_rng(seed)
    records = []
    i = 0
    for race in ("White", "Black", "Asian"):
        for sex in ("Female", "Male"):
            for _ in range(per_group):
                age = float(rng.uniform(45, 81))
                if err_fn is None:
                    err = float(rng.normal(0.0, 2.0))
                else:
                    err = float(err_fn(rng, race, sex))
                records.append(make_record(i, age, err, sex, race))
                i += 1
    return records


@pytest.fixture
def small_partition():
    from biasaudit.cohort import partition

    return partition(make_cohort(40, seed=3))
