import numpy as np
import pytest

from satml import synth
from satml.ingest import write_channel


@pytest.fixture(scope="session")
def mex_tables():
    return synth.gen_mex_tables(seed=2, n_hours=48)


@pytest.fixture(scope="session")
def mex_files(mex_tables, tmp_path_factory):
    d = tmp_path_factory.mktemp("mexdata")
    names = ["saa", "dmop", "ftl", "evt", "lt", "pw"]
    inputs = {}
    for name, table in zip(names, mex_tables):
        p = d / f"{name}.csv"
        p.write_bytes(write_channel(table))
        inputs[name] = str(p)
    return inputs


@pytest.fixture(scope="session")
def integral_case():
    orbit, irem, eclipse, revs, truth = synth.gen_integral_tables(
        seed=1, n_revs=6, cadence_s=64)
    return {"orbit": orbit, "irem": irem, "eclipse": eclipse,
            "revs": revs, "truth": truth}


@pytest.fixture(scope="session")
def integral_files(integral_case, tmp_path_factory):
    d = tmp_path_factory.mktemp("integraldata")
    inputs = {}
    for name in ("orbit", "irem", "eclipse"):
        p = d / f"{name}.csv"
        p.write_bytes(write_channel(integral_case[name]))
        inputs[name] = str(p)
    return inputs


@pytest.fixture(scope="session")
def mex_run_config(mex_files):
    return {
        "spacecraft": "mex",
        "inputs": mex_files,
        "learner": {"kind": "forest",
                    "params": {"n_trees": 10, "min_leaf": 5}, "seed": 7},
        "importance": {"repeats": 2},
    }


def small_linear(seed=5):
    return synth.gen_linear_dataset(n=200, seed=seed)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
