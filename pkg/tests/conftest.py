import numpy as np
import pytest

from groupaffect.pipeline import fixture_config, load_manifest, make_fixture, run_pipeline


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def fixture_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixture")
    return load_manifest(make_fixture(root / "data", n_images=60, seed=0))


@pytest.fixture(scope="session")
def fixture_run(fixture_dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("run_a")
    config = fixture_config(out)
    report = run_pipeline(config, fixture_dataset)
    return config, report


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.RESULTS, key=lambda s: int(s.split("criterion")[1].split()[0])):
        terminalreporter.write_line(line)
