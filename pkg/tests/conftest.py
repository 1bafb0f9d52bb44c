import pytest

from scorepath.learn import GridSpec, SvmHyperParams, generate_dataset, train_linear_svm
from scorepath.score import compose
from scorepath.sensor import Corridor, SensorConfig, sensor_map


class Trained:
    def __init__(self):
        self.corridor = Corridor()
        self.sensor_cfg = SensorConfig()
        self.data = generate_dataset(self.corridor, self.sensor_cfg, GridSpec())
        self.model = train_linear_svm(self.data, SvmHyperParams())
        self.score = compose(self.model, sensor_map(self.corridor, self.sensor_cfg))


@pytest.fixture(scope="session")
def trained():
    return Trained()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
