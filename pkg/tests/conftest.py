import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--large", action="store_true", default=False,
        help="also run the largest-scale reproductions (p >= 20000; slow)")


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "large: largest-scale reproduction, only with --large")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--large"):
        return
    skip_large = pytest.mark.skip(
        reason="pass --large to run the largest-scale reproductions")
    for item in items:
        if "large" in item.keywords:
            item.add_marker(skip_large)
