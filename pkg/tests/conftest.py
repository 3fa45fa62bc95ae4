import pytest

def pytest_addoption(parser) -> None:
    parser.addoption("--runslow", action="store_true", default=False,
                     help="also run the long acceptance runs marked slow")

def pytest_configure(config) -> None:
    config.addinivalue_line("markers", "slow: long acceptance run, skipped unless --runslow is given")

def pytest_collection_modifyitems(config, items) -> None:
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="slow, use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
