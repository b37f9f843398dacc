import pytest

from coc_asr.align import _pykernel

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def _kernels():
    ks = [("python", _pykernel)]
    try:
        from coc_asr.align import _kernel

        ks.append(("cython", _kernel))
    except ImportError:
        pass
    return ks


KERNELS = _kernels()


@pytest.fixture(params=[k for _, k in KERNELS], ids=[n for n, _ in KERNELS])
def kernel(request):
    return request.param
