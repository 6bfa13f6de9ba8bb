import numpy as np
import pytest

from skydiver.snn import DTYPE, LayerSpec


def naive_conv(frame, w, pad, stride):
    """Scalar reference: explicit loops, explicit bounds checks, float64 accumulate."""
    M, C, R, _ = w.shape
    _, H, W = frame.shape
    E = (H - R + 2 * pad) // stride + 1
    F = (W - R + 2 * pad) // stride + 1
    out = np.zeros((M, E, F))
    for n in range(M):
        for x in range(E):
            for y in range(F):
                acc = 0.0
                for i in range(C):
                    for j in range(R):
                        for k in range(R):
                            r, c = x * stride - pad + j, y * stride - pad + k
                            if 0 <= r < H and 0 <= c < W and frame[i, r, c]:
                                acc += float(w[n, i, j, k])
                out[n, x, y] = acc
    return out


def fig4_layer(v_th=1.0):
    """Two 3x3 single-channel filters: nine 0.3 entries and nine 0.1 entries."""
    w = np.stack([np.full((1, 3, 3), 0.3), np.full((1, 3, 3), 0.1)]).astype(DTYPE)
    return LayerSpec("conv", 1, 2, 3, 8, 8, w, pad=2, v_th=v_th)


def six_spike_frame():
    # 2x3 block: exactly six output neurons see four or more spikes
    f = np.zeros((1, 8, 8), dtype=bool)
    f[0, 3:5, 3:6] = True
    return f


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
