import numpy as np
import pytest

from ecgproto.errors import ConfigurationError
from ecgproto.render import RenderSpec, render


@pytest.fixture(scope="module")
def signal():
    rng = np.random.default_rng(2)
    t = np.arange(1000) / 100.0
    sig = 0.5 * np.sin(2 * np.pi * 1.3 * t) + 0.05 * rng.normal(size=(12, 1000))
    return sig.astype(np.float32)


def test_byte_identical_output(tmp_path, signal):
    spec = RenderSpec(highlight_seconds=(5.0, 5.9375), cutout=True, title="X")
    render(signal, spec, tmp_path / "a.svg")
    render(signal, spec, tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_plain_global_render(tmp_path, signal):
    render(signal, RenderSpec(title="GWANDER"), tmp_path / "g.svg")
    content = (tmp_path / "g.svg").read_text()
    assert content.startswith("<?xml")
    assert "svg" in content


def test_rhythm_emphasis(tmp_path, signal):
    render(signal, RenderSpec(emphasize_rhythm_strip=True), tmp_path / "r.svg")
    assert (tmp_path / "r.svg").stat().st_size > 1000


def test_highlight_bounds_checked():
    with pytest.raises(ConfigurationError):
        RenderSpec(highlight_seconds=(9.5, 10.5))
    with pytest.raises(ConfigurationError):
        RenderSpec(highlight_seconds=(-0.1, 1.0))


def test_cutout_requires_highlight():
    with pytest.raises(ConfigurationError):
        RenderSpec(cutout=True)


def test_bad_signal_shape(tmp_path, signal):
    with pytest.raises(ConfigurationError):
        render(signal[:, :500], RenderSpec(), tmp_path / "bad.svg")
